#ifndef SELBOUNDS_ERRORS_HPP
#define SELBOUNDS_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selbounds {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// f or g evaluated to NaN/inf on an observation row.
class NonFiniteEvaluation : public Error {
public:
    std::size_t row;
    NonFiniteEvaluation(std::size_t row_index, const std::string& which)
        : Error("non-finite evaluation of " + which + " at row " + std::to_string(row_index)),
          row(row_index) {}
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& msg) : Error(msg) {}
};

/// Weighted denominator vanishes (or can vanish over the weight box).
class ZeroDenominator : public Error {
public:
    explicit ZeroDenominator(const std::string& msg) : Error(msg) {}
};

class SupportTooLarge : public Error {
public:
    std::size_t num_cells;
    explicit SupportTooLarge(std::size_t k)
        : Error("support too large for vertex enumeration: K = " + std::to_string(k)),
          num_cells(k) {}
};

class NotAVertex : public Error {
public:
    explicit NotAVertex(const std::string& msg) : Error(msg) {}
};

class EmptyDraws : public Error {
public:
    EmptyDraws() : Error("quantile of an empty draw vector") {}
};

/// More than 1% of bootstrap resamples hit a zero denominator.
class ResampleFailure : public Error {
public:
    std::size_t failures;
    std::size_t resamples;
    ResampleFailure(std::size_t nfail, std::size_t total)
        : Error("bootstrap aborted: " + std::to_string(nfail) + " of " +
                std::to_string(total) + " resamples failed (weak-instrument pathology?)"),
          failures(nfail), resamples(total) {}
};

/// A constraint that cannot be satisfied for any weight vector in the box.
class InfeasibleByConstruction : public Error {
public:
    explicit InfeasibleByConstruction(const std::string& msg) : Error(msg) {}
};

class InfeasibleConstraints : public Error {
public:
    explicit InfeasibleConstraints(const std::string& msg) : Error(msg) {}
};

class NonConvergence : public Error {
public:
    double kkt_residual;
    NonConvergence(const std::string& msg, double residual)
        : Error(msg), kkt_residual(residual) {}
};

class InfeasiblePolytope : public Error {
public:
    explicit InfeasiblePolytope(const std::string& msg) : Error(msg) {}
};

/// The selection link cannot be inverted at a box boundary.
class BoundaryLinkError : public Error {
public:
    explicit BoundaryLinkError(const std::string& msg) : Error(msg) {}
};

class InvalidParameter : public Error {
public:
    explicit InvalidParameter(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    std::string field;
    ConfigError(const std::string& field_name, const std::string& msg)
        : Error("config error [" + field_name + "]: " + msg), field(field_name) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

class SpecError : public Error {
public:
    explicit SpecError(const std::string& msg) : Error(msg) {}
};

} // namespace selbounds

#endif
