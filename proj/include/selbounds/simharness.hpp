#ifndef SELBOUNDS_SIMHARNESS_HPP
#define SELBOUNDS_SIMHARNESS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "selbounds/bootstrap.hpp"
#include "selbounds/constraints.hpp"
#include "selbounds/inference.hpp"
#include "selbounds/lfp.hpp"
#include "selbounds/support.hpp"

namespace selbounds {

/// Monte-Carlo experiment description. The population parameters are
/// approximated on a large finite draw of size N_population from which
/// replicates subsample without replacement.
struct ExperimentSpec {
    enum class Generator { StdNormalMean, BinomialSumConstraint };

    Generator generator = Generator::StdNormalMean;
    std::size_t N_population = 1'000'000;
    std::vector<std::size_t> n_grid{100};
    std::size_t replicates = 1000;
    double a = 0.1;
    double b = 1.0;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::size_t bootstrap_R = 500;

    // constraint-simulation settings (BinomialSumConstraint)
    double qbar = 0.5;
    double alpha1 = 0.02; // significance units
    double alpha2 = 0.03;
    std::vector<AlphaSplit> split_grid;
    std::size_t split_replicates = 100;

    std::vector<double> power_grid;
    std::vector<std::string> outputs;

    WeightBox box() const { return WeightBox(a, b); }
};

/// The large finite draw standing in for the population, with its collapsed
/// support and unconstrained identified interval.
struct PopulationDraw {
    ObservationSet obs;
    SupportTable table;
    IntervalEstimate interval;
};

PopulationDraw approximate_population_draw(const ExperimentSpec& spec);

/// Identified-interval endpoints of the population stand-in draw.
std::pair<double, double> approximate_population_interval(const ExperimentSpec& spec);

struct BiasRow {
    std::size_t n = 0;
    std::size_t replicates = 0;
    double bias_lo = 0.0; // mean(beta_lo_hat) - beta_lo
    double bias_hi = 0.0;
    double mc_se_lo = 0.0;
    double mc_se_hi = 0.0;
};

std::vector<BiasRow> run_bias_experiment(const ExperimentSpec& spec, const PopulationDraw& pop);

struct CoverageRow {
    std::size_t n = 0;
    std::string method; // "asymptotic" or "bootstrap"
    double coverage = 0.0;
    std::size_t replicates = 0;
};

std::vector<CoverageRow> run_coverage_experiment(const ExperimentSpec& spec,
                                                 const PopulationDraw& pop);

struct PowerRow {
    double beta_tilde = 0.0;
    double rejection = 0.0; // fraction of replicates with p < alpha
    std::size_t replicates = 0;
};

std::vector<PowerRow> run_power_experiment(const ExperimentSpec& spec, const PopulationDraw& pop,
                                           std::span<const double> beta_tilde_grid);

struct SamplingDistResult {
    std::vector<double> draws; // beta_hi_hat per replicate
    double fit_mean = 0.0;     // population upper bound
    double fit_sd = 0.0;       // sigma at the population optimal weights / sqrt(n)
    double ks_distance = 0.0;
    std::size_t n = 0;
};

SamplingDistResult run_sampling_distribution(const ExperimentSpec& spec,
                                             const PopulationDraw& pop);

struct ConstraintSimResult {
    double pop_lo = 0.0; // population constrained interval (exact support)
    double pop_hi = 0.0;
    double pop_unconstrained_lo = 0.0;
    double pop_unconstrained_hi = 0.0;
    double coverage = 0.0; // theorem-3 CI covering [pop_lo, pop_hi]
    double frac_tightened = 0.0;
    std::size_t replicates = 0;
    std::vector<AlphaSplit> splits;
    std::vector<double> mean_widths;
    std::size_t width_replicates = 0;
};

ConstraintSimResult run_constraint_simulation(const ExperimentSpec& spec);

/// Exact discrete support of the binomial-sum design, masses from the exact
/// binomial probabilities (cells are (y, q) pairs).
SupportTable binomial_sum_population_table(std::size_t notional_n);

/// One-sample Kolmogorov-Smirnov distance against N(mean, sd^2).
double ks_distance_normal(std::span<const double> draws, double mean, double sd);

/// Runs every experiment named in spec.outputs, writes one CSV per table
/// plus manifest.json into out_dir, and returns the file names written.
std::vector<std::string> run_outputs(const ExperimentSpec& spec, const std::string& out_dir);

} // namespace selbounds

#endif
