#ifndef SELBOUNDS_TOOLS_CONFIG_HPP
#define SELBOUNDS_TOOLS_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "selbounds/constraints.hpp"
#include "selbounds/parametric.hpp"
#include "selbounds/simharness.hpp"

namespace selbounds::tools {

struct BootstrapConfig {
    std::size_t R = 1000;
    std::uint64_t seed = 1;
    bool seed_given = false;
};

struct ConstraintItem {
    AuxConstraint::Kind kind;
    double response_rate = 0.0;
    std::string column;
    double qbar = 0.0;
    double share = 1.0; // relative weight of alpha1, normalized over items
};

struct ConstraintsConfig {
    LevelConvention convention = LevelConvention::Significance;
    double alpha1 = 0.0; // in the file's convention
    double alpha2 = 0.0;
    std::vector<ConstraintItem> items;

    double alpha1_significance() const { return to_significance(alpha1, convention); }
    double alpha2_significance() const { return to_significance(alpha2, convention); }
};

struct ParametricConfig {
    std::vector<std::string> columns;
    std::vector<SignConstraint> signs; // empty = all free
};

struct TuneConfig {
    double total_alpha = 0.05;
    std::size_t points = 10;                  // grid size when no explicit splits
    std::vector<AlphaSplit> splits;           // significance units; optional
};

struct AnalysisConfig {
    Estimand::Kind kind = Estimand::Kind::Mean;
    std::string y_column, x_column, z_column;
    double a = 0.1;
    double b = 1.0;
    double alpha = 0.05;
    std::optional<BootstrapConfig> bootstrap;
    std::optional<ConstraintsConfig> constraints;
    std::optional<ParametricConfig> parametric;
    std::optional<TuneConfig> tune;
};

AnalysisConfig load_analysis_config(const std::string& path);

ExperimentSpec load_experiment_spec(const std::string& path);

} // namespace selbounds::tools

#endif
