#include "config.hpp"

#include <fstream>

#include <json.hpp>

#include "selbounds/errors.hpp"

namespace selbounds::tools {

using nlohmann::json;

namespace {

json load_json(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(what, "cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(what, std::string("JSON parse failure: ") + e.what());
    }
    return j;
}

template <typename T>
T require(const json& j, const std::string& field) {
    if (!j.contains(field)) throw ConfigError(field, "missing required field");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(field, "has the wrong type");
    }
}

template <typename T>
T optional_or(const json& j, const std::string& field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(field, "has the wrong type");
    }
}

LevelConvention parse_convention(const std::string& s, const std::string& field) {
    if (s == "significance") return LevelConvention::Significance;
    if (s == "coverage") return LevelConvention::Coverage;
    throw ConfigError(field, "expected 'significance' or 'coverage', got '" + s + "'");
}

SignConstraint parse_sign(const std::string& s) {
    if (s == "free") return SignConstraint::Free;
    if (s == "nonneg" || s == "non_negative") return SignConstraint::NonNegative;
    if (s == "nonpos" || s == "non_positive") return SignConstraint::NonPositive;
    if (s == "zero") return SignConstraint::Zero;
    throw ConfigError("parametric.signs",
                      "expected free|nonneg|nonpos|zero, got '" + s + "'");
}

} // namespace

AnalysisConfig load_analysis_config(const std::string& path) {
    const json j = load_json(path, "config");
    AnalysisConfig cfg;

    const json est = j.contains("estimand") ? j.at("estimand") : json::object();
    const std::string kind = require<std::string>(est, "kind");
    if (kind == "mean") {
        cfg.kind = Estimand::Kind::Mean;
        cfg.y_column = require<std::string>(est, "y");
    } else if (kind == "ols") {
        cfg.kind = Estimand::Kind::OLS;
        cfg.x_column = require<std::string>(est, "x");
        cfg.y_column = require<std::string>(est, "y");
    } else if (kind == "iv") {
        cfg.kind = Estimand::Kind::IV;
        cfg.z_column = require<std::string>(est, "z");
        cfg.x_column = require<std::string>(est, "x");
        cfg.y_column = require<std::string>(est, "y");
    } else {
        throw ConfigError("estimand.kind", "expected mean|ols|iv, got '" + kind + "'");
    }

    if (!j.contains("box")) throw ConfigError("box", "missing required section");
    cfg.a = require<double>(j.at("box"), "a");
    cfg.b = require<double>(j.at("box"), "b");
    cfg.alpha = optional_or<double>(j, "alpha", 0.05);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");

    if (j.contains("bootstrap")) {
        const json b = j.at("bootstrap");
        BootstrapConfig bc;
        bc.R = optional_or<std::size_t>(b, "R", 1000);
        if (b.contains("seed")) {
            bc.seed = require<std::uint64_t>(b, "seed");
            bc.seed_given = true;
        }
        cfg.bootstrap = bc;
    }

    if (j.contains("constraints")) {
        const json c = j.at("constraints");
        ConstraintsConfig cc;
        cc.convention = parse_convention(
            optional_or<std::string>(c, "level_convention", "significance"),
            "constraints.level_convention");
        cc.alpha1 = require<double>(c, "alpha1");
        cc.alpha2 = require<double>(c, "alpha2");
        for (const json& item : require<json>(c, "list")) {
            ConstraintItem ci;
            const std::string ckind = require<std::string>(item, "kind");
            if (ckind == "response_rate") {
                ci.kind = AuxConstraint::Kind::ResponseRate;
                ci.response_rate = require<double>(item, "r");
            } else if (ckind == "covariate_mean") {
                ci.kind = AuxConstraint::Kind::CovariateMean;
                ci.column = require<std::string>(item, "column");
                ci.qbar = require<double>(item, "qbar");
            } else {
                throw ConfigError("constraints.list.kind",
                                  "expected response_rate|covariate_mean, got '" + ckind + "'");
            }
            ci.share = optional_or<double>(item, "share", 1.0);
            if (!(ci.share > 0.0)) throw ConfigError("constraints.list.share", "must be > 0");
            cc.items.push_back(std::move(ci));
        }
        if (cc.items.empty()) throw ConfigError("constraints.list", "must not be empty");
        const double a1 = cc.alpha1_significance();
        const double a2 = cc.alpha2_significance();
        if (!(a1 > 0.0 && a1 < 1.0) || !(a2 > 0.0 && a2 < 1.0) || a1 + a2 >= 1.0)
            throw ConfigError("constraints.alpha1",
                              "significance levels must be positive with alpha1 + alpha2 < 1");
        cfg.constraints = std::move(cc);
    }

    if (j.contains("parametric")) {
        const json p = j.at("parametric");
        const std::string link = optional_or<std::string>(p, "link", "logit");
        if (link != "logit") throw ConfigError("parametric.link", "only 'logit' is available");
        ParametricConfig pc;
        pc.columns = require<std::vector<std::string>>(p, "columns");
        if (p.contains("signs")) {
            for (const std::string& s : require<std::vector<std::string>>(p, "signs"))
                pc.signs.push_back(parse_sign(s));
            if (pc.signs.size() != pc.columns.size())
                throw ConfigError("parametric.signs", "length must match columns");
        }
        cfg.parametric = std::move(pc);
    }

    if (j.contains("tune")) {
        const json t = j.at("tune");
        TuneConfig tc;
        tc.total_alpha = optional_or<double>(t, "total", 0.05);
        tc.points = optional_or<std::size_t>(t, "points", 10);
        if (t.contains("splits")) {
            for (const json& s : t.at("splits")) {
                if (!s.is_array() || s.size() != 2)
                    throw ConfigError("tune.splits", "each split is a [alpha1, alpha2] pair");
                tc.splits.push_back({s[0].get<double>(), s[1].get<double>()});
            }
        }
        cfg.tune = std::move(tc);
    }
    return cfg;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
    json j;
    try {
        j = load_json(path, "spec");
    } catch (const ConfigError& e) {
        throw SpecError(e.what());
    }
    ExperimentSpec spec;
    try {
        const std::string gen = require<std::string>(j, "generator");
        if (gen == "std_normal_mean") {
            spec.generator = ExperimentSpec::Generator::StdNormalMean;
        } else if (gen == "binomial_sum_constraint") {
            spec.generator = ExperimentSpec::Generator::BinomialSumConstraint;
        } else {
            throw ConfigError("generator",
                              "expected std_normal_mean|binomial_sum_constraint, got '" + gen +
                                  "'");
        }
        spec.N_population = optional_or<std::size_t>(j, "N_population", 1000000);
        spec.n_grid = optional_or<std::vector<std::size_t>>(j, "n_grid", {100});
        spec.replicates = optional_or<std::size_t>(j, "replicates", 1000);
        if (spec.replicates < 100) throw ConfigError("replicates", "must be at least 100");
        if (j.contains("box")) {
            spec.a = require<double>(j.at("box"), "a");
            spec.b = require<double>(j.at("box"), "b");
        }
        spec.alpha = optional_or<double>(j, "alpha", 0.05);
        spec.seed = optional_or<std::uint64_t>(j, "seed", 1);
        spec.bootstrap_R = optional_or<std::size_t>(j, "bootstrap_R", 500);
        spec.qbar = optional_or<double>(j, "qbar", 0.5);

        const LevelConvention conv = parse_convention(
            optional_or<std::string>(j, "level_convention", "significance"),
            "level_convention");
        spec.alpha1 = to_significance(optional_or<double>(j, "alpha1", 0.02), conv);
        spec.alpha2 = to_significance(optional_or<double>(j, "alpha2", 0.03), conv);

        if (j.contains("power_grid")) {
            const json g = j.at("power_grid");
            const double from = require<double>(g, "from");
            const double to = require<double>(g, "to");
            const double step = require<double>(g, "step");
            if (!(step > 0.0) || to < from)
                throw ConfigError("power_grid", "needs from <= to and step > 0");
            for (double v = from; v <= to + 1e-12; v += step) spec.power_grid.push_back(v);
        }
        if (j.contains("split_grid")) {
            const json g = j.at("split_grid");
            const double total = require<double>(g, "total");
            const std::size_t points = require<std::size_t>(g, "points");
            if (points < 1) throw ConfigError("split_grid.points", "must be positive");
            for (std::size_t i = 1; i <= points; ++i) {
                const double a1 =
                    total * static_cast<double>(i) / static_cast<double>(points + 1);
                spec.split_grid.push_back({a1, total - a1});
            }
        }
        spec.split_replicates = optional_or<std::size_t>(j, "split_replicates", 100);
        spec.outputs = require<std::vector<std::string>>(j, "outputs");
        if (spec.outputs.empty()) throw ConfigError("outputs", "must not be empty");
        for (const auto& o : spec.outputs) {
            if (o != "bias" && o != "coverage" && o != "power" && o != "sampling" &&
                o != "constraint_coverage" && o != "width_vs_split")
                throw ConfigError("outputs", "unknown output '" + o + "'");
        }
    } catch (const json::exception& e) {
        throw SpecError(std::string("malformed spec: ") + e.what());
    } catch (const ConfigError& e) {
        throw SpecError(e.what());
    }
    return spec;
}

} // namespace selbounds::tools
