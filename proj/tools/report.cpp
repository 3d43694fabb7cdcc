#include "report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selbounds/bootstrap.hpp"
#include "selbounds/csv_io.hpp"
#include "selbounds/normal.hpp"
#include "selbounds/parametric.hpp"

namespace selbounds::tools {

using nlohmann::json;

namespace {

// the JSON twin carries exactly the 12-significant-digit values of the text
double canon(double v) { return std::strtod(format_double(v).c_str(), nullptr); }

std::string path_join(const std::string& dir, const std::string& file) {
    if (dir.empty()) return file;
    return dir.back() == '/' ? dir + file : dir + "/" + file;
}

std::string interval_str(double lo, double hi) {
    return "[" + format_double(lo) + ", " + format_double(hi) + "]";
}

std::string cells_str(const std::vector<std::size_t>& cells) {
    if (cells.empty()) return "none";
    std::ostringstream s;
    for (std::size_t i = 0; i < cells.size(); ++i) s << (i ? ", " : "") << cells[i];
    return s.str();
}

Estimand build_estimand(const AnalysisConfig& cfg, const ObservationSet& obs) {
    switch (cfg.kind) {
        case Estimand::Kind::Mean: return Estimand::mean(obs.column_index(cfg.y_column));
        case Estimand::Kind::OLS:
            return Estimand::ols(obs.column_index(cfg.x_column),
                                 obs.column_index(cfg.y_column));
        case Estimand::Kind::IV:
            return Estimand::iv(obs.column_index(cfg.z_column), obs.column_index(cfg.x_column),
                                obs.column_index(cfg.y_column));
        default: throw ConfigError("estimand.kind", "unsupported estimand kind");
    }
}

std::vector<AuxConstraint> build_constraints(const ConstraintsConfig& cc,
                                             const ObservationSet& obs) {
    double total_share = 0.0;
    for (const auto& item : cc.items) total_share += item.share;
    const double alpha1 = cc.alpha1_significance();
    std::vector<AuxConstraint> out;
    for (const auto& item : cc.items) {
        const double share = alpha1 * item.share / total_share;
        if (item.kind == AuxConstraint::Kind::ResponseRate) {
            out.push_back(AuxConstraint::response(item.response_rate, share));
        } else {
            out.push_back(
                AuxConstraint::covariate_mean(obs.column_index(item.column), item.qbar, share));
        }
    }
    return out;
}

ObservationSet binned(ObservationSet obs, double step) {
    if (!(step > 0.0)) throw ConfigError("bin-continuous", "bin step must be positive");
    std::vector<double> values(obs.values());
    for (double& v : values) v = std::round(v / step) * step;
    return ObservationSet(std::move(values), obs.cols(), obs.column_names());
}

} // namespace

void run_analysis(const AnalysisConfig& cfg, const std::string& data_path,
                  const std::string& out_dir, const RunOverrides& over) {
    ObservationSet obs = load_csv(data_path);
    if (over.bin_step) obs = binned(std::move(obs), *over.bin_step);

    // resolve every configured column before any computation starts
    const Estimand est = build_estimand(cfg, obs);
    std::vector<AuxConstraint> constraints;
    if (cfg.constraints) constraints = build_constraints(*cfg.constraints, obs);
    ParametricFamily family;
    if (cfg.parametric) {
        for (const auto& name : cfg.parametric->columns)
            family.selection_columns.push_back(obs.column_index(name));
        family.sign_constraints = cfg.parametric->signs;
    }
    const WeightBox box(cfg.a, cfg.b);

    std::ostringstream txt;
    json out;
    txt << "== data ==\n";
    const SupportTable table = collapse_support(obs, est);
    const double support_ratio =
        static_cast<double>(table.num_cells()) / static_cast<double>(obs.rows());
    txt << "rows: " << obs.rows() << "  columns: " << obs.cols()
        << "  support cells: " << table.num_cells()
        << "  support ratio: " << format_double(support_ratio) << "\n";
    out["data"] = {{"rows", obs.rows()},
                   {"columns", obs.cols()},
                   {"support_cells", table.num_cells()},
                   {"support_ratio", canon(support_ratio)}};

    txt << "\n== estimand ==\n";
    const char* kind_name = cfg.kind == Estimand::Kind::Mean ? "mean"
                            : cfg.kind == Estimand::Kind::OLS ? "ols"
                                                              : "iv";
    txt << "kind: " << kind_name;
    if (!cfg.z_column.empty()) txt << "  z: " << cfg.z_column;
    if (!cfg.x_column.empty()) txt << "  x: " << cfg.x_column;
    txt << "  y: " << cfg.y_column << "\n";
    txt << "box: a = " << format_double(cfg.a) << "  b = " << format_double(cfg.b)
        << "  weights in [" << format_double(box.lo()) << ", " << format_double(box.hi())
        << "]\n";
    out["estimand"] = {{"kind", kind_name}, {"y", cfg.y_column}};
    if (!cfg.x_column.empty()) out["estimand"]["x"] = cfg.x_column;
    if (!cfg.z_column.empty()) out["estimand"]["z"] = cfg.z_column;
    out["box"] = {{"a", canon(cfg.a)}, {"b", canon(cfg.b)}, {"lo", canon(box.lo())},
                  {"hi", canon(box.hi())}};
    out["alpha"] = canon(cfg.alpha);

    // unweighted point estimate with its classical CI
    const std::vector<double> unit(table.num_cells(), 1.0);
    const double beta_unw = evaluate(table, unit);
    const double se_unw =
        sigma_hat(table, unit, beta_unw) / std::sqrt(static_cast<double>(table.n));
    const double z = upper_quantile(cfg.alpha / 2.0);
    txt << "\n== unweighted ==\n";
    txt << "point estimate: " << format_double(beta_unw) << "\n";
    txt << "wald ci (alpha = " << format_double(cfg.alpha) << "): "
        << interval_str(beta_unw - z * se_unw, beta_unw + z * se_unw) << "\n";
    out["unweighted"] = {{"estimate", canon(beta_unw)},
                         {"se", canon(se_unw)},
                         {"ci", {canon(beta_unw - z * se_unw), canon(beta_unw + z * se_unw)}}};

    // identified interval
    const IntervalEstimate ie = solve_bounds(table, box);
    const AsymptoticCI aci = confidence_interval(ie, table, cfg.alpha);
    txt << "\n== identified interval ==\n";
    txt << "interval: " << interval_str(ie.beta_lo, ie.beta_hi) << "\n";
    txt << "asymptotic ci: " << interval_str(aci.c_lo, aci.c_hi) << "\n";
    txt << "endpoint se: lower " << format_double(aci.se_lo) << "  upper "
        << format_double(aci.se_hi) << "\n";
    txt << "degenerate cells: lower " << cells_str(ie.degenerate_cells_lo) << " | upper "
        << cells_str(ie.degenerate_cells_hi) << "\n";
    const bool opt_lo = check_global_optimality(table, box, ie.w_lo, ie.beta_lo, Direction::Min);
    const bool opt_hi = check_global_optimality(table, box, ie.w_hi, ie.beta_hi, Direction::Max);
    txt << "optimality check: lower " << (opt_lo ? "pass" : "FAIL") << " | upper "
        << (opt_hi ? "pass" : "FAIL") << "\n";
    out["identified"] = {{"interval", {canon(ie.beta_lo), canon(ie.beta_hi)}},
                         {"asymptotic_ci", {canon(aci.c_lo), canon(aci.c_hi)}},
                         {"se", {canon(aci.se_lo), canon(aci.se_hi)}},
                         {"degenerate_cells_lo", ie.degenerate_cells_lo},
                         {"degenerate_cells_hi", ie.degenerate_cells_hi},
                         {"optimality", {{"lower", opt_lo}, {"upper", opt_hi}}}};

    if (cfg.bootstrap) {
        const std::uint64_t seed = over.seed ? *over.seed : cfg.bootstrap->seed;
        const BootstrapCI bci =
            bootstrap_ci(obs, est, box, cfg.bootstrap->R, cfg.alpha, seed, over.threads);
        txt << "bootstrap ci (R = " << bci.R << ", seed = " << bci.seed
            << "): " << interval_str(bci.c_lo, bci.c_hi) << "\n";
        if (bci.failed_resamples > 0)
            txt << "bootstrap resamples redrawn: " << bci.failed_resamples << "\n";
        out["bootstrap"] = {{"R", bci.R},
                            {"seed", bci.seed},
                            {"ci", {canon(bci.c_lo), canon(bci.c_hi)}},
                            {"failed_resamples", bci.failed_resamples}};
    }

    if (cfg.constraints) {
        const double a1 = cfg.constraints->alpha1_significance();
        const double a2 = cfg.constraints->alpha2_significance();
        const ConstrainedInterval ci = solve_constrained_bounds(table, box, constraints, a1, a2);
        const AsymptoticCI t3 = theorem3_ci(ci, table, a2);
        txt << "\n== constrained ==\n";
        txt << "alpha1 = " << format_double(a1) << "  alpha2 = " << format_double(a2)
            << " (significance units; total coverage >= "
            << format_double(1.0 - a1 - a2) << ")\n";
        txt << "interval: " << interval_str(ci.beta_lo, ci.beta_hi) << "\n";
        txt << "ci: " << interval_str(t3.c_lo, t3.c_hi) << "\n";
        txt << "solver: restarts " << ci.diagnostics.restarts << "  kkt residual "
            << format_double(ci.diagnostics.best_kkt_residual) << "\n";
        txt << "constraint slacks at lower endpoint:";
        for (double s : ci.diagnostics.slack_lo) txt << " " << format_double(s);
        txt << "\nconstraint slacks at upper endpoint:";
        for (double s : ci.diagnostics.slack_hi) txt << " " << format_double(s);
        txt << "\n";
        json slo = json::array(), shi = json::array();
        for (double s : ci.diagnostics.slack_lo) slo.push_back(canon(s));
        for (double s : ci.diagnostics.slack_hi) shi.push_back(canon(s));
        out["constrained"] = {{"alpha1", canon(a1)},
                              {"alpha2", canon(a2)},
                              {"interval", {canon(ci.beta_lo), canon(ci.beta_hi)}},
                              {"ci", {canon(t3.c_lo), canon(t3.c_hi)}},
                              {"restarts", ci.diagnostics.restarts},
                              {"kkt_residual", canon(ci.diagnostics.best_kkt_residual)},
                              {"slack_lo", slo},
                              {"slack_hi", shi}};
    }

    if (cfg.parametric) {
        const ParametricInterval pi = solve_parametric_bounds(obs, est, box, family);
        txt << "\n== parametric (logit selection) ==\n";
        txt << "interval: " << interval_str(pi.beta_lo, pi.beta_hi) << "\n";
        txt << "alpha at lower:";
        for (double a : pi.alpha_lo) txt << " " << format_double(a);
        txt << "\nalpha at upper:";
        for (double a : pi.alpha_hi) txt << " " << format_double(a);
        txt << "\nrestarts: " << pi.diagnostics.restarts
            << "  active constraints: lower " << pi.diagnostics.active_constraints_lo.size()
            << " | upper " << pi.diagnostics.active_constraints_hi.size() << "\n";
        json alo = json::array(), ahi = json::array();
        for (double a : pi.alpha_lo) alo.push_back(canon(a));
        for (double a : pi.alpha_hi) ahi.push_back(canon(a));
        out["parametric"] = {{"interval", {canon(pi.beta_lo), canon(pi.beta_hi)}},
                             {"alpha_lo", alo},
                             {"alpha_hi", ahi},
                             {"restarts", pi.diagnostics.restarts},
                             {"active_lo", pi.diagnostics.active_constraints_lo.size()},
                             {"active_hi", pi.diagnostics.active_constraints_hi.size()}};
    }

    std::ofstream tf(path_join(out_dir, "report.txt"), std::ios::binary);
    if (!tf) throw DataError("cannot write report in '" + out_dir + "'");
    tf << txt.str();
    std::ofstream jf(path_join(out_dir, "report.json"), std::ios::binary);
    jf << out.dump(2) << '\n';
}

void run_tune_split(const AnalysisConfig& cfg, const std::string& data_path,
                    const std::string& out_dir, const RunOverrides& over) {
    if (!cfg.constraints || !cfg.tune)
        throw ConfigError("tune", "tune-split needs 'constraints' and 'tune' sections");
    ObservationSet obs = load_csv(data_path);
    if (over.bin_step) obs = binned(std::move(obs), *over.bin_step);
    const Estimand est = build_estimand(cfg, obs);
    const WeightBox box(cfg.a, cfg.b);
    const SupportTable table = collapse_support(obs, est);
    const std::vector<AuxConstraint> constraints = build_constraints(*cfg.constraints, obs);

    std::vector<AlphaSplit> splits = cfg.tune->splits;
    if (splits.empty()) {
        const double total = cfg.tune->total_alpha;
        const std::size_t points = cfg.tune->points;
        for (std::size_t i = 1; i <= points; ++i) {
            const double a1 = total * static_cast<double>(i) / static_cast<double>(points + 1);
            splits.push_back({a1, total - a1});
        }
    }
    ConstrainedProblem problem{&table, box, constraints};
    const TuneResult result = tune_alpha_split(problem, cfg.tune->total_alpha, splits);

    std::ostringstream txt;
    txt << "== alpha split tuning ==\n";
    txt << "total budget: " << format_double(cfg.tune->total_alpha) << " (significance)\n";
    txt << "alpha1,alpha2,ci_width\n";
    json rows = json::array();
    for (std::size_t i = 0; i < result.splits.size(); ++i) {
        txt << format_double(result.splits[i].alpha1) << ","
            << format_double(result.splits[i].alpha2) << ","
            << format_double(result.widths[i]);
        if (i == result.best_index) txt << "  <- narrowest";
        txt << "\n";
        rows.push_back({{"alpha1", canon(result.splits[i].alpha1)},
                        {"alpha2", canon(result.splits[i].alpha2)},
                        {"width", canon(result.widths[i])}});
    }
    txt << "best split: alpha1 = " << format_double(result.splits[result.best_index].alpha1)
        << "  alpha2 = " << format_double(result.splits[result.best_index].alpha2) << "\n";

    json out;
    out["total_alpha"] = canon(cfg.tune->total_alpha);
    out["splits"] = rows;
    out["best_index"] = result.best_index;

    std::ofstream tf(path_join(out_dir, "tune.txt"), std::ios::binary);
    if (!tf) throw DataError("cannot write tune report in '" + out_dir + "'");
    tf << txt.str();
    std::ofstream jf(path_join(out_dir, "tune.json"), std::ios::binary);
    jf << out.dump(2) << '\n';
}

} // namespace selbounds::tools
