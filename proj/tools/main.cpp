#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "report.hpp"
#include "selbounds/simharness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitEstimation = 4;

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) std::filesystem::create_directories(dir);
}

} // namespace

int main(int argc, char** argv) {
    using namespace selbounds;
    using namespace selbounds::tools;

    CLI::App app{"interval estimation for population parameters under bounded "
                 "non-random selection"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;
    unsigned threads = 1;
    double bin_step = 0.0;
    bool bin_given = false;

    auto add_common = [&](CLI::App* cmd, bool with_data) {
        cmd->add_option("--config", config_path, "configuration file (JSON)")->required();
        if (with_data)
            cmd->add_option("--data", data_path, "input CSV with a header row")->required();
        cmd->add_option("--out", out_dir, "output directory (default: current)");
        cmd->add_option("--seed", seed, "override the configured RNG seed")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--threads", threads, "worker threads (default 1)");
        cmd->add_option("--bin-continuous", bin_step,
                        "pre-bin all columns to multiples of this step before collapsing")
            ->each([&](const std::string&) { bin_given = true; });
    };

    CLI::App* analyze = app.add_subcommand("analyze", "estimate intervals from a data file");
    add_common(analyze, true);
    CLI::App* simulate = app.add_subcommand("simulate", "run a Monte-Carlo experiment spec");
    add_common(simulate, false);
    CLI::App* tune = app.add_subcommand("tune-split", "scan (alpha1, alpha2) splits for width");
    add_common(tune, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    RunOverrides over;
    if (seed_given) over.seed = seed;
    over.threads = threads;
    if (bin_given) over.bin_step = bin_step;

    try {
        ensure_dir(out_dir);
        if (analyze->parsed()) {
            const AnalysisConfig cfg = load_analysis_config(config_path);
            run_analysis(cfg, data_path, out_dir, over);
            std::cout << "report written to " << out_dir << "/report.txt (and report.json)\n";
        } else if (simulate->parsed()) {
            ExperimentSpec spec = load_experiment_spec(config_path);
            if (seed_given) spec.seed = seed;
            spec.threads = threads;
            const auto files = run_outputs(spec, out_dir);
            std::cout << "wrote";
            for (const auto& f : files) std::cout << ' ' << f;
            std::cout << " and manifest.json to " << out_dir << "\n";
        } else if (tune->parsed()) {
            const AnalysisConfig cfg = load_analysis_config(config_path);
            run_tune_split(cfg, data_path, out_dir, over);
            std::cout << "tuning table written to " << out_dir << "/tune.txt (and tune.json)\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEstimation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEstimation;
    }
    return 0;
}
