#ifndef SELBOUNDS_TOOLS_REPORT_HPP
#define SELBOUNDS_TOOLS_REPORT_HPP

#include <optional>
#include <string>

#include "config.hpp"

namespace selbounds::tools {

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::optional<double> bin_step; // pre-binning before support collapse
};

/// Full analysis pipeline: writes report.txt and report.json into out_dir.
void run_analysis(const AnalysisConfig& cfg, const std::string& data_path,
                  const std::string& out_dir, const RunOverrides& over);

/// Width-minimizing (alpha1, alpha2) search; writes tune.txt and tune.json.
void run_tune_split(const AnalysisConfig& cfg, const std::string& data_path,
                    const std::string& out_dir, const RunOverrides& over);

} // namespace selbounds::tools

#endif
