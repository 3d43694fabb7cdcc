#ifndef SELBOUNDS_CSV_IO_HPP
#define SELBOUNDS_CSV_IO_HPP

#include <fstream>
#include <string>
#include <vector>

#include "selbounds/support.hpp"

namespace selbounds {

/// Fixed 12-significant-digit rendering used for every number the tools
/// emit, so repeated runs produce byte-identical files.
std::string format_double(double v);

/// Loads a numeric CSV with a mandatory header row.
ObservationSet load_csv(const std::string& path);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);
    void row_values(const std::vector<double>& values);

private:
    std::ofstream out_;
};

} // namespace selbounds

#endif
