#include "selbounds/csv_io.hpp"

#include <cstdio>
#include <sstream>

#include "selbounds/errors.hpp"

namespace selbounds {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

} // namespace

ObservationSet load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("data file '" + path + "' is empty");
    std::vector<std::string> names;
    for (auto& h : split_line(line)) names.push_back(trim(h));
    const std::size_t n_cols = names.size();

    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != n_cols)
            throw DataError("row " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(n_cols));
        for (std::size_t j = 0; j < n_cols; ++j) {
            const std::string cell = trim(fields[j]);
            if (cell.empty())
                throw DataError("missing value at row " + std::to_string(line_no) + ", column '" +
                                names[j] + "'");
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw DataError("non-numeric value '" + cell + "' at row " +
                                std::to_string(line_no) + ", column '" + names[j] + "'");
            values.push_back(v);
        }
    }
    if (values.empty()) throw DataError("data file '" + path + "' has no rows");
    try {
        return ObservationSet(std::move(values), n_cols, std::move(names));
    } catch (const Error& e) {
        throw DataError(e.what());
    }
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot open output file '" + path + "'");
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

void CsvWriter::row_values(const std::vector<double>& values) {
    std::vector<std::string> fields;
    fields.reserve(values.size());
    for (double v : values) fields.push_back(format_double(v));
    row(fields);
}

} // namespace selbounds
