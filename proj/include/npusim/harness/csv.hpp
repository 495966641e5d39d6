#pragma once

// Result CSV. Column set and order are versioned by kCsvVersion; any change
// to either must bump it (tests/golden pins the header).

#include <string>
#include <vector>

#include "npusim/harness/runner.hpp"

namespace npusim::harness {

inline constexpr int kCsvVersion = 1;

const std::vector<std::string> &csv_columns();
std::string csv_header();
std::string csv_line(const RunResult &r);
std::string to_csv(const std::vector<RunResult> &rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index; throws SimError if absent.
    std::size_t column(const std::string &name) const;
};

CsvTable parse_csv(const std::string &text);
CsvTable read_csv(const std::string &path);

} // namespace npusim::harness
