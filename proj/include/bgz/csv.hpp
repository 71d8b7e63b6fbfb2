#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bgz {

// Plain comma-separated tables: no quoting, '#' starts a comment line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row
};

std::vector<std::string> split_csv_line(std::string_view line);
CsvTable read_csv(const std::filesystem::path& path);

// Throws ValidationError naming the file when the header differs.
void expect_header(const CsvTable& t, const std::vector<std::string>& expected,
                   const std::filesystem::path& path);

std::string format_fixed(double v, int decimals);
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

// Rejects separators and newlines in identifiers written to CSV.
void check_csv_field(std::string_view text);

}  // namespace bgz
