#include "bgz/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "bgz/error.hpp"

namespace bgz {

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ValidationError(path.string() + ": line " + std::to_string(lineno) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) throw ValidationError(path.string() + ": missing header");
  return t;
}

void expect_header(const CsvTable& t, const std::vector<std::string>& expected,
                   const std::filesystem::path& path) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw ValidationError(path.string() + ": unexpected header (expected " + want + ")");
  }
}

std::string format_fixed(double v, int decimals) {
  if (!std::isfinite(v)) throw RuntimeFailure("refusing to write a non-finite value");
  if (v == 0.0) v = 0.0;  // no "-0.000"
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  if (ec != std::errc{}) throw RuntimeFailure("number formatting failed");
  std::string s(buf, ptr);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw ValidationError("invalid number '" + std::string(text) + "' for " + std::string(what));
  }
  return v;
}

long long parse_int(std::string_view text, std::string_view what) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ValidationError("invalid integer '" + std::string(text) + "' for " + std::string(what));
  }
  return v;
}

void check_csv_field(std::string_view text) {
  if (text.find_first_of(",\n\r") != std::string_view::npos) {
    throw ValidationError("identifier contains a comma or newline: '" + std::string(text) + "'");
  }
}

}  // namespace bgz
