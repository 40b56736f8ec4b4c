#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace voltsmile::detail {

struct CsvRow {
  std::vector<std::string> fields;
  int line = 0;  // 1-based line number in the source file
};

// Reads a comma-delimited file. The first row is returned as `header`.
// No quoting (the schemas never need it); blank lines are skipped.
struct CsvFile {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

inline CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  CsvFile file;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (file.header.empty()) {
      file.header = split_csv_line(line);
    } else {
      file.rows.push_back({split_csv_line(line), lineno});
    }
  }
  if (file.header.empty()) throw std::invalid_argument("empty CSV file: " + path);
  return file;
}

// Shortest decimal representation that round-trips a double.
inline std::string format_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline double parse_double(const std::string& s, const std::string& what, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace voltsmile::detail
