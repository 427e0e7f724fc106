#pragma once

// Minimal RFC-4180 CSV writer. Doubles are printed in the shortest form
// that parses back to the same value, so replays compare byte-for-byte.

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "l4dict/error.hpp"

namespace l4dict::csv {

inline std::string number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string number(long long v) { return std::to_string(v); }
inline std::string number(unsigned long long v) { return std::to_string(v); }
inline std::string number(int v) { return std::to_string(v); }
inline std::string number(unsigned long v) { return std::to_string(v); }
inline std::string number(long v) { return std::to_string(v); }

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> fields) {
    if (fields.size() != header_.size())
      throw InvalidArgument("csv::Table: row width does not match header");
    rows_.push_back(std::move(fields));
  }

  std::size_t row_count() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

  void write(std::ostream& os) const {
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("csv: cannot open " + path);
    write(os);
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) os << ',';
      os << quote(fields[k]);
    }
    os << "\r\n";
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace l4dict::csv
