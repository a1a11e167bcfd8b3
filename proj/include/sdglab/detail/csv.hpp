#pragma once

// Minimal RFC 4180 reader/writer.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdglab/error.hpp"

namespace sdgl::detail {

using CsvRow = std::vector<std::string>;

struct CsvRecord {
  std::size_t line;  // 1-based line where the record starts
  CsvRow fields;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "read failed: " + path);
  return ss.str();
}

/// Parses a whole CSV text. Blank lines are skipped. Throws E_SCHEMA on an
/// unterminated quoted field.
inline std::vector<CsvRecord> parse_csv(std::string_view text, const std::string& source = "csv") {
  std::vector<CsvRecord> records;
  std::size_t i = 0;
  std::size_t line = 1;
  if (text.starts_with("\xEF\xBB\xBF")) i = 3;
  while (i < text.size()) {
    CsvRecord rec{line, {}};
    std::string field;
    bool in_quotes = false;
    bool row_done = false;
    bool any = false;
    while (i < text.size() && !row_done) {
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
          ++i;
        }
        continue;
      }
      switch (c) {
        case '"':
          in_quotes = true;
          any = true;
          ++i;
          break;
        case ',':
          rec.fields.push_back(std::move(field));
          field.clear();
          any = true;
          ++i;
          break;
        case '\r':
          ++i;
          break;
        case '\n':
          ++line;
          ++i;
          row_done = true;
          break;
        default:
          field += c;
          any = true;
          ++i;
      }
    }
    if (in_quotes) {
      throw Error(ErrorCode::Schema, source + ":" + std::to_string(rec.line) + ": unterminated quoted field");
    }
    if (!any) continue;
    rec.fields.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  return records;
}

inline void append_csv_field(std::string& out, std::string_view field) {
  const bool quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!quote) {
    out += field;
    return;
  }
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    append_csv_field(out, fields[i]);
  }
  out += '\n';
  return out;
}

/// Shortest representation that round-trips.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string{};
}

inline std::optional<long long> parse_int(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Maps header names to column indices; throws E_SCHEMA if any required
/// column is missing.
class CsvHeader {
 public:
  CsvHeader(const CsvRow& header, const std::vector<std::string>& required, const std::string& source) {
    names_ = header;
    for (auto& n : names_) {
      while (!n.empty() && (n.back() == ' ')) n.pop_back();
      while (!n.empty() && (n.front() == ' ')) n.erase(n.begin());
    }
    for (const auto& r : required) {
      if (!index(r)) throw Error(ErrorCode::Schema, source + ":1: missing column '" + r + "'");
    }
  }

  std::optional<std::size_t> index(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    return std::nullopt;
  }

  std::size_t at(std::string_view name) const { return *index(name); }

 private:
  CsvRow names_;
};

}  // namespace sdgl::detail
