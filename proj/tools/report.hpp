#pragma once

// Report tables and run bookkeeping for the command-line tool.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sdglab/detail/csv.hpp"
#include "sdglab/error.hpp"

namespace sdglab_cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Empty cells stand for undefined values.
using Cell = std::variant<std::monostate, std::string, long long, double>;

inline Cell cell(std::optional<double> v) { return v ? Cell(*v) : Cell(); }
inline Cell cell(long long v) { return Cell(v); }
inline Cell cell(std::size_t v) { return Cell(static_cast<long long>(v)); }
inline Cell cell(int v) { return Cell(static_cast<long long>(v)); }
inline Cell cell(double v) { return Cell(v); }
inline Cell cell(std::string v) { return Cell(std::move(v)); }
inline Cell cell(const char* v) { return Cell(std::string(v)); }

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  explicit Table(std::vector<std::string> cols) : columns(std::move(cols)) {}

  template <typename... T>
  void add(T&&... values) {
    rows.push_back({cell(std::forward<T>(values))...});
  }

  std::string csv() const {
    std::string out = sdgl::detail::csv_line(columns);
    for (const auto& r : rows) {
      std::vector<std::string> fields;
      fields.reserve(r.size());
      for (const auto& c : r) fields.push_back(text(c));
      out += sdgl::detail::csv_line(fields);
    }
    return out;
  }

  Json json() const {
    Json arr = Json::array();
    for (const auto& r : rows) {
      Json obj = Json::object();
      for (std::size_t i = 0; i < columns.size(); ++i) {
        std::visit(
            [&](const auto& v) {
              using V = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<V, std::monostate>) obj[columns[i]] = nullptr;
              else obj[columns[i]] = v;
            },
            r[i]);
      }
      arr.push_back(std::move(obj));
    }
    return arr;
  }

 private:
  static std::string text(const Cell& c) {
    if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
    if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
    if (std::holds_alternative<double>(c)) return sdgl::detail::format_double(std::get<double>(c));
    return {};
  }
};

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Writes through a sibling temp file and renames it into place.
inline void write_atomically(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw sdgl::Error(sdgl::ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw sdgl::Error(sdgl::ErrorCode::Io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw sdgl::Error(sdgl::ErrorCode::Io, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

/// One command invocation: its outputs and a manifest describing how to
/// reproduce them. Manifests carry no timestamps or host details.
class Run {
 public:
  Run(std::string command, fs::path out_dir, bool json_mirror, std::string version)
      : command_(std::move(command)), out_dir_(std::move(out_dir)), json_(json_mirror) {
    manifest_["tool"] = "sdglab";
    manifest_["version"] = std::move(version);
    manifest_["command"] = command_;
    manifest_["params"] = Json::object();
    manifest_["inputs"] = Json::array();
    manifest_["outputs"] = Json::array();
    manifest_["warnings"] = Json::array();
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec) throw sdgl::Error(sdgl::ErrorCode::Io, "cannot create " + out_dir_.string() + ": " + ec.message());
  }

  Json& params() { return manifest_["params"]; }

  /// Records an input file with its content hash. Returns the bytes.
  std::string input(const std::string& path) {
    std::string bytes = sdgl::detail::read_file(path);
    manifest_["inputs"].push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
    return bytes;
  }
  void note_input(const std::string& path) { input(path); }

  void table(const std::string& name, const Table& t) {
    file(name + ".csv", t.csv());
    if (json_) file(name + ".json", t.json().dump(2) + "\n");
  }

  void file(const std::string& name, std::string_view bytes) {
    write_atomically(out_dir_ / name, bytes);
    manifest_["outputs"].push_back({{"path", name}, {"sha256", sha256_hex(bytes)}});
  }

  fs::path path(const std::string& name) const { return out_dir_ / name; }

  void warn(const std::string& msg) {
    std::cerr << "sdglab " << command_ << ": warning: " << msg << '\n';
    manifest_["warnings"].push_back(msg);
  }

  void finish() { write_atomically(out_dir_ / (command_ + ".manifest.json"), manifest_.dump(2) + "\n"); }

 private:
  std::string command_;
  fs::path out_dir_;
  bool json_;
  Json manifest_;
};

}  // namespace sdglab_cli
