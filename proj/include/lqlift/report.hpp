#pragma once

// Tabular output: RFC 4180 CSV with a '#' manifest preamble, and a JSON twin
// carrying the same cells. Numbers use 17 significant digits through
// std::to_chars, which ignores the locale.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lqlift/error.hpp"

namespace lqlift {

inline constexpr const char* tool_version = "0.1.0";

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

// Empty optional prints as an empty field (CSV) or null (JSON).
using Cell = std::variant<std::monostate, double, long long, std::string>;

class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns_.size()) throw Error("Table: row width does not match the header");
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string cell_text(const Cell& c) {
  struct {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(long long v) const { return std::to_string(v); }
    std::string operator()(const std::string& s) const { return s; }
  } visit;
  return std::visit(visit, c);
}

inline nlohmann::ordered_json cell_json(const Cell& c) {
  if (std::holds_alternative<std::monostate>(c)) return nullptr;
  if (const auto* v = std::get_if<double>(&c)) {
    if (!std::isfinite(*v)) return format_number(*v);
    // keep the 17-digit text so both files carry the same decimal value
    return nlohmann::ordered_json::parse(format_number(*v));
  }
  if (const auto* v = std::get_if<long long>(&c)) return *v;
  return std::get<std::string>(c);
}

/// Run metadata written at the top of every output. Wall-clock is kept out on
/// purpose so identical requests give identical bytes; see write_timing.
struct Manifest {
  std::string command;
  nlohmann::ordered_json request;

  // FNV-1a of the canonical request text
  std::string request_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : request.dump()) h = (h ^ c) * 0x100000001b3ULL;
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["tool_version"] = tool_version;
    j["spec_hash"] = request_hash();
    j["request"] = request;
    return j;
  }
};

inline std::string to_csv(const Manifest& manifest, const Table& table) {
  std::string out;
  out += "# lqlift " + std::string(tool_version) + " " + manifest.command + "\r\n";
  out += "# spec_hash " + manifest.request_hash() + "\r\n";
  out += "# request " + manifest.request.dump() + "\r\n";
  for (std::size_t i = 0; i < table.columns().size(); ++i)
    out += (i ? "," : "") + csv_field(table.columns()[i]);
  out += "\r\n";
  for (const auto& row : table.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(cell_text(row[i]));
    out += "\r\n";
  }
  return out;
}

/// `extra` fields are appended after the rows (e.g. per-row diagnostics that
/// have no CSV column).
inline std::string to_json(const Manifest& manifest, const Table& table, const nlohmann::ordered_json& extra = {}) {
  nlohmann::ordered_json j;
  j["manifest"] = manifest.to_json();
  j["columns"] = table.columns();
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows()) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  if (extra.is_object())
    for (const auto& [key, value] : extra.items()) j[key] = value;
  return j.dump(1) + "\n";
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error("cannot write " + path);
}

/// Writes `<stem>.csv` and `<stem>.json`.
inline void write_table(const std::string& stem, const Manifest& manifest, const Table& table,
                        const nlohmann::ordered_json& extra = {}) {
  write_file(stem + ".csv", to_csv(manifest, table));
  write_file(stem + ".json", to_json(manifest, table, extra));
}

/// Wall-clock lives in its own file so the data files stay reproducible.
inline void write_timing(const std::string& stem, double seconds) {
  write_file(stem + ".timing", "wall_clock_seconds " + format_number(seconds) + "\n");
}

}  // namespace lqlift
