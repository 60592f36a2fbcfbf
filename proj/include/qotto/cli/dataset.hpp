// dataset.hpp: plot-ready tables and their CSV / JSON-lines writers.
//
// Numbers are printed with 17 significant digits in the C locale so repeated
// runs produce byte-identical files; NaN marks a disabled column.
#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qotto::cli {

enum class Format { csv, jsonl };

inline Format parse_format(const std::string& name) {
  if (name == "csv") return Format::csv;
  if (name == "jsonl") return Format::jsonl;
  throw std::invalid_argument("unknown format '" + name + "' (expected csv or jsonl)");
}

inline const char* format_extension(Format f) { return f == Format::csv ? "csv" : "jsonl"; }

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct Dataset {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("Dataset::add: row width differs from header");
    rows.push_back(std::move(row));
  }
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace detail {
inline std::string csv_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
  return std::get<std::string>(c);
}

inline std::string json_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? format_number(*d) : "null";
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
  return nlohmann::json(std::get<std::string>(c)).dump();
}
}  // namespace detail

inline void write_csv(std::ostream& out, const Dataset& d) {
  for (std::size_t i = 0; i < d.columns.size(); ++i) out << (i ? "," : "") << d.columns[i];
  out << '\n';
  for (const auto& row : d.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << detail::csv_cell(row[i]);
    out << '\n';
  }
}

inline void write_jsonl(std::ostream& out, const Dataset& d) {
  for (const auto& row : d.rows) {
    out << '{';
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << nlohmann::json(d.columns[i]).dump() << ':' << detail::json_cell(row[i]);
    out << "}\n";
  }
}

inline void write_dataset(std::ostream& out, const Dataset& d, Format f) {
  if (f == Format::csv) {
    write_csv(out, d);
  } else {
    write_jsonl(out, d);
  }
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace qotto::cli
