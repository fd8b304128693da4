#include "deepnotch/io/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "deepnotch/errors.hpp"

namespace deepnotch::io {

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string format_field(const Field& f) {
  if (const auto* s = std::get_if<std::string>(&f)) return quote(*s);
  if (const auto* i = std::get_if<std::int64_t>(&f)) return std::to_string(*i);
  const double d = std::get<double>(f);
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", d);
  std::string out = buf;
  if (out == "-0.0000") out = "0.0000";
  return out;
}

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += quote(table.header[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw ContractError("report row has " + std::to_string(row.size()) + " fields, header has " +
                          std::to_string(table.header.size()));
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_field(row[i]);
    }
    out += '\n';
  }
  return out;
}

void write_report(const Table& table, const std::filesystem::path& path) {
  const std::string text = to_csv(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace deepnotch::io
