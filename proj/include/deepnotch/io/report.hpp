#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace deepnotch::io {

// A CSV cell: text, integer, or real (printed with 4 decimals; +inf as "inf").
using Field = std::variant<std::string, std::int64_t, double>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Field>> rows;
};

std::string format_field(const Field& f);
std::string to_csv(const Table& table);

// Writes UTF-8 CSV with a header line. Rows must have as many fields as the
// header (ContractError); an unwritable path raises IoError.
void write_report(const Table& table, const std::filesystem::path& path);

}  // namespace deepnotch::io
