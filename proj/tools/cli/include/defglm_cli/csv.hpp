#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace defglm::cli {

/// Shortest decimal that parses back to the same double; "nan", "inf", "-inf"
/// for non-finite values.
std::string format_number(double v);

/// Parses a field produced by format_number (or any strtod-compatible decimal).
/// Throws DataError naming `what` on malformed input.
double parse_number(std::string_view field, std::string_view what);
long parse_integer(std::string_view field, std::string_view what);

/// Comma-separated table with a mandatory header row. Fields are stored as
/// text so that reading and writing back reproduces the input bytes for
/// anything this tool emits (LF line endings, no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or throws DataError listing the header.
  std::size_t column(std::string_view name) const;
};

/// Lenient reader: accepts CRLF, a UTF-8 BOM and double-quoted fields. Rows
/// whose field count differs from the header are kept; the caller decides
/// whether to reject them. `line_numbers` receives the 1-based source line of
/// each row when non-null.
CsvTable parse_csv(std::string_view text, std::vector<std::size_t>* line_numbers = nullptr);
CsvTable read_csv_file(const std::string& path, std::vector<std::size_t>* line_numbers = nullptr);

std::string serialize_csv(const CsvTable& table);
void write_text_file(const std::string& path, std::string_view text);
std::string read_text_file(const std::string& path);

}  // namespace defglm::cli
