#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sseval::csv {

/// One parsed data row, tagged with its 1-based line number in the source.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Header plus rows. Lines starting with '#' and blank lines are skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

std::vector<std::string> split_line(std::string_view line, std::size_t line_no);
Table parse(std::string_view text, const std::string& source_name);
Table read_file(const std::string& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);
double parse_double(std::string_view field, const std::string& where);
long long parse_int(std::string_view field, const std::string& where);

/// Quotes a field when it contains a comma, quote or newline.
std::string quote(std::string_view field);

std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view content);

}  // namespace sseval::csv
