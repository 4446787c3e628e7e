#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kvr::csv {

using Row = std::vector<std::string>;

/// RFC-4180 text: CRLF record separators, fields quoted only when they hold a
/// comma, quote, CR or LF, embedded quotes doubled.
std::string write(const std::vector<Row>& rows);

/// Strict reader. Quotes are only legal around a whole field, a closing quote
/// must be followed by a separator or end of record, and every record must
/// have as many fields as the first. Either CRLF or LF ends a record.
/// Throws ErrorKind::Decode with the line number on violation.
std::vector<Row> parse(std::string_view text);

/// Six significant digits, shortest form ("%.6g").
std::string format_real(double v);

/// Parses a real field written by format_real. Throws ErrorKind::Decode.
double parse_real(std::string_view field, std::string_view column);

/// A table with a header row, addressable by column name.
class Table {
 public:
  /// `required` columns must all appear in the header.
  Table(std::vector<Row> rows, const std::vector<std::string>& required);

  std::size_t size() const { return rows_.size() - 1; }
  const std::string& at(std::size_t record, std::string_view column) const;

 private:
  std::vector<Row> rows_;
};

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& required);

/// Prompts from a CSV with a `prompt` header column.
std::vector<std::string> read_prompts(const std::filesystem::path& path);

void write_prompts(const std::filesystem::path& path, const std::vector<std::string>& prompts);

}  // namespace kvr::csv
