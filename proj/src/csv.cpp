#include "kvrecycle/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "kvrecycle/error.hpp"
#include "kvrecycle/io.hpp"

namespace kvr::csv {

namespace {

bool needs_quotes(std::string_view field) {
  return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

[[noreturn]] void bad(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Decode, "CSV line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string write(const std::vector<Row>& rows) {
  std::string out;
  for (const Row& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out.push_back(',');
      const std::string& f = row[i];
      if (!needs_quotes(f)) {
        out += f;
        continue;
      }
      out.push_back('"');
      for (char c : f) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    }
    out += "\r\n";
  }
  return out;
}

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();

  const auto end_record = [&] {
    row.push_back(std::move(field));
    field.clear();
    if (!rows.empty() && row.size() != rows.front().size()) {
      bad(line, "expected " + std::to_string(rows.front().size()) + " fields, found " +
                    std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
    row.clear();
  };

  while (i < n) {
    // Start of a field.
    if (text[i] == '"') {
      ++i;
      while (true) {
        if (i >= n) bad(line, "unterminated quoted field");
        const char c = text[i];
        if (c == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (c == '\n') ++line;
        field.push_back(c);
        ++i;
      }
      if (i < n && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
        bad(line, "unexpected character after closing quote");
      }
    } else {
      while (i < n && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
        if (text[i] == '"') bad(line, "quote inside unquoted field");
        field.push_back(text[i]);
        ++i;
      }
    }

    if (i >= n) {
      end_record();
      break;
    }
    if (text[i] == ',') {
      row.push_back(std::move(field));
      field.clear();
      ++i;
      if (i == n) {
        end_record();  // trailing empty field
        break;
      }
      continue;
    }
    if (text[i] == '\r') {
      if (i + 1 >= n || text[i + 1] != '\n') bad(line, "bare CR outside quotes");
      ++i;
    }
    ++i;  // LF
    end_record();
    ++line;
  }
  return rows;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double parse_real(std::string_view field, std::string_view column) {
  const std::string s(field);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw Error(ErrorKind::Decode,
                "column '" + std::string(column) + "' holds non-numeric value '" + s + "'");
  }
  return v;
}

Table::Table(std::vector<Row> rows, const std::vector<std::string>& required)
    : rows_(std::move(rows)) {
  if (rows_.empty()) throw Error(ErrorKind::Decode, "CSV has no header row");
  const Row& header = rows_.front();
  for (const auto& col : required) {
    if (std::find(header.begin(), header.end(), col) == header.end()) {
      throw Error(ErrorKind::Decode, "CSV header lacks column '" + col + "'");
    }
  }
}

const std::string& Table::at(std::size_t record, std::string_view column) const {
  const Row& header = rows_.front();
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) {
    throw Error(ErrorKind::Decode, "CSV header lacks column '" + std::string(column) + "'");
  }
  return rows_.at(record + 1).at(static_cast<std::size_t>(it - header.begin()));
}

Table read_table(const std::filesystem::path& path, const std::vector<std::string>& required) {
  const std::string text = read_file(path);
  try {
    return Table(parse(text), required);
  } catch (const Error& err) {
    throw Error(err.kind(), path.string() + ": " + err.detail());
  }
}

std::vector<std::string> read_prompts(const std::filesystem::path& path) {
  const Table table = read_table(path, {"prompt"});
  std::vector<std::string> prompts;
  prompts.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) prompts.push_back(table.at(i, "prompt"));
  return prompts;
}

void write_prompts(const std::filesystem::path& path, const std::vector<std::string>& prompts) {
  std::vector<Row> rows{{"prompt"}};
  for (const auto& p : prompts) rows.push_back({p});
  atomic_write_file(path, write(rows), false);
}

}  // namespace kvr::csv
