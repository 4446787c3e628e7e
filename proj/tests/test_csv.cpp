#include <random>

#include "doctest.h"
#include "kvrecycle/csv.hpp"
#include "kvrecycle/error.hpp"
#include "oracles.hpp"

namespace csv = kvr::csv;

TEST_CASE("write quotes only when needed") {
  const std::string text = csv::write({{"prompt", "n"}, {"plain", "1"}, {"a,b", "say \"hi\""}});
  CHECK(text == "prompt,n\r\nplain,1\r\n\"a,b\",\"say \"\"hi\"\"\"\r\n");
}

TEST_CASE("parse handles quoting, embedded newlines and both line endings") {
  const auto rows = csv::parse("a,b\r\n\"x,1\",\"line\nbreak\"\n\"\"\"q\"\"\",\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == csv::Row{"x,1", "line\nbreak"});
  CHECK(rows[2] == csv::Row{"\"q\"", ""});
  CHECK(csv::parse("").empty());
  CHECK(csv::parse("only\r\n").size() == 1);
}

TEST_CASE("parse is strict") {
  const auto rejects = [](std::string_view text) {
    try {
      csv::parse(text);
    } catch (const kvr::Error& e) {
      return e.kind() == kvr::ErrorKind::Decode;
    }
    return false;
  };
  CHECK(rejects("a,b\r\n1\r\n"));            // ragged
  CHECK(rejects("a\r\nun\"quoted\r\n"));     // stray quote
  CHECK(rejects("a\r\n\"open\r\n"));         // unterminated
  CHECK(rejects("a\r\n\"closed\"junk\r\n"));  // text after quote
  CHECK(rejects("a\rb\r\n"));                // bare CR
}

TEST_CASE("write then parse round-trips random fields, cross-checked by a second reader") {
  std::mt19937_64 rng(8);
  const std::string alphabet = "ab ,\"\r\n\xc3\xa9x";
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t cols = 1 + rng() % 4;
    std::vector<csv::Row> rows;
    for (std::size_t r = 0; r < 1 + rng() % 5; ++r) {
      csv::Row row;
      for (std::size_t c = 0; c < cols; ++c) {
        std::string f;
        for (std::size_t n = rng() % 8; n > 0; --n) f.push_back(alphabet[rng() % alphabet.size()]);
        row.push_back(f);
      }
      rows.push_back(row);
    }
    // A lone empty field in a one-column row is written as an empty line,
    // which the reader still sees as one empty field.
    const std::string text = csv::write(rows);
    CHECK(csv::parse(text) == rows);
    CHECK(oracle::rfc4180_read(text) == rows);
  }
}

TEST_CASE("format_real uses six significant digits") {
  CHECK(csv::format_real(0.123456789) == "0.123457");
  CHECK(csv::format_real(50.0) == "50");
  CHECK(csv::format_real(1.5e-7) == "1.5e-07");
  CHECK(csv::parse_real("0.123457", "x") == doctest::Approx(0.123457));
  CHECK_THROWS_AS(csv::parse_real("abc", "x"), kvr::Error);
  CHECK_THROWS_AS(csv::parse_real("", "x"), kvr::Error);
}

TEST_CASE("Table requires its columns") {
  CHECK_THROWS_AS(csv::Table(csv::parse("text\r\nhello\r\n"), {"prompt"}), kvr::Error);
  const csv::Table t(csv::parse("id,prompt\r\n1,hello\r\n"), {"prompt"});
  CHECK(t.size() == 1);
  CHECK(t.at(0, "prompt") == "hello");
}
