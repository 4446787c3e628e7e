#include <filesystem>

#include "doctest.h"
#include "kvrecycle/corpus.hpp"
#include "kvrecycle/csv.hpp"
#include "kvrecycle/error.hpp"
#include "kvrecycle/harness.hpp"
#include "kvrecycle/io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using kvr::ComparisonRow;
using kvr::Model;
using kvr::ModelConfig;
using kvr::RunMode;
using kvr::RunRecord;

namespace {

const Model& default_model() {
  static const Model m{ModelConfig{}};
  return m;
}

const kvr::BenchOptions kQuick{8, 0, 2};

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "kvrecycle_harness_tests";
  fs::create_directories(dir);
  return dir;
}

RunRecord timed(const std::string& prompt, double latency, const std::string& output = "out") {
  RunRecord r;
  r.prompt = prompt;
  r.output_text = output;
  r.latency_s = latency;
  return r;
}

ComparisonRow row_with(const std::string& prompt, std::size_t k, double speedup) {
  ComparisonRow r;
  r.prompt = prompt;
  r.reused_tokens = k;
  r.speedup_pct = speedup;
  return r;
}

}  // namespace

TEST_CASE("median and speedup") {
  CHECK(kvr::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(kvr::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(kvr::median({}), kvr::Error);
  CHECK(kvr::speedup_pct(1.0, 0.5) == 50.0);
  CHECK(kvr::speedup_pct(1.0, 1.25) == -25.0);
}

TEST_CASE("baseline run over the demo test prompts") {
  const auto& prompts = kvr::corpus::demo_test_prompts();
  const auto a = kvr::run_baseline(default_model(), prompts, kQuick);
  const auto b = kvr::run_baseline(default_model(), prompts, kQuick);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].prompt == prompts[i]);
    CHECK(a[i].mode == RunMode::Baseline);
    CHECK(a[i].reused_tokens == 0);
    CHECK(a[i].latency_s > 0.0);
    CHECK(!a[i].error);
    CHECK(kvr::parse_rendered(a[i].output_text).size() == 8);
    CHECK(a[i].output_text == b[i].output_text);
  }
}

TEST_CASE("overflowing and empty prompts are recorded, the run continues") {
  ModelConfig c;
  c.max_context = 24;
  const Model m(c);
  const auto records = kvr::run_baseline(m, {"short", std::string(20, 'x'), ""}, kQuick);
  REQUIRE(records.size() == 3);
  CHECK(!records[0].error);
  REQUIRE(records[1].error);
  CHECK(records[1].error->find("position") != std::string::npos);
  CHECK(records[2].error);
}

TEST_CASE("recycled run reports modes, reuse and matching outputs") {
  const Model& m = default_model();
  const auto store = kvr::build_cache(m, kvr::corpus::demo_cache_prompts());
  std::vector<std::string> prompts = kvr::corpus::demo_test_prompts();
  prompts.push_back(kvr::corpus::demo_unrelated_prompts().front());
  const auto base = kvr::run_baseline(m, prompts, kQuick);
  const auto rec = kvr::run_recycled(m, store, prompts, kQuick);
  REQUIRE(rec.size() == 7);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(rec[i].mode == RunMode::Recycled);
    CHECK(rec[i].reused_tokens == kvr::tokenize(store.entry(i < 4 ? i : i + 4).prompt_text).size());
    CHECK(rec[i].retrieval_score > 0.9);
    CHECK(rec[i].output_text == base[i].output_text);
  }
  CHECK(rec[6].mode == RunMode::FallbackNoPrefix);
  CHECK(rec[6].reused_tokens == 0);
  CHECK(rec[6].output_text == base[6].output_text);

  const auto cmp = kvr::compare(m, base, rec);
  REQUIRE(cmp.rows.size() == 7);
  for (const auto& row : cmp.rows) CHECK(row.output_similarity == doctest::Approx(1.0).epsilon(1e-6));
  REQUIRE(cmp.mean_speedup_pct);
  double total = 0.0;
  for (const auto& row : cmp.rows) total += row.speedup_pct;
  CHECK(*cmp.mean_speedup_pct == doctest::Approx(total / 7));

  const kvr::CacheStore empty(m.fingerprint());
  const auto none = kvr::run_recycled(m, empty, {prompts[0]}, kQuick);
  CHECK(none[0].mode == RunMode::FallbackEmptyCache);
  CHECK(none[0].output_text == base[0].output_text);

  ModelConfig other;
  other.seed = 7;
  CHECK_THROWS_AS(kvr::run_recycled(Model(other), store, prompts, kQuick), kvr::Error);
}

TEST_CASE("compare: speedup, similarity and join errors") {
  const Model& m = default_model();
  const auto cmp = kvr::compare(m, {timed("p", 1.0, "hello")}, {timed("p", 0.5, "hello")});
  REQUIRE(cmp.rows.size() == 1);
  CHECK(cmp.rows[0].speedup_pct == 50.0);
  CHECK(cmp.rows[0].output_similarity == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(*cmp.mean_speedup_pct == 50.0);

  const auto diff = kvr::compare(m, {timed("p", 1.0, "hello")}, {timed("p", 1.0, "\\x00\\x01zz")});
  CHECK(diff.rows[0].output_similarity < 1.0);
  CHECK(kvr::compare(m, {timed("p", 1.0, "")}, {timed("p", 1.0, "")}).rows[0].output_similarity == 1.0);
  CHECK(kvr::compare(m, {timed("p", 1.0, "")}, {timed("p", 1.0, "a")}).rows[0].output_similarity == 0.0);

  try {
    kvr::compare(m, {timed("a", 1.0)}, {timed("b", 1.0)});
    FAIL("expected a join error");
  } catch (const kvr::Error& e) {
    CHECK(e.kind() == kvr::ErrorKind::Join);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  CHECK_THROWS_AS(kvr::compare(m, {timed("a", 1.0)}, {timed("a", 1.0), timed("b", 1.0)}),
                  kvr::Error);

  // repeated prompts pair in order
  const auto dup = kvr::compare(m, {timed("a", 1.0), timed("a", 2.0)}, {timed("a", 0.5), timed("a", 0.5)});
  CHECK(dup.rows[0].speedup_pct == 50.0);
  CHECK(dup.rows[1].speedup_pct == 75.0);

  RunRecord broken = timed("a", 0.0);
  broken.error = "overflow";
  const auto skip = kvr::compare(m, {broken}, {timed("a", 1.0)});
  CHECK(skip.rows.empty());
  CHECK(skip.skipped == std::vector<std::string>{"a"});
  CHECK(!skip.mean_speedup_pct);
}

TEST_CASE("fit_alpha recovers an exact linear law") {
  std::vector<ComparisonRow> rows;
  for (std::size_t m : {40, 64, 100, 256}) {
    const std::string prompt(m, 'p');
    for (std::size_t k : {m / 4, m / 2, m - 1}) {
      rows.push_back(row_with(prompt, k, 100.0 * 1.3 * static_cast<double>(k) / m));
    }
  }
  rows.push_back(row_with("zero", 0, -4.0));  // ignored
  const auto fit = kvr::fit_alpha(rows);
  CHECK(std::abs(fit.alpha - 1.3) < 1e-9);
  CHECK(fit.residual_norm < 1e-9);
  CHECK(fit.points == 12);

  const auto single = kvr::fit_alpha({row_with(std::string(10, 'q'), 4, 20.0)});
  CHECK(single.alpha == doctest::Approx(0.2 * 10 / 4));

  try {
    kvr::fit_alpha({row_with("a", 0, 10.0), row_with("b", 0, 5.0)});
    FAIL("expected no fit");
  } catch (const kvr::Error& e) {
    CHECK(e.kind() == kvr::ErrorKind::NoFit);
  }
}

TEST_CASE("result CSVs round trip with awkward prompts") {
  const fs::path dir = temp_dir();
  RunRecord a = timed("plain", 0.125, "abc");
  RunRecord b = timed("comma, \"quote\"\nnewline", 0.5, "x\\x0ay");
  b.reused_tokens = 7;
  b.retrieval_score = 0.875;
  b.mode = RunMode::Recycled;
  b.load_s = 0.001;
  RunRecord c = timed("overflow", 0.0, "");
  c.error = "context overflow";
  c.mode = RunMode::FallbackNoPrefix;

  kvr::emit_baseline_csv({a, c}, dir / "baseline.csv");
  const auto base = kvr::read_baseline_csv(dir / "baseline.csv");
  REQUIRE(base.size() == 2);
  CHECK(base[0].prompt == "plain");
  CHECK(base[0].latency_s == 0.125);
  CHECK(base[1].error);

  kvr::emit_recycled_csv({a, b, c}, dir / "recycled.csv");
  const std::string text = kvr::read_file(dir / "recycled.csv");
  CHECK(text.rfind("prompt,output,latency_s,reused_tokens,retrieval_score,mode,load_s\r\n", 0) == 0);
  CHECK(oracle::rfc4180_read(text) == kvr::csv::parse(text));
  const auto rec = kvr::read_recycled_csv(dir / "recycled.csv");
  REQUIRE(rec.size() == 3);
  CHECK(rec[1].prompt == b.prompt);
  CHECK(rec[1].output_text == b.output_text);
  CHECK(rec[1].reused_tokens == 7);
  CHECK(rec[1].retrieval_score == 0.875);
  CHECK(rec[1].mode == RunMode::Recycled);
  CHECK(rec[1].load_s == 0.001);
  CHECK(rec[2].error);
  CHECK(rec[2].mode == RunMode::FallbackNoPrefix);

  ComparisonRow row = row_with(b.prompt, 7, 12.5);
  row.baseline_latency_s = 0.5;
  row.recycled_latency_s = 0.4375;
  row.output_similarity = 1.0;
  kvr::emit_comparison_csv({row}, dir / "comparison.csv");
  CHECK(kvr::read_file(dir / "comparison.csv")
            .rfind("prompt,baseline_latency_s,recycled_latency_s,reused_tokens,output_similarity,"
                   "speedup_pct\r\n",
                   0) == 0);
  const auto rows = kvr::read_comparison_csv(dir / "comparison.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].prompt == b.prompt);
  CHECK(rows[0].speedup_pct == 12.5);
  CHECK(rows[0].recycled_latency_s == 0.4375);

  kvr::atomic_write_file(dir / "bad.csv", "prompt,output\r\nx,y\r\n");
  CHECK_THROWS_AS(kvr::read_baseline_csv(dir / "bad.csv"), kvr::Error);
}

TEST_CASE("shipped prompt files match the demo corpus") {
  const fs::path data = KVR_DATA_DIR;
  CHECK(kvr::csv::read_prompts(data / "cache_prompts.csv") == kvr::corpus::demo_cache_prompts());
  CHECK(kvr::csv::read_prompts(data / "test_prompts.csv") == kvr::corpus::demo_test_prompts());
}
