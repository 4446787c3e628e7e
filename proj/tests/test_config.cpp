#include "doctest.h"
#include "kvrecycle/config.hpp"
#include "kvrecycle/error.hpp"

TEST_CASE("defaults") {
  const kvr::HarnessConfig cfg;
  CHECK(cfg.bench.max_new_tokens == 100);
  CHECK(cfg.bench.warmup == 3);
  CHECK(cfg.bench.repeats == 7);
  CHECK(cfg.model == kvr::ModelConfig{});
}

TEST_CASE("parse_config reads keys, comments and blank lines") {
  const auto cfg = kvr::parse_config(R"(# desk scale
n_layers = 2
n_heads = 2
d_model = 64   # two heads of 32
d_head = 32
seed = 7

max_new_tokens = 12
warmup = 0
repeats = 3
cache_prompts = prompts/cache.csv
results_dir = out
)");
  CHECK(cfg.model.n_layers == 2);
  CHECK(cfg.model.d_model == 64);
  CHECK(cfg.model.seed == 7);
  CHECK(cfg.model.max_context == 1024);
  CHECK(cfg.bench.max_new_tokens == 12);
  CHECK(cfg.bench.warmup == 0);
  CHECK(cfg.bench.repeats == 3);
  CHECK(cfg.cache_prompts == "prompts/cache.csv");
  CHECK(cfg.results_dir == "out");
}

TEST_CASE("parse_config errors") {
  const auto kind = [](const char* text) {
    try {
      kvr::parse_config(text);
    } catch (const kvr::Error& e) {
      return e.kind();
    }
    return kvr::ErrorKind::Usage;
  };
  CHECK(kind("bogus = 1\n") == kvr::ErrorKind::Config);
  CHECK(kind("n_layers\n") == kvr::ErrorKind::Config);
  CHECK(kind("seed = -1\n") == kvr::ErrorKind::Config);
  CHECK(kind("n_heads = 3\n") == kvr::ErrorKind::Config);  // 3 * 32 != 128
  CHECK(kind("repeats = 0\n") == kvr::ErrorKind::Config);
}
