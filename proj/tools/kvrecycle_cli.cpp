// kvrecycle: build KV caches, run baseline and recycled benchmarks, compare.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kvrecycle/cache_store.hpp"
#include "kvrecycle/config.hpp"
#include "kvrecycle/corpus.hpp"
#include "kvrecycle/csv.hpp"
#include "kvrecycle/error.hpp"
#include "kvrecycle/harness.hpp"

namespace fs = std::filesystem;
using namespace kvr;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_new_tokens;
  std::optional<std::size_t> warmup;
  std::optional<std::size_t> repeats;

  HarnessConfig resolve() const {
    HarnessConfig cfg = config_path.empty() ? HarnessConfig{} : load_config(config_path);
    if (seed) cfg.model.seed = *seed;
    if (max_new_tokens) cfg.bench.max_new_tokens = *max_new_tokens;
    if (warmup) cfg.bench.warmup = *warmup;
    if (repeats) cfg.bench.repeats = *repeats;
    if (cfg.bench.repeats == 0) throw Error(ErrorKind::Usage, "--repeats must be at least 1");
    cfg.model.validate();
    return cfg;
  }
};

void report_errors(const std::vector<RunRecord>& records) {
  for (const auto& r : records) {
    if (r.error) std::cerr << "warning: prompt '" << r.prompt << "' skipped: " << *r.error << "\n";
  }
}

void print_comparison(const Comparison& cmp) {
  std::printf("%-60s %10s %10s %6s %8s %9s\n", "prompt", "base_s", "recyc_s", "reuse", "sim",
              "speedup%");
  for (const auto& row : cmp.rows) {
    std::string p = row.prompt.size() > 58 ? row.prompt.substr(0, 55) + "..." : row.prompt;
    std::printf("%-60s %10.5f %10.5f %6zu %8.4f %9.2f\n", p.c_str(), row.baseline_latency_s,
                row.recycled_latency_s, row.reused_tokens, row.output_similarity, row.speedup_pct);
  }
  if (cmp.mean_speedup_pct) std::printf("mean speedup S = %.2f%%\n", *cmp.mean_speedup_pct);
  for (const auto& p : cmp.skipped) std::printf("skipped (errored run): %s\n", p.c_str());
}

void print_alpha(const std::vector<ComparisonRow>& rows) {
  try {
    const AlphaFit fit = fit_alpha(rows);
    std::printf("alpha = %.4f (residual norm %.4f over %zu rows, S ~= alpha * k/m)\n", fit.alpha,
                fit.residual_norm, fit.points);
  } catch (const Error& err) {
    std::printf("alpha: %s\n", err.detail().c_str());
  }
}

CacheStore timed_load(const fs::path& path, const Model& model) {
  const auto start = std::chrono::steady_clock::now();
  CacheStore store = load_store(path, model.fingerprint());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "loaded " << store.size() << " cache entries from " << path << " in " << secs
            << " s\n";
  return store;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KV-cache recycling engine and benchmark harness"};
  app.require_subcommand(1);

  Overrides ov;
  app.add_option("--config", ov.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", ov.seed, "model seed override");
  app.add_option("--max-new-tokens", ov.max_new_tokens, "decoding budget override");
  app.add_option("--warmup", ov.warmup, "untimed warmup generations per prompt");
  app.add_option("--repeats", ov.repeats, "timed repetitions per prompt (median reported)");

  std::string prompts_csv, cache_path, out_path, baseline_csv, recycled_csv, out_dir;
  bool with_alpha = false;

  auto* build = app.add_subcommand("build-cache", "build and save a KV cache store");
  build->add_option("--prompts", prompts_csv, "CSV with a prompt column")->required();
  build->add_option("--out", out_path, "cache file to write")->required();
  build->add_option("--config", ov.config_path, "key = value config file")->check(CLI::ExistingFile);

  auto* baseline = app.add_subcommand("run-baseline", "generate from scratch for each prompt");
  baseline->add_option("--prompts", prompts_csv, "CSV with a prompt column")->required();
  baseline->add_option("--out", out_path, "baseline CSV to write")->required();

  auto* recycled = app.add_subcommand("run-recycled", "generate reusing cached prefixes");
  recycled->add_option("--prompts", prompts_csv, "CSV with a prompt column")->required();
  recycled->add_option("--cache", cache_path, "cache file from build-cache")->required();
  recycled->add_option("--out", out_path, "recycled CSV to write")->required();

  auto* cmp = app.add_subcommand("compare", "join baseline and recycled runs");
  cmp->add_option("--baseline", baseline_csv, "baseline CSV")->required();
  cmp->add_option("--recycled", recycled_csv, "recycled CSV")->required();
  cmp->add_option("--out", out_path, "comparison CSV to write")->required();
  cmp->add_flag("--alpha", with_alpha, "fit S ~= alpha * k/m and print it");

  auto* demo = app.add_subcommand("demo", "end-to-end run on the shipped corpus");
  out_dir = "results";
  demo->add_option("--out-dir", out_dir, "directory for cache and CSV outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const HarnessConfig cfg = ov.resolve();
    const Model model(cfg.model);

    if (*build) {
      const auto prompts = csv::read_prompts(prompts_csv);
      const CacheStore store = build_cache(model, prompts);
      save_store(store, out_path);
      std::cerr << "cached " << store.size() << " prompts into " << out_path << "\n";
    } else if (*baseline) {
      const auto records = run_baseline(model, csv::read_prompts(prompts_csv), cfg.bench);
      report_errors(records);
      emit_baseline_csv(records, out_path);
    } else if (*recycled) {
      const CacheStore store = timed_load(cache_path, model);
      const auto records = run_recycled(model, store, csv::read_prompts(prompts_csv), cfg.bench);
      report_errors(records);
      emit_recycled_csv(records, out_path);
    } else if (*cmp) {
      const Comparison result =
          compare(model, read_baseline_csv(baseline_csv), read_recycled_csv(recycled_csv));
      emit_comparison_csv(result.rows, out_path);
      print_comparison(result);
      if (with_alpha) print_alpha(result.rows);
    } else if (*demo) {
      const fs::path dir = out_dir;
      const fs::path cache_file = dir / "kv_cache.kvrc";
      save_store(build_cache(model, corpus::demo_cache_prompts()), cache_file);
      const CacheStore store = timed_load(cache_file, model);
      const auto& tests = corpus::demo_test_prompts();
      const auto base = run_baseline(model, tests, cfg.bench);
      const auto rec = run_recycled(model, store, tests, cfg.bench);
      report_errors(base);
      report_errors(rec);
      emit_baseline_csv(base, dir / "baseline.csv");
      emit_recycled_csv(rec, dir / "recycled.csv");
      const Comparison result = compare(model, base, rec);
      emit_comparison_csv(result.rows, dir / "comparison.csv");
      std::size_t reused = 0;
      for (const auto& r : rec) {
        std::printf("%-20s reuse %3zu  score %.4f  %s\n", std::string(to_string(r.mode)).c_str(),
                    r.reused_tokens, r.retrieval_score, r.prompt.c_str());
        reused += r.reused_tokens;
      }
      std::printf("total reused tokens: %zu\n\n", reused);
      print_comparison(result);
      print_alpha(result.rows);
      std::printf("outputs written to %s\n", dir.string().c_str());
    }
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code(err.kind());
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
