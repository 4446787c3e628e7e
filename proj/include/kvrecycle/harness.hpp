#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kvrecycle/cache_store.hpp"
#include "kvrecycle/config.hpp"
#include "kvrecycle/model.hpp"
#include "kvrecycle/recycler.hpp"

namespace kvr {

enum class RunMode { Baseline, Recycled, FallbackNoPrefix, FallbackEmptyCache };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);
RunMode to_run_mode(RecycleMode mode);

/// One benchmarked prompt. Baseline records always carry reused_tokens == 0
/// and mode == Baseline. A prompt that could not run keeps its error and no
/// latency.
struct RunRecord {
  std::string prompt;
  std::string output_text;  // render_tokens() of the generated ids
  double latency_s = 0.0;   // median over timed repetitions
  std::size_t reused_tokens = 0;
  double retrieval_score = 0.0;
  RunMode mode = RunMode::Baseline;
  double load_s = 0.0;
  std::optional<std::string> error;
};

struct ComparisonRow {
  std::string prompt;
  double baseline_latency_s = 0.0;
  double recycled_latency_s = 0.0;
  std::size_t reused_tokens = 0;
  double output_similarity = 0.0;
  double speedup_pct = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::optional<double> mean_speedup_pct;
  std::vector<std::string> skipped;  // prompts with an errored record on either side
};

struct AlphaFit {
  double alpha = 0.0;
  double residual_norm = 0.0;
  std::size_t points = 0;
};

/// Median of a non-empty sample.
double median(std::vector<double> samples);

/// (baseline - recycled) / baseline * 100.
double speedup_pct(double baseline_latency_s, double recycled_latency_s);

/// Per prompt: `warmup` untimed generations, then `repeats` timed ones whose
/// median latency is reported. Strictly sequential.
std::vector<RunRecord> run_baseline(const Model& model, const std::vector<std::string>& prompts,
                                    const BenchOptions& options);

/// Same protocol through the recycler. Throws StaleCache if the store was
/// built under a different model.
std::vector<RunRecord> run_recycled(const Model& model, const CacheStore& store,
                                    const std::vector<std::string>& prompts,
                                    const BenchOptions& options);

/// Cosine similarity of the model embeddings of two rendered outputs.
double output_similarity(const Model& model, std::string_view a, std::string_view b);

/// Joins the two runs on exact prompt text (repeated prompts pair up in
/// order). Throws ErrorKind::Join naming any prompt present on one side only.
Comparison compare(const Model& model, const std::vector<RunRecord>& baseline,
                   const std::vector<RunRecord>& recycled);

/// Least squares through the origin of speedup fraction against k/m, over
/// rows with reused_tokens > 0 (m is the prompt's token count). Throws
/// ErrorKind::NoFit when no row reused anything.
AlphaFit fit_alpha(const std::vector<ComparisonRow>& rows);

void emit_baseline_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path);
void emit_recycled_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path);
void emit_comparison_csv(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path);

std::vector<RunRecord> read_baseline_csv(const std::filesystem::path& path);
std::vector<RunRecord> read_recycled_csv(const std::filesystem::path& path);
std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path);

}  // namespace kvr
