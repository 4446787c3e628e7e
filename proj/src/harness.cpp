#include "kvrecycle/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kvrecycle/csv.hpp"
#include "kvrecycle/error.hpp"
#include "kvrecycle/io.hpp"

namespace kvr {

namespace {

const std::vector<std::string> kBaselineColumns = {"prompt", "output", "latency_s"};
const std::vector<std::string> kRecycledColumns = {"prompt",          "output", "latency_s",
                                                   "reused_tokens",   "retrieval_score",
                                                   "mode",            "load_s"};
const std::vector<std::string> kComparisonColumns = {
    "prompt",        "baseline_latency_s", "recycled_latency_s",
    "reused_tokens", "output_similarity",  "speedup_pct"};

// Per-prompt failures that are recorded rather than aborting the run.
bool recordable(const Error& err) {
  return err.kind() == ErrorKind::ContextOverflow || err.kind() == ErrorKind::EmptyStep ||
         err.kind() == ErrorKind::DegenerateEmbedding;
}

template <typename Generate>
void time_runs(const BenchOptions& options, RunRecord& record, Generate&& generate) {
  for (std::size_t i = 0; i < options.warmup; ++i) generate();
  std::vector<double> latencies;
  std::vector<double> loads;
  TokenSeq first_output;
  for (std::size_t i = 0; i < std::max<std::size_t>(options.repeats, 1); ++i) {
    auto [tokens, latency_s, load_s] = generate();
    if (i == 0) {
      first_output = std::move(tokens);
    } else if (tokens != first_output) {
      throw Error(ErrorKind::Shape, "non-deterministic output for prompt '" + record.prompt + "'");
    }
    latencies.push_back(latency_s);
    loads.push_back(load_s);
  }
  record.output_text = render_tokens(first_output);
  record.latency_s = median(latencies);
  record.load_s = median(loads);
}

struct Timed {
  TokenSeq tokens;
  double latency_s;
  double load_s;
};

std::size_t parse_count(std::string_view field, std::string_view column) {
  const double v = csv::parse_real(field, column);
  if (v < 0 || v != std::floor(v)) {
    throw Error(ErrorKind::Decode,
                "column '" + std::string(column) + "' needs a count, got '" + std::string(field) + "'");
  }
  return static_cast<std::size_t>(v);
}

void fill_latency(RunRecord& r, const std::string& field) {
  if (field.empty()) {
    r.error = "no latency recorded";
  } else {
    r.latency_s = csv::parse_real(field, "latency_s");
  }
}

std::string latency_field(const RunRecord& r) {
  return r.error ? std::string() : csv::format_real(r.latency_s);
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Baseline: return "BASELINE";
    case RunMode::Recycled: return "RECYCLED";
    case RunMode::FallbackNoPrefix: return "FALLBACK_NO_PREFIX";
    case RunMode::FallbackEmptyCache: return "FALLBACK_EMPTY_CACHE";
  }
  return "UNKNOWN";
}

RunMode parse_run_mode(std::string_view text) {
  for (RunMode m : {RunMode::Baseline, RunMode::Recycled, RunMode::FallbackNoPrefix,
                    RunMode::FallbackEmptyCache}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorKind::Decode, "unknown mode '" + std::string(text) + "'");
}

RunMode to_run_mode(RecycleMode mode) {
  switch (mode) {
    case RecycleMode::Recycled: return RunMode::Recycled;
    case RecycleMode::FallbackNoPrefix: return RunMode::FallbackNoPrefix;
    case RecycleMode::FallbackEmptyCache: return RunMode::FallbackEmptyCache;
  }
  return RunMode::FallbackNoPrefix;
}

double median(std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorKind::Shape, "median of an empty sample");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

double speedup_pct(double baseline_latency_s, double recycled_latency_s) {
  return (baseline_latency_s - recycled_latency_s) / baseline_latency_s * 100.0;
}

std::vector<RunRecord> run_baseline(const Model& model, const std::vector<std::string>& prompts,
                                    const BenchOptions& options) {
  std::vector<RunRecord> records;
  records.reserve(prompts.size());
  for (const std::string& prompt : prompts) {
    RunRecord record;
    record.prompt = prompt;
    record.mode = RunMode::Baseline;
    const TokenSeq ids = tokenize(prompt);
    try {
      time_runs(options, record, [&] {
        GenerateResult g = model.generate(ids, std::nullopt, options.max_new_tokens);
        return Timed{std::move(g.tokens), g.latency_s, 0.0};
      });
    } catch (const Error& err) {
      if (!recordable(err)) throw;
      record.error = err.what();
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<RunRecord> run_recycled(const Model& model, const CacheStore& store,
                                    const std::vector<std::string>& prompts,
                                    const BenchOptions& options) {
  if (store.model_fingerprint() != model.fingerprint()) {
    throw Error(ErrorKind::StaleCache, "cache store fingerprint " +
                                           std::to_string(store.model_fingerprint()) +
                                           " does not match the running model " +
                                           std::to_string(model.fingerprint()));
  }
  std::vector<RunRecord> records;
  records.reserve(prompts.size());
  for (const std::string& prompt : prompts) {
    RunRecord record;
    record.prompt = prompt;
    const TokenSeq ids = tokenize(prompt);
    try {
      const RecycleDecision decision =
          store.empty() ? decide(store, ids, {}) : decide(store, ids, model.embed_prompt(ids));
      record.mode = to_run_mode(decision.mode);
      record.retrieval_score = decision.retrieval_score;
      record.reused_tokens = decision.mode == RecycleMode::Recycled ? decision.reuse_depth : 0;
      time_runs(options, record, [&] {
        RecycleResult r = generate_with_decision(model, store, ids, decision, options.max_new_tokens);
        return Timed{std::move(r.tokens), r.latency_s, r.load_s};
      });
    } catch (const Error& err) {
      if (!recordable(err)) throw;
      record.error = err.what();
    }
    records.push_back(std::move(record));
  }
  return records;
}

double output_similarity(const Model& model, std::string_view a, std::string_view b) {
  TokenSeq ta = parse_rendered(a);
  TokenSeq tb = parse_rendered(b);
  if (ta.empty() || tb.empty()) return ta == tb ? 1.0 : 0.0;
  const std::size_t limit = model.config().max_context;
  if (ta.size() > limit) ta.resize(limit);
  if (tb.size() > limit) tb.resize(limit);
  return dot(model.embed_prompt(ta), model.embed_prompt(tb));
}

Comparison compare(const Model& model, const std::vector<RunRecord>& baseline,
                   const std::vector<RunRecord>& recycled) {
  std::map<std::string, std::vector<const RunRecord*>> pending;
  for (const RunRecord& r : recycled) pending[r.prompt].push_back(&r);

  Comparison out;
  for (const RunRecord& base : baseline) {
    auto it = pending.find(base.prompt);
    if (it == pending.end() || it->second.empty()) {
      throw Error(ErrorKind::Join, "prompt '" + base.prompt + "' has no recycled row");
    }
    const RunRecord& rec = *it->second.front();
    it->second.erase(it->second.begin());
    if (base.error || rec.error) {
      out.skipped.push_back(base.prompt);
      continue;
    }
    ComparisonRow row;
    row.prompt = base.prompt;
    row.baseline_latency_s = base.latency_s;
    row.recycled_latency_s = rec.latency_s;
    row.reused_tokens = rec.reused_tokens;
    row.output_similarity = output_similarity(model, base.output_text, rec.output_text);
    row.speedup_pct = speedup_pct(base.latency_s, rec.latency_s);
    out.rows.push_back(std::move(row));
  }
  for (const auto& [prompt, left] : pending) {
    if (!left.empty()) throw Error(ErrorKind::Join, "prompt '" + prompt + "' has no baseline row");
  }
  if (!out.rows.empty()) {
    double total = 0.0;
    for (const auto& row : out.rows) total += row.speedup_pct;
    out.mean_speedup_pct = total / static_cast<double>(out.rows.size());
  }
  return out;
}

AlphaFit fit_alpha(const std::vector<ComparisonRow>& rows) {
  std::vector<std::pair<double, double>> points;  // (k/m, S)
  for (const auto& row : rows) {
    if (row.reused_tokens == 0) continue;
    const double m = static_cast<double>(tokenize(row.prompt).size());
    points.emplace_back(static_cast<double>(row.reused_tokens) / m, row.speedup_pct / 100.0);
  }
  if (points.empty()) throw Error(ErrorKind::NoFit, "no row reused any tokens");
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& [x, s] : points) {
    sxy += x * s;
    sxx += x * x;
  }
  AlphaFit fit;
  fit.alpha = sxy / sxx;
  fit.points = points.size();
  double sq = 0.0;
  for (const auto& [x, s] : points) sq += (s - fit.alpha * x) * (s - fit.alpha * x);
  fit.residual_norm = std::sqrt(sq);
  return fit;
}

void emit_baseline_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  std::vector<csv::Row> rows{kBaselineColumns};
  for (const auto& r : records) rows.push_back({r.prompt, r.output_text, latency_field(r)});
  atomic_write_file(path, csv::write(rows), false);
}

void emit_recycled_csv(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
  std::vector<csv::Row> rows{kRecycledColumns};
  for (const auto& r : records) {
    rows.push_back({r.prompt, r.output_text, latency_field(r), std::to_string(r.reused_tokens),
                    csv::format_real(r.retrieval_score), std::string(to_string(r.mode)),
                    r.error ? std::string() : csv::format_real(r.load_s)});
  }
  atomic_write_file(path, csv::write(rows), false);
}

void emit_comparison_csv(const std::vector<ComparisonRow>& rows_in,
                         const std::filesystem::path& path) {
  std::vector<csv::Row> rows{kComparisonColumns};
  for (const auto& r : rows_in) {
    rows.push_back({r.prompt, csv::format_real(r.baseline_latency_s),
                    csv::format_real(r.recycled_latency_s), std::to_string(r.reused_tokens),
                    csv::format_real(r.output_similarity), csv::format_real(r.speedup_pct)});
  }
  atomic_write_file(path, csv::write(rows), false);
}

std::vector<RunRecord> read_baseline_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path, kBaselineColumns);
  std::vector<RunRecord> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    RunRecord r;
    r.prompt = t.at(i, "prompt");
    r.output_text = t.at(i, "output");
    fill_latency(r, t.at(i, "latency_s"));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RunRecord> read_recycled_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path, kRecycledColumns);
  std::vector<RunRecord> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    RunRecord r;
    r.prompt = t.at(i, "prompt");
    r.output_text = t.at(i, "output");
    fill_latency(r, t.at(i, "latency_s"));
    r.reused_tokens = parse_count(t.at(i, "reused_tokens"), "reused_tokens");
    r.retrieval_score = csv::parse_real(t.at(i, "retrieval_score"), "retrieval_score");
    r.mode = parse_run_mode(t.at(i, "mode"));
    if (!r.error) r.load_s = csv::parse_real(t.at(i, "load_s"), "load_s");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path, kComparisonColumns);
  std::vector<ComparisonRow> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    ComparisonRow r;
    r.prompt = t.at(i, "prompt");
    r.baseline_latency_s = csv::parse_real(t.at(i, "baseline_latency_s"), "baseline_latency_s");
    r.recycled_latency_s = csv::parse_real(t.at(i, "recycled_latency_s"), "recycled_latency_s");
    r.reused_tokens = parse_count(t.at(i, "reused_tokens"), "reused_tokens");
    r.output_similarity = csv::parse_real(t.at(i, "output_similarity"), "output_similarity");
    r.speedup_pct = csv::parse_real(t.at(i, "speedup_pct"), "speedup_pct");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace kvr
