#include "kvrecycle/recycler.hpp"

#include <algorithm>
#include <chrono>

#include "kvrecycle/error.hpp"

namespace kvr {

std::string_view to_string(RecycleMode mode) {
  switch (mode) {
    case RecycleMode::Recycled: return "RECYCLED";
    case RecycleMode::FallbackNoPrefix: return "FALLBACK_NO_PREFIX";
    case RecycleMode::FallbackEmptyCache: return "FALLBACK_EMPTY_CACHE";
  }
  return "UNKNOWN";
}

std::size_t reuse_depth(std::span<const TokenId> test_ids, std::span<const TokenId> cache_ids) {
  const auto [test_end, cache_end] = std::mismatch(test_ids.begin(), test_ids.end(),
                                                   cache_ids.begin(), cache_ids.end());
  return static_cast<std::size_t>(test_end - test_ids.begin());
}

RecycleDecision decide(const CacheStore& store, const TokenSeq& test_ids,
                       std::span<const float> test_embedding, const CandidateSelector& select) {
  if (test_ids.empty()) throw Error(ErrorKind::EmptyStep, "cannot decide on an empty prompt");
  RecycleDecision d;
  d.prompt_len = test_ids.size();
  if (store.empty()) {
    d.mode = RecycleMode::FallbackEmptyCache;
    return d;
  }
  const RetrievalHit hit = select ? select(store, test_embedding) : retrieve(store, test_embedding);
  const TokenSeq& cached = store.entry(hit.index).input_ids;
  d.candidate_index = hit.index;
  d.retrieval_score = hit.score;
  d.cache_len = cached.size();
  d.reuse_depth = reuse_depth(test_ids, cached);
  // Strict gate: the whole cached prompt must be a prefix of the test prompt.
  d.mode = (d.cache_len >= 1 && d.reuse_depth == d.cache_len) ? RecycleMode::Recycled
                                                               : RecycleMode::FallbackNoPrefix;
  return d;
}

RecycleResult generate_with_decision(const Model& model, const CacheStore& store,
                                     const TokenSeq& test_ids, const RecycleDecision& decision,
                                     std::size_t max_new_tokens) {
  RecycleResult result;
  result.decision = decision;
  if (decision.mode != RecycleMode::Recycled) {
    GenerateResult base = model.generate(test_ids, std::nullopt, max_new_tokens);
    result.tokens = std::move(base.tokens);
    result.latency_s = base.latency_s;
    return result;
  }

  const CacheEntry& entry = store.entry(decision.candidate_index.value());
  const std::size_t k = entry.input_ids.size();
  const std::size_t m = test_ids.size();
  // Re-check the gate at injection time, independently of whoever decided.
  if (k == 0 || k > m || !std::equal(entry.input_ids.begin(), entry.input_ids.end(),
                                     test_ids.begin())) {
    throw Error(ErrorKind::Shape, "cached prompt " + std::to_string(*decision.candidate_index) +
                                      " is not a prefix of the test prompt");
  }

  const auto load_start = std::chrono::steady_clock::now();
  KvCache past = entry.kv;
  // An identical prompt leaves nothing new to feed, so replay the last token.
  const std::size_t reused = (k == m) ? k - 1 : k;
  past.truncate(reused);
  const auto load_stop = std::chrono::steady_clock::now();
  result.load_s = std::chrono::duration<double>(load_stop - load_start).count();

  const TokenSeq new_ids(test_ids.begin() + static_cast<std::ptrdiff_t>(reused), test_ids.end());
  GenerateResult gen = model.generate(new_ids, std::move(past), max_new_tokens);
  result.tokens = std::move(gen.tokens);
  result.latency_s = gen.latency_s;
  return result;
}

RecycleResult recycled_generate(const Model& model, const CacheStore& store,
                                const TokenSeq& test_ids, std::size_t max_new_tokens,
                                const CandidateSelector& select) {
  if (store.model_fingerprint() != model.fingerprint()) {
    throw Error(ErrorKind::StaleCache, "store fingerprint does not match the running model");
  }
  const RecycleDecision decision =
      store.empty() ? decide(store, test_ids, {}, select)
                    : decide(store, test_ids, model.embed_prompt(test_ids), select);
  return generate_with_decision(model, store, test_ids, decision, max_new_tokens);
}

}  // namespace kvr
