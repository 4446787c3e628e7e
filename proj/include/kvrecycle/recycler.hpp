#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>

#include "kvrecycle/cache_store.hpp"
#include "kvrecycle/model.hpp"
#include "kvrecycle/tokenizer.hpp"

namespace kvr {

enum class RecycleMode { Recycled, FallbackNoPrefix, FallbackEmptyCache };

std::string_view to_string(RecycleMode mode);

/// Outcome of the prefix test for one prompt.
///
/// Invariants: reuse_depth <= min(prompt_len, cache_len), and
/// mode == Recycled exactly when reuse_depth == cache_len >= 1.
struct RecycleDecision {
  std::optional<std::size_t> candidate_index;
  double retrieval_score = 0.0;
  std::size_t reuse_depth = 0;
  std::size_t cache_len = 0;
  std::size_t prompt_len = 0;
  RecycleMode mode = RecycleMode::FallbackEmptyCache;
};

/// Length of the longest common prefix.
std::size_t reuse_depth(std::span<const TokenId> test_ids, std::span<const TokenId> cache_ids);

/// Picks a candidate from the store. The default is retrieve(); tests swap in
/// adversarial selectors to show the gate alone guards correctness.
using CandidateSelector =
    std::function<RetrievalHit(const CacheStore&, std::span<const float> query)>;

RecycleDecision decide(const CacheStore& store, const TokenSeq& test_ids,
                       std::span<const float> test_embedding,
                       const CandidateSelector& select = {});

struct RecycleResult {
  TokenSeq tokens;
  RecycleDecision decision;
  double latency_s = 0.0;  // the generate call
  double load_s = 0.0;     // materializing the working copy of the cached states
};

/// Applies a decision: resumes from the cached states on Recycled, otherwise
/// runs a plain baseline generation over the whole prompt.
RecycleResult generate_with_decision(const Model& model, const CacheStore& store,
                                     const TokenSeq& test_ids, const RecycleDecision& decision,
                                     std::size_t max_new_tokens);

/// decide() followed by generate_with_decision(). The query embedding is
/// computed with model.embed_prompt.
RecycleResult recycled_generate(const Model& model, const CacheStore& store,
                                const TokenSeq& test_ids, std::size_t max_new_tokens,
                                const CandidateSelector& select = {});

}  // namespace kvr
