#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kvr::corpus {

/// Ten short general-knowledge prompts that seed the demo cache.
const std::vector<std::string>& demo_cache_prompts();

/// Six test prompts, each one a cached prompt extended with a follow-up.
const std::vector<std::string>& demo_test_prompts();

/// Prompts that share no leading byte with any demo cache prompt.
const std::vector<std::string>& demo_unrelated_prompts();

struct SyntheticPair {
  std::string cache_prompt;  // first prefix_len bytes of test_prompt
  std::string test_prompt;
};

/// Deterministic filler text of exactly `length` ASCII bytes. Each `variant`
/// draws from its own small list of made-up words.
std::string synthetic_text(std::size_t length, std::uint64_t variant);

/// One pair per (variant, length, ratio); the cache prompt is the leading
/// floor(ratio * length) bytes of the test prompt.
std::vector<SyntheticPair> synthetic_pairs(const std::vector<std::size_t>& lengths,
                                           const std::vector<double>& ratios,
                                           std::size_t variants);

}  // namespace kvr::corpus
