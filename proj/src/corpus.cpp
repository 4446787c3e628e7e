#include "kvrecycle/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace kvr::corpus {

const std::vector<std::string>& demo_cache_prompts() {
  static const std::vector<std::string> prompts = {
      "Explain machine learning in simple terms.",
      "What is the capital of France?",
      "How do airplanes fly?",
      "Why is the sky blue?",
      "Describe how a rainbow forms.",
      "What causes the seasons on Earth?",
      "How does a vaccine train the immune system?",
      "Summarize the plot of Romeo and Juliet.",
      "What is photosynthesis?",
      "Give me a tip for learning a new language.",
  };
  return prompts;
}

const std::vector<std::string>& demo_test_prompts() {
  static const std::vector<std::string> prompts = {
      "Explain machine learning in simple terms. Give an example application.",
      "What is the capital of France? Also mention a nearby tourist destination.",
      "How do airplanes fly? Explain lift.",
      "Why is the sky blue? Answer for a child.",
      "What is photosynthesis? Explain briefly.",
      "Give me a tip for learning a new language. Make it practical.",
  };
  return prompts;
}

const std::vector<std::string>& demo_unrelated_prompts() {
  static const std::vector<std::string> prompts = {
      "Tell me a joke about computers.",
      "List three prime numbers.",
      "Recommend a good book.",
  };
  return prompts;
}

std::string synthetic_text(std::size_t length, std::uint64_t variant) {
  std::mt19937_64 rng(0x5eed0000ULL + variant);
  // Each variant spells its words from its own eight letters.
  std::string letters = "abcdefghijklmnopqrstuvwxyz";
  std::shuffle(letters.begin(), letters.end(), rng);
  letters.resize(8);
  std::array<std::string, 16> words;
  for (auto& w : words) {
    for (std::size_t n = 3 + rng() % 5; n > 0; --n) w.push_back(letters[rng() % letters.size()]);
  }
  std::string text;
  text.reserve(length + 16);
  while (text.size() < length) {
    if (!text.empty()) text.push_back(' ');
    text += words[rng() % words.size()];
  }
  text.resize(length);
  return text;
}

std::vector<SyntheticPair> synthetic_pairs(const std::vector<std::size_t>& lengths,
                                           const std::vector<double>& ratios,
                                           std::size_t variants) {
  std::vector<SyntheticPair> pairs;
  std::uint64_t variant = 0;
  for (std::size_t v = 0; v < variants; ++v) {
    for (std::size_t length : lengths) {
      for (double ratio : ratios) {
        std::string test = synthetic_text(length, variant++);
        const auto prefix = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(length)));
        pairs.push_back({test.substr(0, prefix), std::move(test)});
      }
    }
  }
  return pairs;
}

}  // namespace kvr::corpus
