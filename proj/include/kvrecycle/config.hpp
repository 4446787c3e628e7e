#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "kvrecycle/model.hpp"

namespace kvr {

/// Decoding budget and timing protocol shared by baseline and recycled runs.
struct BenchOptions {
  std::size_t max_new_tokens = 100;
  std::size_t warmup = 3;
  std::size_t repeats = 7;
};

/// Everything a harness run needs. Loaded from a `key = value` text file:
/// one pair per line, `#` starts a comment, blank lines ignored. Keys:
///
///   n_layers n_heads d_model d_head max_context seed
///   max_new_tokens warmup repeats
///   cache_prompts test_prompts cache_file results_dir
///
/// Unknown keys are rejected.
struct HarnessConfig {
  ModelConfig model;
  BenchOptions bench;
  std::filesystem::path cache_prompts = "data/cache_prompts.csv";
  std::filesystem::path test_prompts = "data/test_prompts.csv";
  std::filesystem::path cache_file = "results/kv_cache.kvrc";
  std::filesystem::path results_dir = "results";
};

/// Applies `text` on top of `base`. Throws ErrorKind::Config naming the line.
HarnessConfig parse_config(std::string_view text, HarnessConfig base = {});

HarnessConfig load_config(const std::filesystem::path& path, HarnessConfig base = {});

}  // namespace kvr
