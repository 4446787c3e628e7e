#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kvrecycle/model.hpp"
#include "kvrecycle/numerics.hpp"
#include "kvrecycle/tokenizer.hpp"

namespace kvr {

inline constexpr char kCacheMagic[4] = {'K', 'V', 'R', 'C'};
inline constexpr std::uint32_t kCacheFormatVersion = 1;

/// One cached prompt: its text, token ids, key/value states and unit embedding.
struct CacheEntry {
  std::string prompt_text;
  TokenSeq input_ids;
  KvCache kv;
  std::vector<float> embedding;

  bool operator==(const CacheEntry&) const = default;
};

/// Ordered cache entries plus the stacked embedding matrix (row i is entry i).
/// Immutable once built or loaded.
class CacheStore {
 public:
  explicit CacheStore(std::uint64_t model_fingerprint, std::size_t d_model = 0)
      : fingerprint_(model_fingerprint), embeddings_(0, d_model) {}

  /// Checks the entry invariants before appending.
  void add(CacheEntry entry);

  std::uint64_t model_fingerprint() const { return fingerprint_; }
  const std::vector<CacheEntry>& entries() const { return entries_; }
  const CacheEntry& entry(std::size_t i) const { return entries_.at(i); }
  const Matrix& embeddings() const { return embeddings_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  bool operator==(const CacheStore&) const = default;

 private:
  std::uint64_t fingerprint_;
  std::vector<CacheEntry> entries_;
  Matrix embeddings_;
};

/// One forward pass per prompt, keeping its cache and embedding.
CacheStore build_cache(const Model& model, const std::vector<std::string>& prompts);

/// Little-endian version-1 cache file image.
std::string serialize_store(const CacheStore& store);

/// Parses a cache file image. Throws CorruptCache on any structural problem
/// and StaleCache when the fingerprint differs from `expected_fingerprint`.
CacheStore deserialize_store(std::string_view bytes, std::uint64_t expected_fingerprint);

void save_store(const CacheStore& store, const std::filesystem::path& path);
CacheStore load_store(const std::filesystem::path& path, std::uint64_t expected_fingerprint);

struct RetrievalHit {
  std::size_t index = 0;
  double score = 0.0;
};

/// Exact linear scan for the largest dot product; lowest index wins ties.
RetrievalHit retrieve(const CacheStore& store, std::span<const float> query);

}  // namespace kvr
