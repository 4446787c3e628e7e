#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kvrecycle/numerics.hpp"
#include "kvrecycle/tokenizer.hpp"

namespace kvr {

/// Std of the N(0, std) weight init; sinusoidal positions are scaled by it too.
inline constexpr float kInitStd = 0.02f;
inline constexpr float kPositionScale = kInitStd;
inline constexpr float kLayerNormEps = 1e-5f;

struct ModelConfig {
  std::uint32_t n_layers = 4;
  std::uint32_t n_heads = 4;
  std::uint32_t d_model = 128;
  std::uint32_t d_head = 32;
  std::uint32_t vocab_size = static_cast<std::uint32_t>(kByteVocabSize);
  std::uint32_t max_context = 1024;
  std::uint64_t seed = 42;

  /// Throws ErrorKind::Config when the shape is inconsistent.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// 64-bit FNV-1a over the little-endian serialization of every config field,
/// seed included. Binds cache files to the weights that produced them.
std::uint64_t fingerprint(const ModelConfig& config);

/// Per-layer key/value history. Tensors are stored per (layer, head) as
/// position-major rows of d_head floats, i.e. [L][H][seq_len][d_head].
class KvCache {
 public:
  KvCache() = default;
  KvCache(std::size_t n_layers, std::size_t n_heads, std::size_t d_head);

  std::size_t n_layers() const { return n_layers_; }
  std::size_t n_heads() const { return n_heads_; }
  std::size_t d_head() const { return d_head_; }
  std::size_t seq_len() const { return seq_len_; }
  bool empty() const { return seq_len_ == 0; }

  std::span<const float> keys(std::size_t layer, std::size_t head) const {
    return keys_[layer * n_heads_ + head];
  }
  std::span<const float> values(std::size_t layer, std::size_t head) const {
    return values_[layer * n_heads_ + head];
  }
  std::span<const float> key(std::size_t layer, std::size_t head, std::size_t pos) const {
    return keys(layer, head).subspan(pos * d_head_, d_head_);
  }
  std::span<const float> value(std::size_t layer, std::size_t head, std::size_t pos) const {
    return values(layer, head).subspan(pos * d_head_, d_head_);
  }

  /// Appends one position to a (layer, head) slot. Call for every slot, then
  /// commit() once, to advance seq_len.
  void append(std::size_t layer, std::size_t head, std::span<const float> key,
              std::span<const float> value);
  void commit(std::size_t positions);

  /// Keeps the first `len` positions.
  void truncate(std::size_t len);

  /// Rebuilds a cache from flat [H][seq_len][d_head] tensors per layer.
  static KvCache from_tensors(std::size_t n_layers, std::size_t n_heads, std::size_t d_head,
                              std::size_t seq_len, std::vector<std::vector<float>> keys,
                              std::vector<std::vector<float>> values);

  bool all_finite() const;

  bool operator==(const KvCache&) const = default;

 private:
  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::size_t d_head_ = 0;
  std::size_t seq_len_ = 0;
  std::vector<std::vector<float>> keys_;
  std::vector<std::vector<float>> values_;
};

struct StepOutput {
  std::vector<float> logits;  // last position, length vocab_size
  KvCache cache;
};

struct GenerateResult {
  TokenSeq tokens;  // generated tokens only
  double latency_s = 0.0;
  KvCache cache;    // prompt plus all generated tokens except the last
};

struct LayerWeights {
  std::vector<float> ln1_gain, ln1_bias;
  Matrix w_qkv;  // [d_model, 3*d_model], columns are Q | K | V, heads contiguous
  std::vector<float> b_qkv;
  Matrix w_out;  // [d_model, d_model]
  std::vector<float> b_out;
  std::vector<float> ln2_gain, ln2_bias;
  Matrix w_fc;  // [d_model, 4*d_model]
  std::vector<float> b_fc;
  Matrix w_proj;  // [4*d_model, d_model]
  std::vector<float> b_proj;
};

struct ModelWeights {
  Matrix token_embedding;  // [vocab, d_model], also the tied output head
  std::vector<LayerWeights> layers;
  std::vector<float> lnf_gain, lnf_bias;
};

/// Pre-norm decoder-only transformer with sinusoidal positions and a tied
/// output head. Immutable after construction; safe to share across threads.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  KvCache empty_cache() const;

  /// Processes the whole sequence from position 0.
  StepOutput forward_full(const TokenSeq& tokens, bool use_cache = true) const;

  /// Feeds `new_tokens` at positions past.seq_len(), past.seq_len()+1, ...
  StepOutput forward_step(const TokenSeq& new_tokens, KvCache past) const;

  /// Logits for every position of `tokens`, shape [len, vocab_size].
  Matrix forward_all_logits(const TokenSeq& tokens) const;

  /// Greedy decoding of exactly max_new_tokens tokens. With `past`, the
  /// input_ids continue from the cached positions.
  GenerateResult generate(const TokenSeq& input_ids, std::optional<KvCache> past,
                          std::size_t max_new_tokens) const;

  /// Mean-pooled final hidden state, L2-normalized.
  std::vector<float> embed_prompt(const TokenSeq& tokens) const;

  const ModelWeights& weights() const { return weights_; }

 private:
  // Runs the stack over new_tokens, appending to cache. Returns final
  // normalized hidden states, one row per new token.
  Matrix run(const TokenSeq& new_tokens, KvCache& cache) const;
  std::vector<float> head_logits(std::span<const float> hidden) const;
  void check_tokens(const TokenSeq& tokens) const;

  ModelConfig config_;
  std::uint64_t fingerprint_ = 0;
  ModelWeights weights_;
  Matrix output_head_;  // [d_model, vocab], transpose of the token embedding
};

/// Lowest index among the maximal values.
TokenId argmax(std::span<const float> logits);

/// Sinusoidal position code for one position.
std::vector<float> positional_encoding(std::size_t position, std::size_t d_model);

}  // namespace kvr
