#include "kvrecycle/model.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "kvrecycle/error.hpp"

namespace kvr {

namespace {

// Box-Muller over mt19937_64. std::normal_distribution is not specified
// bit-for-bit, so it would break cross-platform weight reproducibility.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

  float next(float stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return static_cast<float>(spare_ * stddev);
    }
    const double u1 = unit_open();
    const double u2 = unit_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return static_cast<float>(radius * std::cos(angle) * stddev);
  }

  void fill(std::vector<float>& v, float stddev) {
    for (float& x : v) x = next(stddev);
  }

 private:
  // Uniform in (0, 1].
  double unit_open() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

void layer_norm(std::span<const float> in, std::span<const float> gain,
                std::span<const float> bias, std::span<float> out) {
  double mean = 0.0;
  for (float v : in) mean += v;
  mean /= static_cast<double>(in.size());
  double var = 0.0;
  for (float v : in) var += (v - mean) * (v - mean);
  var /= static_cast<double>(in.size());
  const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = static_cast<float>((in[i] - mean) * inv * gain[i] + bias[i]);
  }
}

Matrix layer_norm_rows(const Matrix& x, std::span<const float> gain,
                       std::span<const float> bias) {
  Matrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) layer_norm(x.row(r), gain, bias, out.row(r));
  return out;
}

float gelu(float x) {
  const double v = x;
  const double inner = std::sqrt(2.0 / std::numbers::pi) * (v + 0.044715 * v * v * v);
  return static_cast<float>(0.5 * v * (1.0 + std::tanh(inner)));
}

void add_inplace(Matrix& x, const Matrix& delta) {
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += delta.data[i];
}

std::uint64_t fnv1a(std::uint64_t hash, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    hash ^= (value >> (8 * i)) & 0xFF;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layers == 0 || n_heads == 0 || d_head == 0) {
    throw Error(ErrorKind::Config, "n_layers, n_heads and d_head must be positive");
  }
  if (d_model != n_heads * d_head) {
    throw Error(ErrorKind::Config, "d_model " + std::to_string(d_model) + " != n_heads " +
                                       std::to_string(n_heads) + " x d_head " +
                                       std::to_string(d_head));
  }
  if (vocab_size != kByteVocabSize) {
    throw Error(ErrorKind::Config,
                "vocab_size must be " + std::to_string(kByteVocabSize) + " for byte tokens");
  }
  if (max_context < 1) throw Error(ErrorKind::Config, "max_context must be at least 1");
}

std::uint64_t fingerprint(const ModelConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint64_t field : {std::uint64_t{c.n_layers}, std::uint64_t{c.n_heads},
                              std::uint64_t{c.d_model}, std::uint64_t{c.d_head},
                              std::uint64_t{c.vocab_size}, std::uint64_t{c.max_context},
                              c.seed}) {
    h = fnv1a(h, field);
  }
  return h;
}

// ---------------------------------------------------------------------------
// KvCache

KvCache::KvCache(std::size_t n_layers, std::size_t n_heads, std::size_t d_head)
    : n_layers_(n_layers),
      n_heads_(n_heads),
      d_head_(d_head),
      keys_(n_layers * n_heads),
      values_(n_layers * n_heads) {}

void KvCache::append(std::size_t layer, std::size_t head, std::span<const float> key,
                     std::span<const float> value) {
  auto& k = keys_[layer * n_heads_ + head];
  auto& v = values_[layer * n_heads_ + head];
  k.insert(k.end(), key.begin(), key.end());
  v.insert(v.end(), value.begin(), value.end());
}

void KvCache::commit(std::size_t positions) { seq_len_ += positions; }

void KvCache::truncate(std::size_t len) {
  if (len >= seq_len_) return;
  for (auto& k : keys_) k.resize(len * d_head_);
  for (auto& v : values_) v.resize(len * d_head_);
  seq_len_ = len;
}

KvCache KvCache::from_tensors(std::size_t n_layers, std::size_t n_heads, std::size_t d_head,
                              std::size_t seq_len, std::vector<std::vector<float>> keys,
                              std::vector<std::vector<float>> values) {
  if (keys.size() != n_layers || values.size() != n_layers) {
    throw Error(ErrorKind::Shape, "expected " + std::to_string(n_layers) + " layers");
  }
  const std::size_t per_head = seq_len * d_head;
  KvCache cache(n_layers, n_heads, d_head);
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (keys[l].size() != n_heads * per_head || values[l].size() != n_heads * per_head) {
      throw Error(ErrorKind::Shape, "layer " + std::to_string(l) + " tensor size mismatch");
    }
    for (std::size_t h = 0; h < n_heads; ++h) {
      const auto first = static_cast<std::ptrdiff_t>(h * per_head);
      const auto last = static_cast<std::ptrdiff_t>((h + 1) * per_head);
      cache.keys_[l * n_heads + h].assign(keys[l].begin() + first, keys[l].begin() + last);
      cache.values_[l * n_heads + h].assign(values[l].begin() + first,
                                            values[l].begin() + last);
    }
  }
  cache.seq_len_ = seq_len;
  return cache;
}

bool KvCache::all_finite() const {
  for (const auto& k : keys_) {
    if (!kvr::all_finite(k)) return false;
  }
  for (const auto& v : values_) {
    if (!kvr::all_finite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Model

TokenId argmax(std::span<const float> logits) {
  TokenId best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = static_cast<TokenId>(i);
  }
  return best;
}

std::vector<float> positional_encoding(std::size_t position, std::size_t d_model) {
  std::vector<float> pe(d_model);
  for (std::size_t i = 0; i < d_model; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
    const double angle = static_cast<double>(position) * freq;
    pe[i] = static_cast<float>(std::sin(angle));
    if (i + 1 < d_model) pe[i + 1] = static_cast<float>(std::cos(angle));
  }
  return pe;
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  fingerprint_ = kvr::fingerprint(config_);

  const std::size_t d = config_.d_model;
  const std::size_t ff = 4 * d;
  const std::size_t vocab = config_.vocab_size;
  NormalSource rng(config_.seed);

  Matrix& embedding = weights_.token_embedding;
  embedding = Matrix(vocab, d);
  rng.fill(embedding.data, kInitStd);
  output_head_ = Matrix(d, vocab);
  for (std::size_t t = 0; t < vocab; ++t) {
    for (std::size_t j = 0; j < d; ++j) output_head_(j, t) = embedding(t, j);
  }

  weights_.layers.resize(config_.n_layers);
  for (LayerWeights& layer : weights_.layers) {
    layer.ln1_gain.assign(d, 1.0f);
    layer.ln1_bias.assign(d, 0.0f);
    layer.w_qkv = Matrix(d, 3 * d);
    rng.fill(layer.w_qkv.data, kInitStd);
    layer.b_qkv.assign(3 * d, 0.0f);
    layer.w_out = Matrix(d, d);
    rng.fill(layer.w_out.data, kInitStd);
    layer.b_out.assign(d, 0.0f);
    layer.ln2_gain.assign(d, 1.0f);
    layer.ln2_bias.assign(d, 0.0f);
    layer.w_fc = Matrix(d, ff);
    rng.fill(layer.w_fc.data, kInitStd);
    layer.b_fc.assign(ff, 0.0f);
    layer.w_proj = Matrix(ff, d);
    rng.fill(layer.w_proj.data, kInitStd);
    layer.b_proj.assign(d, 0.0f);
  }
  weights_.lnf_gain.assign(d, 1.0f);
  weights_.lnf_bias.assign(d, 0.0f);
}

KvCache Model::empty_cache() const {
  return KvCache(config_.n_layers, config_.n_heads, config_.d_head);
}

void Model::check_tokens(const TokenSeq& tokens) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= config_.vocab_size) {
      throw Error(ErrorKind::Shape, "token id " + std::to_string(tokens[i]) + " at index " +
                                        std::to_string(i) + " outside vocabulary");
    }
  }
}

Matrix Model::run(const TokenSeq& new_tokens, KvCache& cache) const {
  const std::size_t d = config_.d_model;
  const std::size_t n_heads = config_.n_heads;
  const std::size_t dk = config_.d_head;
  const std::size_t n = new_tokens.size();
  const std::size_t offset = cache.seq_len();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pe = positional_encoding(offset + i, d);
    const auto emb = weights_.token_embedding.row(new_tokens[i]);
    auto xr = x.row(i);
    for (std::size_t j = 0; j < d; ++j) xr[j] = emb[j] + kPositionScale * pe[j];
  }

  std::vector<float> scores;
  std::vector<double> mixed(dk);
  for (std::size_t l = 0; l < weights_.layers.size(); ++l) {
    const LayerWeights& layer = weights_.layers[l];
    const Matrix qkv = linear(layer_norm_rows(x, layer.ln1_gain, layer.ln1_bias), layer.w_qkv,
                              layer.b_qkv);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = qkv.row(i);
      for (std::size_t h = 0; h < n_heads; ++h) {
        cache.append(l, h, row.subspan(d + h * dk, dk), row.subspan(2 * d + h * dk, dk));
      }
    }

    Matrix attended(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t visible = offset + i + 1;  // causal: keys 0..offset+i
      const auto row = qkv.row(i);
      for (std::size_t h = 0; h < n_heads; ++h) {
        const auto q = row.subspan(h * dk, dk);
        const auto keys = cache.keys(l, h);
        const auto values = cache.values(l, h);
        scores.resize(visible);
        for (std::size_t p = 0; p < visible; ++p) {
          scores[p] = static_cast<float>(dot(q, keys.subspan(p * dk, dk)) * scale);
        }
        softmax_inplace(scores);
        std::fill(mixed.begin(), mixed.end(), 0.0);
        for (std::size_t p = 0; p < visible; ++p) {
          const double w = scores[p];
          const float* v = values.data() + p * dk;
          for (std::size_t j = 0; j < dk; ++j) mixed[j] += w * v[j];
        }
        auto out = attended.row(i).subspan(h * dk, dk);
        for (std::size_t j = 0; j < dk; ++j) out[j] = static_cast<float>(mixed[j]);
      }
    }
    add_inplace(x, linear(attended, layer.w_out, layer.b_out));

    Matrix hidden = linear(layer_norm_rows(x, layer.ln2_gain, layer.ln2_bias), layer.w_fc,
                           layer.b_fc);
    for (float& v : hidden.data) v = gelu(v);
    add_inplace(x, linear(hidden, layer.w_proj, layer.b_proj));
  }
  cache.commit(n);
  return layer_norm_rows(x, weights_.lnf_gain, weights_.lnf_bias);
}

std::vector<float> Model::head_logits(std::span<const float> hidden) const {
  const Matrix h(1, hidden.size(), std::vector<float>(hidden.begin(), hidden.end()));
  return linear(h, output_head_, {}).data;
}

StepOutput Model::forward_full(const TokenSeq& tokens, bool use_cache) const {
  if (tokens.empty()) throw Error(ErrorKind::EmptyStep, "forward_full needs at least one token");
  StepOutput out = forward_step(tokens, empty_cache());
  if (!use_cache) out.cache = empty_cache();
  return out;
}

StepOutput Model::forward_step(const TokenSeq& new_tokens, KvCache past) const {
  if (new_tokens.empty()) throw Error(ErrorKind::EmptyStep, "no new tokens to feed");
  if (past.n_layers() != config_.n_layers || past.n_heads() != config_.n_heads ||
      past.d_head() != config_.d_head) {
    throw Error(ErrorKind::Shape, "cache shape does not match the model");
  }
  const std::size_t total = past.seq_len() + new_tokens.size();
  if (total > config_.max_context) {
    throw Error(ErrorKind::ContextOverflow,
                "position " + std::to_string(total) + " exceeds max_context " +
                    std::to_string(config_.max_context));
  }
  check_tokens(new_tokens);
  const Matrix hidden = run(new_tokens, past);
  StepOutput out;
  out.logits = head_logits(hidden.row(hidden.rows - 1));
  out.cache = std::move(past);
  return out;
}

Matrix Model::forward_all_logits(const TokenSeq& tokens) const {
  if (tokens.empty()) throw Error(ErrorKind::EmptyStep, "forward needs at least one token");
  if (tokens.size() > config_.max_context) {
    throw Error(ErrorKind::ContextOverflow, "sequence of " + std::to_string(tokens.size()) +
                                                " tokens exceeds max_context " +
                                                std::to_string(config_.max_context));
  }
  check_tokens(tokens);
  KvCache cache = empty_cache();
  return linear(run(tokens, cache), output_head_, {});
}

GenerateResult Model::generate(const TokenSeq& input_ids, std::optional<KvCache> past,
                               std::size_t max_new_tokens) const {
  KvCache cache = past ? std::move(*past) : empty_cache();
  const std::size_t prompt_end = cache.seq_len() + input_ids.size();
  if (prompt_end + max_new_tokens > config_.max_context) {
    throw Error(ErrorKind::ContextOverflow,
                "prompt reaches position " + std::to_string(prompt_end) + " and " +
                    std::to_string(max_new_tokens) + " new tokens exceed max_context " +
                    std::to_string(config_.max_context));
  }

  GenerateResult result;
  const auto start = std::chrono::steady_clock::now();
  if (max_new_tokens > 0) {
    StepOutput step = forward_step(input_ids, std::move(cache));
    TokenId next = argmax(step.logits);
    result.tokens.push_back(next);
    while (result.tokens.size() < max_new_tokens) {
      step = forward_step(TokenSeq{next}, std::move(step.cache));
      next = argmax(step.logits);
      result.tokens.push_back(next);
    }
    cache = std::move(step.cache);
  }
  const auto stop = std::chrono::steady_clock::now();
  result.latency_s = std::chrono::duration<double>(stop - start).count();
  result.cache = std::move(cache);
  return result;
}

std::vector<float> Model::embed_prompt(const TokenSeq& tokens) const {
  if (tokens.empty()) {
    throw Error(ErrorKind::DegenerateEmbedding, "cannot embed an empty prompt");
  }
  if (tokens.size() > config_.max_context) {
    throw Error(ErrorKind::ContextOverflow, "prompt of " + std::to_string(tokens.size()) +
                                                " tokens exceeds max_context " +
                                                std::to_string(config_.max_context));
  }
  check_tokens(tokens);
  KvCache scratch = empty_cache();
  const Matrix hidden = run(tokens, scratch);
  std::vector<double> mean(hidden.cols, 0.0);
  for (std::size_t r = 0; r < hidden.rows; ++r) {
    const auto row = hidden.row(r);
    for (std::size_t j = 0; j < hidden.cols; ++j) mean[j] += row[j];
  }
  std::vector<float> pooled(hidden.cols);
  for (std::size_t j = 0; j < hidden.cols; ++j) {
    pooled[j] = static_cast<float>(mean[j] / static_cast<double>(hidden.rows));
  }
  return l2_normalize(pooled);
}

}  // namespace kvr
