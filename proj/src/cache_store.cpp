#include "kvrecycle/cache_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "kvrecycle/error.hpp"
#include "kvrecycle/io.hpp"

namespace kvr {

namespace {

class Writer {
 public:
  void bytes(std::string_view b) { out_.append(b); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32s(std::span<const float> values) {
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::uint64_t n, std::string_view what) const {
    if (n > remaining()) {
      throw Error(ErrorKind::CorruptCache,
                  "truncated file: " + std::string(what) + " needs " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ", " +
                      std::to_string(remaining()) + " left");
    }
  }
  std::string_view bytes(std::size_t n, std::string_view what) {
    need(n, what);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32(std::string_view what) {
    auto b = bytes(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(b[i])} << (8 * i);
    return v;
  }
  std::uint64_t u64(std::string_view what) {
    auto b = bytes(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(b[i])} << (8 * i);
    return v;
  }
  std::vector<float> f32s(std::size_t count, std::string_view what) {
    auto b = bytes(count * 4, what);
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int k = 0; k < 4; ++k) {
        v |= std::uint32_t{static_cast<unsigned char>(b[i * 4 + k])} << (8 * k);
      }
      out[i] = std::bit_cast<float>(v);
    }
    return out;
  }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorKind::CorruptCache, what); }

std::uint32_t checked_u32(std::size_t v, std::string_view what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorKind::Shape, std::string(what) + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void CacheStore::add(CacheEntry entry) {
  if (entry.kv.seq_len() != entry.input_ids.size()) {
    throw Error(ErrorKind::Shape, "entry kv holds " + std::to_string(entry.kv.seq_len()) +
                                      " positions for " + std::to_string(entry.input_ids.size()) +
                                      " tokens");
  }
  if (tokenize(entry.prompt_text) != entry.input_ids) {
    throw Error(ErrorKind::Shape, "entry token ids do not match its prompt text");
  }
  if (std::abs(std::sqrt(dot(entry.embedding, entry.embedding)) - 1.0) > 1e-6) {
    throw Error(ErrorKind::DegenerateEmbedding, "entry embedding is not unit length");
  }
  if (embeddings_.cols == 0 && entries_.empty()) embeddings_.cols = entry.embedding.size();
  if (entry.embedding.size() != embeddings_.cols) {
    throw Error(ErrorKind::Shape, "embedding of length " + std::to_string(entry.embedding.size()) +
                                      " in a store of width " + std::to_string(embeddings_.cols));
  }
  if (!entries_.empty()) {
    const KvCache& first = entries_.front().kv;
    if (entry.kv.n_layers() != first.n_layers() || entry.kv.n_heads() != first.n_heads() ||
        entry.kv.d_head() != first.d_head()) {
      throw Error(ErrorKind::Shape, "entry kv shape differs from the rest of the store");
    }
  }
  embeddings_.data.insert(embeddings_.data.end(), entry.embedding.begin(),
                          entry.embedding.end());
  embeddings_.rows += 1;
  entries_.push_back(std::move(entry));
}

CacheStore build_cache(const Model& model, const std::vector<std::string>& prompts) {
  if (prompts.empty()) throw Error(ErrorKind::EmptyCache, "no prompts to cache");
  CacheStore store(model.fingerprint(), model.config().d_model);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    TokenSeq ids = tokenize(prompts[i]);
    if (ids.empty()) throw Error(ErrorKind::EmptyStep, "prompt " + std::to_string(i) + " is empty");
    if (ids.size() > model.config().max_context) {
      throw Error(ErrorKind::ContextOverflow,
                  "prompt " + std::to_string(i) + " has " + std::to_string(ids.size()) +
                      " tokens, max_context is " + std::to_string(model.config().max_context));
    }
    StepOutput out = model.forward_full(ids, true);
    CacheEntry entry{prompts[i], ids, std::move(out.cache), model.embed_prompt(ids)};
    store.add(std::move(entry));
  }
  return store;
}

std::string serialize_store(const CacheStore& store) {
  Writer w;
  w.bytes(std::string_view(kCacheMagic, 4));
  w.u32(kCacheFormatVersion);
  w.u64(store.model_fingerprint());
  w.u32(checked_u32(store.size(), "entry count"));
  for (const CacheEntry& e : store.entries()) {
    w.u32(checked_u32(e.prompt_text.size(), "prompt length"));
    w.bytes(e.prompt_text);
    w.u32(checked_u32(e.input_ids.size(), "token count"));
    for (TokenId t : e.input_ids) w.u32(t);
    const KvCache& kv = e.kv;
    w.u32(checked_u32(kv.n_layers(), "layer count"));
    w.u32(checked_u32(kv.n_heads(), "head count"));
    w.u32(checked_u32(kv.d_head(), "d_head"));
    w.u32(checked_u32(kv.seq_len(), "seq_len"));
    for (std::size_t l = 0; l < kv.n_layers(); ++l) {
      for (std::size_t h = 0; h < kv.n_heads(); ++h) w.f32s(kv.keys(l, h));
    }
    for (std::size_t l = 0; l < kv.n_layers(); ++l) {
      for (std::size_t h = 0; h < kv.n_heads(); ++h) w.f32s(kv.values(l, h));
    }
    w.u32(checked_u32(e.embedding.size(), "d_model"));
    w.f32s(e.embedding);
  }
  return w.take();
}

CacheStore deserialize_store(std::string_view bytes, std::uint64_t expected_fingerprint) {
  Reader r(bytes);
  const auto magic = r.bytes(4, "magic");
  if (magic != std::string_view(kCacheMagic, 4)) corrupt("bad magic, not a KVRC cache file");
  const std::uint32_t version = r.u32("format version");
  if (version != kCacheFormatVersion) {
    corrupt("file format version " + std::to_string(version) + " but this reader supports version " +
            std::to_string(kCacheFormatVersion));
  }
  const std::uint64_t fp = r.u64("fingerprint");
  if (fp != expected_fingerprint) {
    throw Error(ErrorKind::StaleCache, "cache was built by a model with fingerprint " +
                                           std::to_string(fp) + ", running model is " +
                                           std::to_string(expected_fingerprint));
  }
  const std::uint32_t count = r.u32("entry count");

  CacheStore store(fp);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string ctx = "entry " + std::to_string(i) + " ";
    CacheEntry e;
    const std::uint32_t prompt_len = r.u32(ctx + "prompt length");
    e.prompt_text = std::string(r.bytes(prompt_len, ctx + "prompt"));
    const std::uint32_t n_tokens = r.u32(ctx + "token count");
    r.need(std::uint64_t{n_tokens} * 4, ctx + "token ids");
    e.input_ids.reserve(n_tokens);
    for (std::uint32_t t = 0; t < n_tokens; ++t) {
      const std::uint32_t id = r.u32(ctx + "token id");
      if (id >= kByteVocabSize) corrupt(ctx + "token id " + std::to_string(id) + " out of range");
      e.input_ids.push_back(id);
    }
    const std::uint32_t n_layers = r.u32(ctx + "layer count");
    const std::uint32_t n_heads = r.u32(ctx + "head count");
    const std::uint32_t d_head = r.u32(ctx + "d_head");
    const std::uint32_t seq_len = r.u32(ctx + "seq_len");
    if (seq_len != n_tokens) {
      corrupt(ctx + "seq_len " + std::to_string(seq_len) + " != token count " +
              std::to_string(n_tokens));
    }
    // Validate the full tensor payload against the bytes left before reading.
    const std::uint64_t per_layer = std::uint64_t{n_heads} * seq_len * d_head;
    const unsigned __int128 tensor_bytes =
        static_cast<unsigned __int128>(per_layer) * n_layers * 2 * 4;
    if (tensor_bytes > r.remaining()) {
      corrupt("truncated file: " + ctx + "tensors need more bytes than remain");
    }
    std::vector<std::vector<float>> keys(n_layers), values(n_layers);
    for (auto& k : keys) k = r.f32s(static_cast<std::size_t>(per_layer), ctx + "keys");
    for (auto& v : values) v = r.f32s(static_cast<std::size_t>(per_layer), ctx + "values");
    e.kv = KvCache::from_tensors(n_layers, n_heads, d_head, seq_len, std::move(keys),
                                 std::move(values));
    const std::uint32_t d_model = r.u32(ctx + "d_model");
    r.need(std::uint64_t{d_model} * 4, ctx + "embedding");
    e.embedding = r.f32s(d_model, ctx + "embedding");
    try {
      store.add(std::move(e));
    } catch (const Error& err) {
      corrupt(ctx + "is inconsistent: " + err.detail());
    }
  }
  if (r.remaining() != 0) corrupt(std::to_string(r.remaining()) + " trailing bytes after entries");
  return store;
}

void save_store(const CacheStore& store, const std::filesystem::path& path) {
  atomic_write_file(path, serialize_store(store), true);
}

CacheStore load_store(const std::filesystem::path& path, std::uint64_t expected_fingerprint) {
  const std::string bytes = read_file(path);
  try {
    return deserialize_store(bytes, expected_fingerprint);
  } catch (const Error& err) {
    throw Error(err.kind(), path.string() + ": " + err.detail());
  }
}

RetrievalHit retrieve(const CacheStore& store, std::span<const float> query) {
  if (store.empty()) throw Error(ErrorKind::EmptyCache, "cannot retrieve from an empty store");
  const Matrix& e = store.embeddings();
  if (query.size() != e.cols) {
    throw Error(ErrorKind::Shape, "query of length " + std::to_string(query.size()) +
                                      " against embeddings " + e.shape());
  }
  RetrievalHit best{0, dot(e.row(0), query)};
  for (std::size_t i = 1; i < e.rows; ++i) {
    const double s = dot(e.row(i), query);
    if (s > best.score) best = {i, s};
  }
  return best;
}

}  // namespace kvr
