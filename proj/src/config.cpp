#include "kvrecycle/config.hpp"

#include <charconv>
#include <limits>

#include "kvrecycle/error.hpp"
#include "kvrecycle/io.hpp"

namespace kvr {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_uint(std::string_view value, std::size_t line, std::string_view key) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() ||
      v > std::numeric_limits<T>::max()) {
    throw Error(ErrorKind::Config, "line " + std::to_string(line) + ": '" + std::string(key) +
                                       "' needs a non-negative integer, got '" +
                                       std::string(value) + "'");
  }
  return static_cast<T>(v);
}

}  // namespace

HarnessConfig parse_config(std::string_view text, HarnessConfig cfg) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto u32 = [&] { return parse_uint<std::uint32_t>(value, line_no, key); };
    const auto count = [&] { return parse_uint<std::size_t>(value, line_no, key); };

    if (key == "n_layers") cfg.model.n_layers = u32();
    else if (key == "n_heads") cfg.model.n_heads = u32();
    else if (key == "d_model") cfg.model.d_model = u32();
    else if (key == "d_head") cfg.model.d_head = u32();
    else if (key == "max_context") cfg.model.max_context = u32();
    else if (key == "seed") cfg.model.seed = parse_uint<std::uint64_t>(value, line_no, key);
    else if (key == "max_new_tokens") cfg.bench.max_new_tokens = count();
    else if (key == "warmup") cfg.bench.warmup = count();
    else if (key == "repeats") cfg.bench.repeats = count();
    else if (key == "cache_prompts") cfg.cache_prompts = std::string(value);
    else if (key == "test_prompts") cfg.test_prompts = std::string(value);
    else if (key == "cache_file") cfg.cache_file = std::string(value);
    else if (key == "results_dir") cfg.results_dir = std::string(value);
    else {
      throw Error(ErrorKind::Config,
                  "line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (cfg.bench.repeats == 0) throw Error(ErrorKind::Config, "repeats must be at least 1");
  cfg.model.validate();
  return cfg;
}

HarnessConfig load_config(const std::filesystem::path& path, HarnessConfig base) {
  const std::string text = read_file(path);
  try {
    return parse_config(text, std::move(base));
  } catch (const Error& err) {
    throw Error(err.kind(), path.string() + ": " + err.detail());
  }
}

}  // namespace kvr
