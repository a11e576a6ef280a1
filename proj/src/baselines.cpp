#include "actioncodec/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace actioncodec {

// ---------------------------------------------------------------------------
// Binning

int bin_index(double value, int bins) {
  const double u = (std::clamp(value, -1.0, 1.0) + 1.0) * 0.5;
  return std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
}

double bin_center(int bin, int bins) { return -1.0 + (static_cast<double>(bin) + 0.5) * 2.0 / bins; }

BinningTokenizer::BinningTokenizer(BinningConfig cfg) : cfg_(cfg) {
  if (cfg_.bins_per_dim < 2) throw std::invalid_argument("bins_per_dim must be >= 2");
  if (cfg_.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
}

TokenSequence BinningTokenizer::encode(const ActionChunk& chunk) const {
  TokenSequence t;
  t.embodiment_index = chunk.embodiment_index;
  auto& row = t.codes.emplace_back();
  row.reserve(static_cast<std::size_t>(chunk.actions.size()));
  for (Eigen::Index r = 0; r < chunk.actions.rows(); ++r)
    for (Eigen::Index c = 0; c < chunk.actions.cols(); ++c) row.push_back(bin_index(chunk.actions(r, c), cfg_.bins_per_dim));
  return t;
}

ActionChunk BinningTokenizer::decode(const TokenSequence& tokens, const EmbodimentSpec& target) const {
  if (tokens.levels() != 1) throw std::invalid_argument("binning expects one token level");
  const auto& row = tokens.codes.front();
  const int D = target.action_dim;
  if (row.size() % static_cast<std::size_t>(D) != 0) throw std::invalid_argument("token count not divisible by action_dim");
  const int steps = static_cast<int>(row.size()) / D;
  ActionChunk c;
  c.actions.resize(steps, D);
  for (int i = 0; i < steps * D; ++i) {
    if (row[i] < 0 || row[i] >= cfg_.bins_per_dim) throw std::out_of_range("bin index out of range");
    c.actions(i / D, i % D) = bin_center(row[i], cfg_.bins_per_dim);
  }
  c.timestamps = chunk_timestamps(steps, target.control_hz);
  c.embodiment_index = target.index;
  return c;
}

// ---------------------------------------------------------------------------
// Strings

std::string render_action_string(const Matrix& actions, int precision) {
  std::string out = "[";
  char buf[64];
  for (Eigen::Index r = 0; r < actions.rows(); ++r) {
    if (r) out += ", ";
    out += '[';
    for (Eigen::Index c = 0; c < actions.cols(); ++c) {
      if (c) out += ", ";
      std::snprintf(buf, sizeof(buf), "%.*f", precision, actions(r, c));
      out += buf;
    }
    out += ']';
  }
  out += ']';
  return out;
}

namespace {

class ActionStringParser {
 public:
  explicit ActionStringParser(const std::string& text) : s_(text) {}

  Matrix parse() {
    std::vector<std::vector<double>> rows;
    expect('[');
    if (peek() == ']') fail();
    do {
      rows.push_back(parse_row());
    } while (separator());
    expect(']');
    if (pos_ != s_.size()) fail();
    const std::size_t cols = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != cols) fail();
      for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
  }

 private:
  [[noreturn]] static void fail() { throw std::invalid_argument("invalid action string"); }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail();
    ++pos_;
  }

  bool separator() {
    if (peek() != ',') return false;
    ++pos_;
    while (peek() == ' ') ++pos_;
    return true;
  }

  std::vector<double> parse_row() {
    std::vector<double> row;
    expect('[');
    do {
      row.push_back(parse_number());
    } while (separator());
    expect(']');
    return row;
  }

  double parse_number() {
    const std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    const std::size_t digits = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (pos_ == digits) fail();
    if (peek() == '.') {
      ++pos_;
      const std::size_t frac = pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      if (pos_ == frac) fail();
    }
    double v = 0.0;
    const auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc{} || res.ptr != s_.data() + pos_) fail();
    return v;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

Matrix parse_action_string(const std::string& text) { return ActionStringParser(text).parse(); }

StringTokenizer::StringTokenizer(StringConfig cfg) : cfg_(cfg) {
  if (cfg_.precision < 1 || cfg_.precision > 6) throw std::invalid_argument("precision must be in [1, 6]");
  if (cfg_.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
}

TokenSequence StringTokenizer::encode(const ActionChunk& chunk) const {
  const std::string text = render_action_string(chunk.actions, cfg_.precision);
  TokenSequence t;
  t.embodiment_index = chunk.embodiment_index;
  auto& row = t.codes.emplace_back();
  row.reserve(text.size());
  for (char ch : text) {
    const auto pos = kAlphabet.find(ch);
    if (pos == std::string_view::npos) throw std::invalid_argument("unrenderable action value");
    row.push_back(static_cast<std::int32_t>(pos));
  }
  return t;
}

ActionChunk StringTokenizer::decode(const TokenSequence& tokens, const EmbodimentSpec& target) const {
  if (tokens.levels() != 1) throw std::invalid_argument("invalid action string");
  std::string text;
  for (auto id : tokens.codes.front()) {
    if (id < 0 || id >= static_cast<std::int32_t>(kAlphabet.size())) throw std::invalid_argument("invalid action string");
    text += kAlphabet[static_cast<std::size_t>(id)];
  }
  ActionChunk c;
  c.actions = parse_action_string(text);
  if (c.actions.cols() != target.action_dim) throw std::invalid_argument("invalid action string");
  c.timestamps = chunk_timestamps(static_cast<int>(c.actions.rows()), target.control_hz);
  c.embodiment_index = target.index;
  return c;
}

// ---------------------------------------------------------------------------
// DCT + BPE

std::vector<double> dct_ii(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(std::numbers::pi / static_cast<double>(n) * (static_cast<double>(i) + 0.5) * static_cast<double>(k));
    out[k] = (k == 0 ? s0 : sk) * acc;
  }
  return out;
}

std::vector<double> dct_iii(std::span<const double> X) {
  const std::size_t n = X.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      acc += (k == 0 ? s0 : sk) * X[k] *
             std::cos(std::numbers::pi / static_cast<double>(n) * (static_cast<double>(i) + 0.5) * static_cast<double>(k));
    out[i] = acc;
  }
  return out;
}

nlohmann::json merges_to_json(const DctBpeConfig& cfg) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [a, b] : cfg.merges) list.push_back({a, b});
  return list;
}

void merges_from_json(DctBpeConfig& cfg, const nlohmann::json& j) {
  cfg.merges.clear();
  const std::int32_t base = cfg.base_vocab();
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2) throw std::invalid_argument("merge entries must be integer pairs");
    const auto a = pair[0].get<std::int32_t>();
    const auto b = pair[1].get<std::int32_t>();
    const auto next = base + static_cast<std::int32_t>(cfg.merges.size());
    if (a < 0 || b < 0 || a >= next || b >= next) throw std::invalid_argument("merge references an unknown id");
    cfg.merges.emplace_back(a, b);
  }
}

namespace {

int kept_coefficients(const DctBpeConfig& cfg, int steps) {
  return cfg.dct_keep <= 0 ? steps : std::min(cfg.dct_keep, steps);
}

std::uint64_t pair_key(std::int32_t a, std::int32_t b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

void merge_pair(std::vector<std::int32_t>& seq, std::int32_t a, std::int32_t b, std::int32_t id) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < seq.size();) {
    if (r + 1 < seq.size() && seq[r] == a && seq[r + 1] == b) {
      seq[w++] = id;
      r += 2;
    } else {
      seq[w++] = seq[r++];
    }
  }
  seq.resize(w);
}

}  // namespace

std::vector<std::int32_t> dct_quantize(const ActionChunk& chunk, const DctBpeConfig& cfg) {
  const int T = chunk.steps();
  const int D = chunk.dim();
  const int keep = kept_coefficients(cfg, T);
  const std::int32_t half = cfg.zero_symbol();
  std::vector<std::vector<double>> coef(static_cast<std::size_t>(D));
  std::vector<double> column(static_cast<std::size_t>(T));
  for (int d = 0; d < D; ++d) {
    for (int t = 0; t < T; ++t) column[t] = chunk.actions(t, d);
    coef[d] = dct_ii(column);
  }
  std::vector<std::int32_t> stream;
  stream.reserve(static_cast<std::size_t>(keep * D));
  for (int k = 0; k < keep; ++k) {
    for (int d = 0; d < D; ++d) {
      const auto q = static_cast<std::int64_t>(std::llround(coef[d][k] * cfg.quant_scale));
      stream.push_back(static_cast<std::int32_t>(std::clamp<std::int64_t>(q, -half, half - 1)) + half);
    }
  }
  return stream;
}

ActionChunk dct_dequantize(std::span<const std::int32_t> stream, const DctBpeConfig& cfg, const EmbodimentSpec& target,
                           int steps) {
  const int D = target.action_dim;
  const int keep = kept_coefficients(cfg, steps);
  const std::int32_t half = cfg.zero_symbol();
  const auto expected = static_cast<std::size_t>(keep * D);
  std::vector<std::int32_t> fixed(stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(std::min(stream.size(), expected)));
  fixed.resize(expected, half);

  ActionChunk c;
  c.actions.resize(steps, D);
  std::vector<double> coef(static_cast<std::size_t>(steps));
  for (int d = 0; d < D; ++d) {
    std::fill(coef.begin(), coef.end(), 0.0);
    for (int k = 0; k < keep; ++k) {
      const std::int32_t s = fixed[static_cast<std::size_t>(k * D + d)];
      if (s < 0 || s >= cfg.base_vocab()) throw std::out_of_range("base symbol out of range");
      coef[k] = static_cast<double>(s - half) / cfg.quant_scale;
    }
    const auto x = dct_iii(coef);
    for (int t = 0; t < steps; ++t) c.actions(t, d) = x[t];
  }
  c.timestamps = chunk_timestamps(steps, target.control_hz);
  c.embodiment_index = target.index;
  return c;
}

std::vector<std::int32_t> bpe_encode(std::span<const std::int32_t> symbols, const DctBpeConfig& cfg) {
  std::unordered_map<std::uint64_t, std::int32_t> rank;
  rank.reserve(cfg.merges.size() * 2);
  for (std::size_t i = 0; i < cfg.merges.size(); ++i)
    rank.emplace(pair_key(cfg.merges[i].first, cfg.merges[i].second), static_cast<std::int32_t>(i));

  std::vector<std::int32_t> seq(symbols.begin(), symbols.end());
  while (seq.size() > 1) {
    std::int32_t best = -1;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const auto it = rank.find(pair_key(seq[i], seq[i + 1]));
      if (it != rank.end() && (best < 0 || it->second < best)) best = it->second;
    }
    if (best < 0) break;
    const auto& [a, b] = cfg.merges[static_cast<std::size_t>(best)];
    merge_pair(seq, a, b, cfg.base_vocab() + best);
  }
  return seq;
}

std::vector<std::int32_t> bpe_decode(std::span<const std::int32_t> tokens, const DctBpeConfig& cfg) {
  const std::int32_t base = cfg.base_vocab();
  const auto limit = base + static_cast<std::int32_t>(cfg.merges.size());
  std::vector<std::int32_t> out;
  std::vector<std::int32_t> stack;
  for (auto tok : tokens) {
    if (tok < 0 || tok >= limit) throw std::out_of_range("token id outside the fitted vocabulary");
    stack.push_back(tok);
    while (!stack.empty()) {
      const auto t = stack.back();
      stack.pop_back();
      if (t < base) {
        out.push_back(t);
      } else {
        const auto& [a, b] = cfg.merges[static_cast<std::size_t>(t - base)];
        stack.push_back(b);
        stack.push_back(a);
      }
    }
  }
  return out;
}

DctBpeConfig dct_bpe_fit(std::span<const ActionChunk> corpus, DctBpeConfig cfg) {
  if (corpus.size() < cfg.min_corpus)
    throw std::invalid_argument("BPE fitting needs at least " + std::to_string(cfg.min_corpus) + " chunks");
  if (cfg.base_bits < 2 || cfg.base_bits > 20) throw std::invalid_argument("base_bits out of range");
  if (!(cfg.quant_scale > 0.0)) throw std::invalid_argument("quant_scale must be positive");
  if (cfg.bpe_vocab < cfg.base_vocab()) throw std::invalid_argument("bpe_vocab smaller than the base alphabet");
  cfg.merges.clear();

  std::vector<std::vector<std::int32_t>> seqs;
  seqs.reserve(corpus.size());
  for (const auto& c : corpus) seqs.push_back(dct_quantize(c, cfg));

  std::unordered_map<std::uint64_t, std::int64_t> counts;
  while (cfg.base_vocab() + static_cast<std::int32_t>(cfg.merges.size()) < cfg.bpe_vocab) {
    counts.clear();
    for (const auto& s : seqs)
      for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[pair_key(s[i], s[i + 1])];
    std::uint64_t best_key = 0;
    std::int64_t best_count = 0;
    for (const auto& [key, count] : counts) {
      if (count > best_count || (count == best_count && key < best_key)) {
        best_key = key;
        best_count = count;
      }
    }
    if (best_count < 2) break;
    const auto a = static_cast<std::int32_t>(best_key >> 32);
    const auto b = static_cast<std::int32_t>(best_key & 0xffffffffULL);
    const auto id = cfg.base_vocab() + static_cast<std::int32_t>(cfg.merges.size());
    cfg.merges.emplace_back(a, b);
    for (auto& s : seqs) merge_pair(s, a, b, id);
  }
  return cfg;
}

DctBpeTokenizer::DctBpeTokenizer(DctBpeConfig fitted) : cfg_(std::move(fitted)) {}

std::int64_t DctBpeTokenizer::vocab_size() const {
  return static_cast<std::int64_t>(cfg_.base_vocab()) + static_cast<std::int64_t>(cfg_.merges.size());
}

TokenSequence DctBpeTokenizer::encode(const ActionChunk& chunk) const {
  TokenSequence t;
  t.embodiment_index = chunk.embodiment_index;
  t.codes.push_back(bpe_encode(dct_quantize(chunk, cfg_), cfg_));
  return t;
}

ActionChunk DctBpeTokenizer::decode(const TokenSequence& tokens, const EmbodimentSpec& target) const {
  if (tokens.levels() != 1) throw std::invalid_argument("dct_bpe expects one token level");
  const auto stream = bpe_decode(tokens.codes.front(), cfg_);
  return dct_dequantize(stream, cfg_, target, target.chunk_steps());
}

}  // namespace actioncodec
