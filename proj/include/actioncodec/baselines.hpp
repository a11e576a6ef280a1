#pragma once

#include "actioncodec/tokenizer.hpp"

#include "json.hpp"

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace actioncodec {

// ---------------------------------------------------------------------------
// Uniform binning: one token per (step, dim), time-major.

struct BinningConfig {
  int bins_per_dim = 1000;
  int horizon = 8;
};

int bin_index(double value, int bins);
double bin_center(int bin, int bins);

class BinningTokenizer final : public Tokenizer {
 public:
  explicit BinningTokenizer(BinningConfig cfg = {});

  std::string name() const override { return "binning"; }
  std::int64_t vocab_size() const override { return cfg_.bins_per_dim; }
  int horizon_steps(const EmbodimentSpec&) const override { return cfg_.horizon; }
  TokenSequence encode(const ActionChunk& chunk) const override;
  ActionChunk decode(const TokenSequence& tokens, const EmbodimentSpec& target) const override;

  const BinningConfig& config() const { return cfg_; }

 private:
  BinningConfig cfg_;
};

// ---------------------------------------------------------------------------
// Decimal strings, one token per character.

struct StringConfig {
  int precision = 3;
  int horizon = 8;
};

// "[[0.123, -0.500], [...]]"
std::string render_action_string(const Matrix& actions, int precision);
// Throws "invalid action string" on malformed text or ragged rows.
Matrix parse_action_string(const std::string& text);

class StringTokenizer final : public Tokenizer {
 public:
  static constexpr std::string_view kAlphabet = "0123456789.-[], ";

  explicit StringTokenizer(StringConfig cfg = {});

  std::string name() const override { return "string"; }
  std::int64_t vocab_size() const override { return static_cast<std::int64_t>(kAlphabet.size()); }
  int horizon_steps(const EmbodimentSpec&) const override { return cfg_.horizon; }
  TokenSequence encode(const ActionChunk& chunk) const override;
  ActionChunk decode(const TokenSequence& tokens, const EmbodimentSpec& target) const override;

 private:
  StringConfig cfg_;
};

// ---------------------------------------------------------------------------
// Frequency-domain stand-in for FAST: orthonormal DCT-II per dimension,
// scalar quantization, then byte-pair merges over the integer stream.

std::vector<double> dct_ii(std::span<const double> signal);
std::vector<double> dct_iii(std::span<const double> coefficients);  // inverse of dct_ii

struct DctBpeConfig {
  int dct_keep = 0;           // 0 keeps all T coefficients
  double quant_scale = 10.0;  // coefficient multiplier before rounding
  int base_bits = 10;         // quantized integers clamp to [-2^(bits-1), 2^(bits-1))
  int bpe_vocab = 2048;
  std::size_t min_corpus = 1000;
  std::vector<std::pair<std::int32_t, std::int32_t>> merges;

  std::int32_t base_vocab() const { return std::int32_t{1} << base_bits; }
  std::int32_t zero_symbol() const { return base_vocab() / 2; }
};

nlohmann::json merges_to_json(const DctBpeConfig& cfg);
void merges_from_json(DctBpeConfig& cfg, const nlohmann::json& j);

// Integer stream (base symbols) for one chunk: frequency-major, dims interleaved.
std::vector<std::int32_t> dct_quantize(const ActionChunk& chunk, const DctBpeConfig& cfg);
// Inverse of dct_quantize; streams of the wrong length are zero-padded or truncated.
ActionChunk dct_dequantize(std::span<const std::int32_t> stream, const DctBpeConfig& cfg, const EmbodimentSpec& target,
                           int steps);

std::vector<std::int32_t> bpe_encode(std::span<const std::int32_t> symbols, const DctBpeConfig& cfg);
// Throws on ids outside the fitted vocabulary.
std::vector<std::int32_t> bpe_decode(std::span<const std::int32_t> tokens, const DctBpeConfig& cfg);

// Learns merges on the corpus (most frequent adjacent pair first, ties to the
// smallest pair) until bpe_vocab ids exist or no pair repeats.
DctBpeConfig dct_bpe_fit(std::span<const ActionChunk> corpus, DctBpeConfig cfg);

class DctBpeTokenizer final : public Tokenizer {
 public:
  explicit DctBpeTokenizer(DctBpeConfig fitted);

  std::string name() const override { return "dct_bpe"; }
  std::int64_t vocab_size() const override;
  TokenSequence encode(const ActionChunk& chunk) const override;
  ActionChunk decode(const TokenSequence& tokens, const EmbodimentSpec& target) const override;

  const DctBpeConfig& config() const { return cfg_; }

 private:
  DctBpeConfig cfg_;
};

}  // namespace actioncodec
