#pragma once

#include "actioncodec/data.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace actioncodec {

// Discrete codes for one chunk: levels x n. Single-level tokenizers use one row;
// variable-length tokenizers may emit rows of any length.
struct TokenSequence {
  std::vector<std::vector<std::int32_t>> codes;
  int embodiment_index = 0;

  int levels() const { return static_cast<int>(codes.size()); }
  std::size_t length() const { return codes.empty() ? 0 : codes.front().size(); }
  std::vector<std::int32_t> flatten() const;
  bool operator==(const TokenSequence&) const = default;
};

// Common surface shared by ActionCodec and the baselines so every metric and
// harness treats them the same way.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::string name() const = 0;
  virtual std::int64_t vocab_size() const = 0;
  virtual std::optional<std::size_t> fixed_length() const { return std::nullopt; }
  // Chunk length this tokenizer consumes for the given embodiment.
  virtual int horizon_steps(const EmbodimentSpec& spec) const { return spec.chunk_steps(); }

  virtual TokenSequence encode(const ActionChunk& chunk) const = 0;
  virtual std::vector<TokenSequence> encode_batch(std::span<const ActionChunk> chunks) const;

  // Throws on streams it cannot interpret.
  virtual ActionChunk decode(const TokenSequence& tokens, const EmbodimentSpec& target) const = 0;
  virtual std::vector<ActionChunk> decode_batch(std::span<const TokenSequence> tokens,
                                                const EmbodimentSpec& target) const;
};

// "embodiment_index levels c00 c01 ... c(L-1)(n-1)"
std::string serialize_tokens(const TokenSequence& tokens);
TokenSequence parse_tokens(const std::string& line);

void write_token_stream(const std::filesystem::path& path, std::span<const TokenSequence> seqs);
std::vector<TokenSequence> read_token_stream(const std::filesystem::path& path);

ActionChunk zero_chunk(const EmbodimentSpec& spec, int steps);

}  // namespace actioncodec
