#include "actioncodec/tokenizer.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace actioncodec {

std::vector<std::int32_t> TokenSequence::flatten() const {
  std::vector<std::int32_t> out;
  for (const auto& row : codes) out.insert(out.end(), row.begin(), row.end());
  return out;
}

std::vector<TokenSequence> Tokenizer::encode_batch(std::span<const ActionChunk> chunks) const {
  std::vector<TokenSequence> out;
  out.reserve(chunks.size());
  for (const auto& c : chunks) out.push_back(encode(c));
  return out;
}

std::vector<ActionChunk> Tokenizer::decode_batch(std::span<const TokenSequence> tokens,
                                                 const EmbodimentSpec& target) const {
  std::vector<ActionChunk> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(decode(t, target));
  return out;
}

std::string serialize_tokens(const TokenSequence& tokens) {
  std::ostringstream os;
  os << tokens.embodiment_index << ' ' << tokens.levels();
  for (const auto& row : tokens.codes)
    for (auto c : row) os << ' ' << c;
  return os.str();
}

TokenSequence parse_tokens(const std::string& line) {
  std::istringstream is(line);
  TokenSequence t;
  int levels = 0;
  if (!(is >> t.embodiment_index >> levels) || levels < 0) throw std::invalid_argument("malformed token line");
  std::vector<std::int32_t> flat;
  std::int32_t c = 0;
  while (is >> c) flat.push_back(c);
  if (!is.eof()) throw std::invalid_argument("malformed token line");
  if (levels == 0) {
    if (!flat.empty()) throw std::invalid_argument("malformed token line");
    return t;
  }
  if (flat.size() % static_cast<std::size_t>(levels) != 0) throw std::invalid_argument("token count not divisible by levels");
  const std::size_t n = flat.size() / static_cast<std::size_t>(levels);
  for (int l = 0; l < levels; ++l)
    t.codes.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(l * n),
                         flat.begin() + static_cast<std::ptrdiff_t>((l + 1) * n));
  return t;
}

void write_token_stream(const std::filesystem::path& path, std::span<const TokenSequence> seqs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& s : seqs) os << serialize_tokens(s) << '\n';
}

std::vector<TokenSequence> read_token_stream(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<TokenSequence> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(parse_tokens(line));
  return out;
}

ActionChunk zero_chunk(const EmbodimentSpec& spec, int steps) {
  ActionChunk c;
  c.actions = Matrix::Zero(steps, spec.action_dim);
  c.timestamps = chunk_timestamps(steps, spec.control_hz);
  c.embodiment_index = spec.index;
  return c;
}

}  // namespace actioncodec
