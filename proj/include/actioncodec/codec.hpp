#pragma once

#include "actioncodec/data.hpp"
#include "actioncodec/perceiver.hpp"
#include "actioncodec/quantization.hpp"
#include "actioncodec/tokenizer.hpp"

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace actioncodec {

struct CodecConfig {
  PerceiverConfig perceiver;
  int vocab_size = 2048;
  int levels = 1;
  double beta = 1.0;  // commitment weight

  void validate() const;
};

nlohmann::json to_json(const PerceiverConfig& cfg);
PerceiverConfig perceiver_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CodecConfig& cfg);
CodecConfig codec_config_from_json(const nlohmann::json& j);

// Chunks sharing one step count, packed for the encoder.
struct ChunkBatch {
  torch::Tensor actions;     // B x T x D_max, zero padded
  torch::Tensor valid;       // B x T x D_max, 1 where the dimension exists
  torch::Tensor time;        // B x T x F
  torch::Tensor embodiment;  // B, int64
  int steps = 0;

  std::int64_t size() const { return actions.defined() ? actions.size(0) : 0; }
};

class ActionCodecImpl : public torch::nn::Module {
 public:
  ActionCodecImpl(CodecConfig cfg, EmbodimentRegistry registry);

  const CodecConfig& config() const { return cfg_; }
  const EmbodimentRegistry& registry() const { return registry_; }
  torch::Dtype dtype() const;

  PerceiverEncoder& encoder() { return encoder_; }
  PerceiverDecoder& decoder() { return decoder_; }
  Codebook& book(int level) { return books_.at(static_cast<std::size_t>(level)); }
  std::vector<torch::Tensor> book_entries(int levels = -1) const;
  int levels() const { return static_cast<int>(books_.size()); }
  void add_level();

  ChunkBatch make_batch(std::span<const ActionChunk> chunks) const;
  torch::Tensor time_features(const EmbodimentSpec& target, std::int64_t batch) const;

  torch::Tensor encode_latents(const ChunkBatch& batch);
  // embeddings B x n x d -> B x T' x D' for the target embodiment.
  torch::Tensor decode_embeddings(const torch::Tensor& embeddings, const EmbodimentSpec& target);
  // Same, with per-item embodiment indices; all items must share T'.
  torch::Tensor decode_embeddings(const torch::Tensor& embeddings, const ChunkBatch& like);

 private:
  CodecConfig cfg_;
  EmbodimentRegistry registry_;
  PerceiverEncoder encoder_{nullptr};
  PerceiverDecoder decoder_{nullptr};
  std::vector<Codebook> books_;
};
TORCH_MODULE(ActionCodec);

// Parameter-for-parameter copy (same config, registry and level count).
ActionCodec clone_codec(ActionCodec& src);

// Tokenizer view of a codec. Encoding emits `levels` rows (default: all).
class CodecTokenizer final : public Tokenizer {
 public:
  explicit CodecTokenizer(ActionCodec codec, int levels = -1, std::string name = "actioncodec");

  std::string name() const override { return name_; }
  std::int64_t vocab_size() const override { return codec_->config().vocab_size; }
  std::optional<std::size_t> fixed_length() const override {
    return static_cast<std::size_t>(codec_->config().perceiver.n_tokens);
  }
  TokenSequence encode(const ActionChunk& chunk) const override;
  std::vector<TokenSequence> encode_batch(std::span<const ActionChunk> chunks) const override;
  ActionChunk decode(const TokenSequence& tokens, const EmbodimentSpec& target) const override;
  std::vector<ActionChunk> decode_batch(std::span<const TokenSequence> tokens,
                                        const EmbodimentSpec& target) const override;

  ActionCodec& codec() const { return codec_; }
  int levels() const { return levels_; }

 private:
  mutable ActionCodec codec_;
  int levels_;
  std::string name_;
};

// JSON manifest (config, registry, tensor table) plus a little-endian float32
// blob stored next to it with the extension ".bin".
void save_checkpoint(const std::filesystem::path& manifest, ActionCodec& codec,
                     const nlohmann::json& extra = nlohmann::json::object());
ActionCodec load_checkpoint(const std::filesystem::path& manifest, nlohmann::json* extra = nullptr);

// Parameter bytes in manifest order, for determinism checks.
std::string parameter_checksum(const torch::nn::Module& module);

}  // namespace actioncodec
