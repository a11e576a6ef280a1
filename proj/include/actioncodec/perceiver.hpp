#pragma once

#include "actioncodec/data.hpp"

#include <torch/torch.h>

#include <optional>
#include <string>

namespace actioncodec {

enum class Variant { kIndependent, kSelfAttention, kCausal };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct PerceiverConfig {
  int latent_dim = 128;
  int n_tokens = 16;
  int n_layers = 2;
  int n_heads = 4;
  Variant variant = Variant::kIndependent;
  int ff_multiplier = 4;
  int prompt_dim = 16;
  int fourier_dim = 64;  // 32 frequencies
  int max_action_dim = 7;
  int n_embodiments = 1;  // soft-prompt rows

  void validate() const;
};

// Columns [sin(2 pi f_i t) | cos(2 pi f_i t)], f_i geometric in [f_min, f_max].
Matrix fourier_time_embed(std::span<const double> timestamps, int dim, double f_min, double f_max);
// Frequency range used for an embodiment: [0.5, control_hz / 2].
Matrix fourier_time_embed(std::span<const double> timestamps, int dim, const EmbodimentSpec& spec);

class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int dim, int heads);
  // x: B x Nq x dim, ctx: B x Nk x dim; mask (Nq x Nk bool, true = keep) optional.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& ctx,
                        const std::optional<torch::Tensor>& mask = std::nullopt);

 private:
  int heads_;
  torch::nn::Linear q_{nullptr}, k_{nullptr}, v_{nullptr}, o_{nullptr};
};
TORCH_MODULE(Attention);

class FeedForwardImpl : public torch::nn::Module {
 public:
  FeedForwardImpl(int dim, int multiplier);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Linear in_{nullptr}, out_{nullptr};
};
TORCH_MODULE(FeedForward);

// One query block: cross-attention, optional query self-attention, feed-forward.
class QueryBlockImpl : public torch::nn::Module {
 public:
  QueryBlockImpl(int dim, int heads, int ff_multiplier, Variant variant);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& ctx);

 private:
  Variant variant_;
  torch::nn::LayerNorm ln_q_{nullptr}, ln_kv_{nullptr}, ln_sa_{nullptr}, ln_ff_{nullptr};
  Attention cross_{nullptr}, self_{nullptr};
  FeedForward ff_{nullptr};
};
TORCH_MODULE(QueryBlock);

// Soft prompt rows indexed by embodiment index.
class SoftPromptTableImpl : public torch::nn::Module {
 public:
  SoftPromptTableImpl(int rows, int dim, int init_scale_dim);
  torch::Tensor forward(const torch::Tensor& index);  // B -> B x dim
  torch::Tensor& weight() { return weight_; }

 private:
  torch::Tensor weight_;
};
TORCH_MODULE(SoftPromptTable);

// F: actions (B x T x D_max, zero padded) + time features (B x T x F) +
// embodiment index (B) -> latents B x n x d.
class PerceiverEncoderImpl : public torch::nn::Module {
 public:
  explicit PerceiverEncoderImpl(const PerceiverConfig& cfg);
  torch::Tensor forward(const torch::Tensor& actions, const torch::Tensor& time_features,
                        const torch::Tensor& embodiment);

  torch::Tensor& queries() { return queries_; }
  SoftPromptTable& prompts() { return prompts_; }

 private:
  PerceiverConfig cfg_;
  SoftPromptTable prompts_{nullptr};
  torch::nn::Linear step_in_{nullptr};
  torch::Tensor queries_;
  torch::nn::ModuleList blocks_;
  torch::nn::LayerNorm ln_out_{nullptr};
  torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(PerceiverEncoder);

// G: token embeddings (B x n x d) + target time features (B x T' x F) +
// embodiment index (B) -> tanh outputs B x T' x D_max.
class PerceiverDecoderImpl : public torch::nn::Module {
 public:
  explicit PerceiverDecoderImpl(const PerceiverConfig& cfg);
  torch::Tensor forward(const torch::Tensor& embeddings, const torch::Tensor& time_features,
                        const torch::Tensor& embodiment);

  SoftPromptTable& prompts() { return prompts_; }

 private:
  PerceiverConfig cfg_;
  SoftPromptTable prompts_{nullptr};
  torch::nn::Linear query_in_{nullptr};
  torch::nn::ModuleList blocks_;
  torch::nn::LayerNorm ln_out_{nullptr};
  torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(PerceiverDecoder);

}  // namespace actioncodec
