#include "actioncodec/perceiver.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace actioncodec {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kIndependent: return "independent";
    case Variant::kSelfAttention: return "sa";
    case Variant::kCausal: return "causal";
  }
  return "independent";
}

Variant variant_from_string(const std::string& s) {
  if (s == "independent") return Variant::kIndependent;
  if (s == "sa") return Variant::kSelfAttention;
  if (s == "causal") return Variant::kCausal;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

void PerceiverConfig::validate() const {
  if (latent_dim < 1 || n_tokens < 1 || n_layers < 1 || n_heads < 1 || ff_multiplier < 1)
    throw std::invalid_argument("perceiver sizes must be positive");
  if (latent_dim % n_heads != 0) throw std::invalid_argument("latent_dim must be divisible by n_heads");
  if (prompt_dim < 1) throw std::invalid_argument("prompt_dim must be positive");
  if (fourier_dim < 2 || fourier_dim % 2 != 0) throw std::invalid_argument("fourier_dim must be even");
  if (max_action_dim < 1 || n_embodiments < 1) throw std::invalid_argument("empty embodiment layout");
}

Matrix fourier_time_embed(std::span<const double> timestamps, int dim, double f_min, double f_max) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("odd dim");
  if (!(f_min > 0.0) || !(f_max >= f_min)) throw std::invalid_argument("invalid frequency range");
  const int k = dim / 2;
  std::vector<double> freqs(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    freqs[i] = k == 1 ? f_min : f_min * std::pow(f_max / f_min, static_cast<double>(i) / (k - 1));
  Matrix out(static_cast<Eigen::Index>(timestamps.size()), dim);
  for (std::size_t r = 0; r < timestamps.size(); ++r) {
    const double t = timestamps[r];
    if (!std::isfinite(t)) throw std::invalid_argument("non-finite timestamp");
    for (int i = 0; i < k; ++i) {
      const double phase = 2.0 * std::numbers::pi * freqs[i] * t;
      out(r, i) = std::sin(phase);
      out(r, k + i) = std::cos(phase);
    }
  }
  return out;
}

Matrix fourier_time_embed(std::span<const double> timestamps, int dim, const EmbodimentSpec& spec) {
  return fourier_time_embed(timestamps, dim, 0.5, std::max(0.5, spec.control_hz / 2.0));
}

AttentionImpl::AttentionImpl(int dim, int heads) : heads_(heads) {
  q_ = register_module("q", torch::nn::Linear(dim, dim));
  k_ = register_module("k", torch::nn::Linear(dim, dim));
  v_ = register_module("v", torch::nn::Linear(dim, dim));
  o_ = register_module("o", torch::nn::Linear(dim, dim));
}

torch::Tensor AttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& ctx,
                                     const std::optional<torch::Tensor>& mask) {
  const auto b = x.size(0);
  const auto nq = x.size(1);
  const auto nk = ctx.size(1);
  const auto dim = x.size(2);
  const auto hd = dim / heads_;
  auto split = [&](const torch::Tensor& t, std::int64_t n) { return t.view({b, n, heads_, hd}).transpose(1, 2); };
  auto q = split(q_(x), nq);
  auto k = split(k_(ctx), nk);
  auto v = split(v_(ctx), nk);
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
  if (mask) scores = scores.masked_fill(mask->logical_not(), -std::numeric_limits<double>::infinity());
  auto att = torch::softmax(scores, -1);
  auto y = torch::matmul(att, v).transpose(1, 2).reshape({b, nq, dim});
  return o_(y);
}

FeedForwardImpl::FeedForwardImpl(int dim, int multiplier) {
  in_ = register_module("in", torch::nn::Linear(dim, dim * multiplier));
  out_ = register_module("out", torch::nn::Linear(dim * multiplier, dim));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) { return out_(torch::gelu(in_(x))); }

QueryBlockImpl::QueryBlockImpl(int dim, int heads, int ff_multiplier, Variant variant) : variant_(variant) {
  ln_q_ = register_module("ln_q", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ln_kv_ = register_module("ln_kv", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  cross_ = register_module("cross", Attention(dim, heads));
  if (variant_ != Variant::kIndependent) {
    ln_sa_ = register_module("ln_sa", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    self_ = register_module("self", Attention(dim, heads));
  }
  ln_ff_ = register_module("ln_ff", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ff_ = register_module("ff", FeedForward(dim, ff_multiplier));
}

torch::Tensor QueryBlockImpl::forward(const torch::Tensor& x_in, const torch::Tensor& ctx) {
  auto x = x_in + cross_(ln_q_(x_in), ln_kv_(ctx));
  if (variant_ != Variant::kIndependent) {
    auto h = ln_sa_(x);
    std::optional<torch::Tensor> mask;
    if (variant_ == Variant::kCausal) {
      const auto n = x.size(1);
      mask = torch::ones({n, n}, torch::TensorOptions().dtype(torch::kBool)).tril();
    }
    x = x + self_(h, h, mask);
  }
  return x + ff_(ln_ff_(x));
}

SoftPromptTableImpl::SoftPromptTableImpl(int rows, int dim, int init_scale_dim) {
  weight_ = register_parameter("weight", torch::randn({rows, dim}) / std::sqrt(static_cast<double>(init_scale_dim)));
}

torch::Tensor SoftPromptTableImpl::forward(const torch::Tensor& index) {
  if (index.numel() > 0 && (index.min().item<std::int64_t>() < 0 || index.max().item<std::int64_t>() >= weight_.size(0)))
    throw std::invalid_argument("unregistered embodiment index");
  return weight_.index_select(0, index);
}

PerceiverEncoderImpl::PerceiverEncoderImpl(const PerceiverConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg.latent_dim;
  prompts_ = register_module("prompts", SoftPromptTable(cfg.n_embodiments, cfg.prompt_dim, d));
  step_in_ = register_module("step_in", torch::nn::Linear(cfg.max_action_dim + cfg.fourier_dim + cfg.prompt_dim, d));
  queries_ = register_parameter("queries", torch::randn({cfg.n_tokens, d}) / std::sqrt(static_cast<double>(d)));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg.n_layers; ++i) blocks_->push_back(QueryBlock(d, cfg.n_heads, cfg.ff_multiplier, cfg.variant));
  ln_out_ = register_module("ln_out", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  out_ = register_module("out", torch::nn::Linear(d, d));
}

torch::Tensor PerceiverEncoderImpl::forward(const torch::Tensor& actions, const torch::Tensor& time_features,
                                            const torch::Tensor& embodiment) {
  if (actions.dim() != 3 || actions.size(2) != cfg_.max_action_dim) throw std::invalid_argument("shape mismatch");
  if (time_features.size(0) != actions.size(0) || time_features.size(1) != actions.size(1) ||
      time_features.size(2) != cfg_.fourier_dim)
    throw std::invalid_argument("shape mismatch");
  const auto b = actions.size(0);
  const auto t = actions.size(1);
  auto prompt = prompts_(embodiment).unsqueeze(1).expand({b, t, cfg_.prompt_dim});
  auto ctx = step_in_(torch::cat({actions, time_features, prompt}, -1));
  auto x = queries_.unsqueeze(0).expand({b, cfg_.n_tokens, cfg_.latent_dim});
  for (const auto& m : *blocks_) x = m->as<QueryBlock>()->forward(x, ctx);
  return out_(ln_out_(x));
}

PerceiverDecoderImpl::PerceiverDecoderImpl(const PerceiverConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg.latent_dim;
  prompts_ = register_module("prompts", SoftPromptTable(cfg.n_embodiments, cfg.prompt_dim, d));
  query_in_ = register_module("query_in", torch::nn::Linear(cfg.fourier_dim + cfg.prompt_dim, d));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < cfg.n_layers; ++i)
    blocks_->push_back(QueryBlock(d, cfg.n_heads, cfg.ff_multiplier, Variant::kIndependent));
  ln_out_ = register_module("ln_out", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  out_ = register_module("out", torch::nn::Linear(d, cfg.max_action_dim));
}

torch::Tensor PerceiverDecoderImpl::forward(const torch::Tensor& embeddings, const torch::Tensor& time_features,
                                            const torch::Tensor& embodiment) {
  if (embeddings.dim() != 3 || embeddings.size(2) != cfg_.latent_dim) throw std::invalid_argument("shape mismatch");
  const auto b = embeddings.size(0);
  const auto t = time_features.size(1);
  auto prompt = prompts_(embodiment).unsqueeze(1).expand({b, t, cfg_.prompt_dim});
  auto x = query_in_(torch::cat({time_features, prompt}, -1));
  for (const auto& m : *blocks_) x = m->as<QueryBlock>()->forward(x, embeddings);
  return torch::tanh(out_(ln_out_(x)));
}

}  // namespace actioncodec
