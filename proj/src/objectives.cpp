#include "actioncodec/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace actioncodec {

namespace {

torch::Tensor unit_rows(const torch::Tensor& x) {
  auto norm = x.norm(2, -1, true);
  if ((norm == 0).any().item<bool>()) throw std::invalid_argument("zero vector in cosine similarity");
  return x / norm;
}

}  // namespace

torch::Tensor cosine_similarity(const torch::Tensor& u, const torch::Tensor& v) {
  if (u.dim() != 1 || u.sizes() != v.sizes()) throw std::invalid_argument("shape mismatch");
  const auto nu = u.norm();
  const auto nv = v.norm();
  if (nu.item<double>() == 0.0 || nv.item<double>() == 0.0) throw std::invalid_argument("zero vector in cosine similarity");
  return torch::dot(u, v) / (nu * nv);
}

torch::Tensor cosine_matrix(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(1)) throw std::invalid_argument("shape mismatch");
  return torch::matmul(unit_rows(a), unit_rows(b).t());
}

torch::Tensor pool_tokens(const torch::Tensor& z) {
  if (z.dim() != 3) throw std::invalid_argument("expected B x n x d latents");
  return z.mean(1);
}

torch::Tensor tcl_loss(const torch::Tensor& anchors, const torch::Tensor& positives, const torch::Tensor& negatives) {
  if (anchors.sizes() != positives.sizes() || anchors.sizes() != negatives.sizes() || anchors.dim() != 2)
    throw std::invalid_argument("shape mismatch");
  if (anchors.size(0) < 1) throw std::invalid_argument("batch without adjacency links");
  const auto ua = unit_rows(anchors);
  const auto s_pos = (ua * unit_rows(positives)).sum(1);
  const auto s_neg = (ua * unit_rows(negatives)).sum(1);
  // -log(e^p / (e^p + e^n)) = softplus(n - p)
  return torch::softplus(s_neg - s_pos).mean();
}

torch::Tensor tcl_loss_all_negatives(const torch::Tensor& anchors, const torch::Tensor& positives) {
  if (anchors.sizes() != positives.sizes() || anchors.dim() != 2) throw std::invalid_argument("shape mismatch");
  const auto b = anchors.size(0);
  if (b < 2) throw std::invalid_argument("batch without adjacency links");
  const auto ua = unit_rows(anchors);
  const auto s_pos = (ua * unit_rows(positives)).sum(1);
  const auto s_neg = torch::matmul(ua, ua.t());
  auto terms = torch::softplus(s_neg - s_pos.unsqueeze(1));
  const auto off = 1.0 - torch::eye(b, anchors.options());
  return (terms * off).sum() / static_cast<double>(b * (b - 1));
}

torch::Tensor clip_loss(const torch::Tensor& pooled, const torch::Tensor& language_ids, const torch::Tensor& table,
                        const torch::Tensor& t, const torch::Tensor& b) {
  if (pooled.dim() != 2 || table.dim() != 2 || pooled.size(1) != table.size(1))
    throw std::invalid_argument("shape mismatch");
  if (language_ids.numel() != pooled.size(0)) throw std::invalid_argument("shape mismatch");
  const auto ids = language_ids.to(torch::kLong);
  if (ids.numel() > 0 && (ids.min().item<std::int64_t>() < 0 || ids.max().item<std::int64_t>() >= table.size(0)))
    throw std::invalid_argument("missing language rows");
  const auto sim = cosine_matrix(pooled, table);  // B x J
  auto labels = -torch::ones_like(sim);
  labels.scatter_(1, ids.view({-1, 1}), 1.0);
  // -log(1 / (1 + e^x)) = softplus(x)
  return torch::softplus(labels * (-t * sim + b)).mean();
}

torch::Tensor infonce_or_loss(const torch::Tensor& anchors, const torch::Tensor& positives, double temperature) {
  if (anchors.sizes() != positives.sizes() || anchors.dim() != 2) throw std::invalid_argument("shape mismatch");
  if (anchors.size(0) < 2) throw std::invalid_argument("batch size < 2");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  const auto logits = cosine_matrix(anchors, positives) / temperature;
  const auto target = torch::arange(anchors.size(0), torch::kLong);
  return torch::nn::functional::cross_entropy(logits, target);
}

torch::Tensor l1_penalty(const torch::Tensor& z) { return z.abs().mean(); }

ContrastiveParamsImpl::ContrastiveParamsImpl(double t0, double b0) {
  t = register_parameter("t", torch::tensor(t0, torch::kFloat));
  b = register_parameter("b", torch::tensor(b0, torch::kFloat));
}

LanguageEmbeddingTableImpl::LanguageEmbeddingTableImpl(int rows, int dim) {
  if (rows < 1 || dim < 1) throw std::invalid_argument("empty language table");
  weight = register_parameter("weight", torch::randn({rows, dim}) / std::sqrt(static_cast<double>(dim)));
}

}  // namespace actioncodec
