#pragma once

#include <torch/torch.h>

#include <map>
#include <string>

namespace actioncodec {

// u.v / (|u||v|) for 1-D tensors. Throws on a zero vector.
torch::Tensor cosine_similarity(const torch::Tensor& u, const torch::Tensor& v);

// Row-wise cosine similarity matrix: a (B x d), b (M x d) -> B x M.
torch::Tensor cosine_matrix(const torch::Tensor& a, const torch::Tensor& b);

// Mean over the token axis: (B x n x d) -> (B x d).
torch::Tensor pool_tokens(const torch::Tensor& z);

// Mean over anchors of -log(e^{S+} / (e^{S+} + e^{S-})). All inputs B x d
// (already pooled); negatives[i] is the sampled negative for anchor i.
torch::Tensor tcl_loss(const torch::Tensor& anchors, const torch::Tensor& positives, const torch::Tensor& negatives);

// Variant averaging the per-anchor term over every other anchor as negative.
torch::Tensor tcl_loss_all_negatives(const torch::Tensor& anchors, const torch::Tensor& positives);

// Mean over the (i, j) grid of -log(1 / (1 + exp(l_ij (-t z_i.y_j + b)))),
// with z, y L2-normalized and l_ij = +1 iff language_ids[i] == j.
// pooled: B x d, language_ids: B (int64), table: J x d.
torch::Tensor clip_loss(const torch::Tensor& pooled, const torch::Tensor& language_ids, const torch::Tensor& table,
                        const torch::Tensor& t, const torch::Tensor& b);

// Cross-entropy over cos(a_i, p_j) / temperature with target j = i.
torch::Tensor infonce_or_loss(const torch::Tensor& anchors, const torch::Tensor& positives, double temperature);

// mean |Z|
torch::Tensor l1_penalty(const torch::Tensor& z);

struct LossWeights {
  double recon = 1.0;  // weight of the full VQ objective
  double tcl = 0.1;
  double clip = 0.1;
  double l1 = 1e-4;
  double infonce = 0.0;
};

// t, b plus auxiliary weights and the perturbation scale for InfoNCE positives.
class ContrastiveParamsImpl : public torch::nn::Module {
 public:
  ContrastiveParamsImpl(double t0 = 10.0, double b0 = 0.0);
  torch::Tensor t, b;
};
TORCH_MODULE(ContrastiveParams);

// One learnable row per language id.
class LanguageEmbeddingTableImpl : public torch::nn::Module {
 public:
  LanguageEmbeddingTableImpl(int rows, int dim);
  torch::Tensor weight;
};
TORCH_MODULE(LanguageEmbeddingTable);

}  // namespace actioncodec
