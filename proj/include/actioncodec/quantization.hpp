#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace actioncodec {

// Lowest-index nearest entry per row. z: N x d, book: S x d -> N (int64).
// Candidates from a float64 matmul are re-ranked by a direct sum of squared
// differences, so results agree with exhaustive search including ties.
torch::Tensor nearest_codes(const torch::Tensor& z, const torch::Tensor& book);

struct QuantizeResult {
  torch::Tensor codes;            // leading shape of z, int64
  torch::Tensor embeddings;       // e_c, differentiable w.r.t. the book
  torch::Tensor quantized;        // straight-through: forward e_c, backward identity to z
  torch::Tensor codebook_loss;    // mean (sg[z] - e_c)^2
  torch::Tensor commitment_loss;  // mean (z - sg[e_c])^2
};

// z: (..., d). Throws "non-finite Z".
QuantizeResult quantize(const torch::Tensor& z, const torch::Tensor& book);

// Mean-reduced reconstruction + codebook + beta * commitment.
torch::Tensor vq_loss(const torch::Tensor& a, const torch::Tensor& a_hat, const torch::Tensor& z,
                      const torch::Tensor& e_c, double beta = 1.0);

struct RvqResult {
  torch::Tensor codes;                      // L x (leading shape of z)
  std::vector<torch::Tensor> cumulative;    // sum of e^(m), m <= l, per level
  std::vector<torch::Tensor> codebook_loss; // per level, against that level's residual
};

// Level l quantizes z - sum_{m<l} e^(m).
RvqResult rvq_quantize(const torch::Tensor& z, const std::vector<torch::Tensor>& books);

// Lloyd iterations from k-means++ seeding; deterministic given seed. data: N x d.
torch::Tensor kmeans(const torch::Tensor& data, int k, int max_iters, std::uint64_t seed);

// S x d entries plus per-code usage bookkeeping.
class CodebookImpl : public torch::nn::Module {
 public:
  CodebookImpl(int size, int dim);

  torch::Tensor& entries() { return entries_; }
  const torch::Tensor& entries() const { return entries_; }
  int size() const { return static_cast<int>(entries_.size(0)); }

  void record_usage(const torch::Tensor& codes);
  const std::vector<std::int64_t>& usage() const { return usage_; }
  std::int64_t total_usage() const;
  // exp(H(usage)) over the counts recorded since the last reset.
  double perplexity() const;

  // Closes an epoch; entries unused for `patience` consecutive epochs are
  // re-seeded from rows of `candidates`. Returns the number re-seeded.
  int end_epoch(const torch::Tensor& candidates, int patience, std::uint64_t seed);
  void reset_usage();

 private:
  torch::Tensor entries_;
  std::vector<std::int64_t> usage_;
  std::vector<std::int64_t> epoch_usage_;
  std::vector<int> idle_epochs_;
};
TORCH_MODULE(Codebook);

}  // namespace actioncodec
