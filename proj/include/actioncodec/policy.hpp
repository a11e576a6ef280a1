#pragma once

#include "actioncodec/data.hpp"
#include "actioncodec/perceiver.hpp"
#include "actioncodec/tokenizer.hpp"

#include "json.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace actioncodec {

struct PolicyConfig {
  int width = 128;
  int heads = 4;
  int head_layers = 2;
  int ff_multiplier = 4;
  int batch_size = 64;
  double lr = 1e-3;
  int steps = 2000;
  std::vector<int> checkpoints{100, 250, 500, 1000, 2000};
  int eval_decode_limit = 256;  // samples decoded for the recon column
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const PolicyConfig& cfg);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

// Level-0 token targets with their conditioning context.
struct PolicyData {
  Matrix observations;  // N x obs_dim
  std::vector<int> language;
  std::vector<int> embodiment;
  std::vector<std::vector<std::int32_t>> tokens;  // N x n
  std::vector<ActionChunk> targets;

  std::size_t size() const { return tokens.size(); }
};

// Needs a fixed-length tokenizer.
PolicyData make_policy_data(const Tokenizer& tokenizer, const ChunkedSet& set);

// MLP context encoder over [observation; language row; embodiment row] feeding
// a causal transformer that predicts c_0..c_{n-1}; the context is the first
// position of the sequence.
class ToyPolicyImpl : public torch::nn::Module {
 public:
  ToyPolicyImpl(const PolicyConfig& cfg, int obs_dim, int n_languages, int n_embodiments, int vocab, int length);

  // Teacher-forced logits B x n x S.
  torch::Tensor forward(const torch::Tensor& obs, const torch::Tensor& language, const torch::Tensor& embodiment,
                        const torch::Tensor& tokens);
  // Logits for the next position given a prefix (B x k, k < n).
  torch::Tensor next_logits(const torch::Tensor& obs, const torch::Tensor& language, const torch::Tensor& embodiment,
                            const torch::Tensor& prefix);

  int vocab() const { return vocab_; }
  int length() const { return length_; }

 private:
  torch::Tensor run(const torch::Tensor& ctx, const torch::Tensor& prefix);
  torch::Tensor context(const torch::Tensor& obs, const torch::Tensor& language, const torch::Tensor& embodiment);

  int vocab_, length_;
  torch::nn::Embedding lang_{nullptr}, emb_{nullptr}, tok_{nullptr};
  torch::nn::Linear ctx1_{nullptr}, ctx2_{nullptr};
  torch::Tensor pos_;
  std::vector<torch::nn::LayerNorm> ln1_, ln2_;
  std::vector<Attention> att_;
  std::vector<FeedForward> ff_;
  torch::nn::LayerNorm ln_out_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ToyPolicy);

struct TensorPolicyData {
  torch::Tensor obs, language, embodiment, tokens;
};
TensorPolicyData to_tensors(const PolicyData& data);

// Greedy generation; when `perturb_at` is set, that position is replaced by a
// uniform random code before generation continues.
std::vector<std::vector<std::int32_t>> generate(ToyPolicy& policy, const TensorPolicyData& data,
                                                std::optional<int> perturb_at = std::nullopt, std::uint64_t seed = 0);

struct EfficiencyPoint {
  int step = 0;
  double token_accuracy = 0.0;  // teacher-forced, validation
  double recon_l1 = 0.0;        // greedy prediction decoded vs ground truth
  double nll_bits = 0.0;        // per token
};

struct EfficiencyCurve {
  std::vector<EfficiencyPoint> points;

  // First checkpoint whose token accuracy reaches `threshold`.
  std::optional<int> steps_to_accuracy(double threshold) const;
  std::string csv() const;
};

struct PolicyResult {
  ToyPolicy policy{nullptr};
  EfficiencyCurve curve;
};

// Cross-entropy training, deterministic given cfg.seed. `tokenizer` decodes
// greedy predictions for the recon column (skipped when null).
PolicyResult train_policy(const PolicyData& train, const PolicyData& validation, const PolicyConfig& cfg,
                          const Tokenizer* tokenizer, const EmbodimentRegistry& registry);

// Zero chunk for streams the tokenizer rejects (out-of-range codes, wrong
// length for a fixed-length tokenizer).
ActionChunk decode_with_fallback(const TokenSequence& tokens, const Tokenizer& tokenizer, const EmbodimentSpec& target);

struct PerturbationProfile {
  std::vector<int> positions;
  std::vector<double> mean_error;
  std::vector<double> std_error;
  std::vector<std::vector<double>> samples;  // per position, per trial
  double baseline_error = 0.0;  // no perturbation
  int trials = 0;

  std::string csv() const;
};

// Per-position mean L1 of the decoded perturbed generation vs ground truth.
PerturbationProfile perturbation_experiment(ToyPolicy& policy, const Tokenizer& tokenizer, const PolicyData& data,
                                            const EmbodimentRegistry& registry, const std::vector<int>& positions,
                                            int trials, std::uint64_t seed);

// Least-squares fit of per-trial error on position.
struct ProfileTrend {
  double slope = 0.0;
  double slope_se = 0.0;
  double mean = 0.0;
  double early_mean = 0.0;  // first half of positions
  double late_mean = 0.0;   // second half

  bool flat(double k = 2.0) const { return std::abs(slope) <= k * slope_se; }
};
ProfileTrend profile_trend(const PerturbationProfile& profile);

}  // namespace actioncodec
