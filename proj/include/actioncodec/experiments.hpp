#pragma once

#include "actioncodec/codec.hpp"
#include "actioncodec/policy.hpp"
#include "actioncodec/training.hpp"

#include "json.hpp"

#include <optional>
#include <span>
#include <vector>

namespace actioncodec {

struct SplitConfig {
  int holdout_every = 4;
  int stride = 1;

  void validate() const;
};

nlohmann::json to_json(const SplitConfig& cfg);
SplitConfig split_config_from_json(const nlohmann::json& j);

// Normalized train / validation chunks of one trajectory corpus.
struct Corpus {
  EmbodimentRegistry registry;
  StatsTable stats;
  ChunkedSet train;
  ChunkedSet validation;
};

Corpus build_corpus(std::span<const Trajectory> trajectories, const EmbodimentRegistry& registry,
                    const StatsTable& stats, const SplitConfig& split);
// Stats computed from the trajectories themselves.
Corpus build_corpus(std::span<const Trajectory> trajectories, const EmbodimentRegistry& registry,
                    const SplitConfig& split);

struct OrControlRun {
  double weight = 0.0;
  double overlap = 0.0;  // validation, level 0
  TrainResult result;
};

// One tokenizer per InfoNCE weight; everything else comes from `base`.
std::vector<OrControlRun> or_control(const Corpus& corpus, const TrainConfig& base, const std::vector<double>& weights);

bool strictly_increasing(std::span<const double> values);

struct EfficiencyComparison {
  EfficiencyCurve low;
  EfficiencyCurve high;
  std::optional<int> low_steps;
  std::optional<int> high_steps;

  // High-OR tokens reach the threshold, and strictly earlier.
  bool high_faster() const { return high_steps && (!low_steps || *high_steps < *low_steps); }
};

// Same policy config, seed and chunks for both; only the tokens differ.
EfficiencyComparison efficiency_pair(const Corpus& corpus, ActionCodec low, ActionCodec high, const PolicyConfig& policy,
                                     double threshold);

struct PerturbConfig {
  std::vector<Variant> variants{Variant::kIndependent, Variant::kSelfAttention, Variant::kCausal};
  int trials = 200;

  void validate() const;
};

nlohmann::json to_json(const PerturbConfig& cfg);
PerturbConfig perturb_config_from_json(const nlohmann::json& j);

struct VariantProfile {
  Variant variant = Variant::kIndependent;
  double overlap = 0.0;
  EfficiencyCurve curve;
  PerturbationProfile profile;
  ProfileTrend trend;
};

// Trains a tokenizer per variant and a policy on its tokens, then perturbs
// every position of the policy's generations on the validation chunks.
std::vector<VariantProfile> perturbation_study(const Corpus& corpus, const TrainConfig& base,
                                               const PolicyConfig& policy, const PerturbConfig& cfg,
                                               std::uint64_t seed);

std::string perturbation_summary_csv(std::span<const VariantProfile> profiles);

}  // namespace actioncodec
