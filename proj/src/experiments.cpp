#include "actioncodec/experiments.hpp"

#include "actioncodec/metrics.hpp"

#include <sstream>
#include <stdexcept>

namespace actioncodec {

using nlohmann::json;

void SplitConfig::validate() const {
  if (holdout_every < 2) throw std::invalid_argument("holdout_every must be >= 2");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
}

json to_json(const SplitConfig& c) { return json{{"holdout_every", c.holdout_every}, {"stride", c.stride}}; }

SplitConfig split_config_from_json(const json& j) {
  SplitConfig c;
  c.holdout_every = j.value("holdout_every", c.holdout_every);
  c.stride = j.value("stride", c.stride);
  c.validate();
  return c;
}

Corpus build_corpus(std::span<const Trajectory> trajectories, const EmbodimentRegistry& registry,
                    const StatsTable& stats, const SplitConfig& split) {
  split.validate();
  const auto parts = split_trajectories(trajectories, split.holdout_every);
  Corpus c;
  c.registry = registry;
  c.stats = stats;
  c.train = chunk_dataset(parts.train, registry, stats, split.stride);
  c.validation = chunk_dataset(parts.validation, registry, stats, split.stride);
  return c;
}

Corpus build_corpus(std::span<const Trajectory> trajectories, const EmbodimentRegistry& registry,
                    const SplitConfig& split) {
  return build_corpus(trajectories, registry, compute_stats_per_embodiment(trajectories), split);
}

std::vector<OrControlRun> or_control(const Corpus& corpus, const TrainConfig& base, const std::vector<double>& weights) {
  std::vector<OrControlRun> runs;
  for (double w : weights) {
    auto cfg = base;
    cfg.weights.infonce = w;
    OrControlRun run;
    run.weight = w;
    run.result = train_tokenizer(corpus.train, corpus.validation, corpus.registry, cfg);
    run.overlap = overlap_rate(CodecTokenizer(run.result.codec), corpus.validation).overlap_rate;
    runs.push_back(std::move(run));
  }
  return runs;
}

bool strictly_increasing(std::span<const double> values) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) return false;
  return true;
}

EfficiencyComparison efficiency_pair(const Corpus& corpus, ActionCodec low, ActionCodec high, const PolicyConfig& policy,
                                     double threshold) {
  auto run = [&](ActionCodec codec) {
    const CodecTokenizer tok(codec, 1);
    const auto train = make_policy_data(tok, corpus.train);
    const auto val = make_policy_data(tok, corpus.validation);
    return train_policy(train, val, policy, &tok, corpus.registry).curve;
  };
  EfficiencyComparison out;
  out.low = run(low);
  out.high = run(high);
  out.low_steps = out.low.steps_to_accuracy(threshold);
  out.high_steps = out.high.steps_to_accuracy(threshold);
  return out;
}

void PerturbConfig::validate() const {
  if (variants.empty()) throw std::invalid_argument("no variants to perturb");
  if (trials < 2) throw std::invalid_argument("need at least 2 trials");
}

json to_json(const PerturbConfig& c) {
  json v = json::array();
  for (auto x : c.variants) v.push_back(to_string(x));
  return json{{"variants", v}, {"trials", c.trials}};
}

PerturbConfig perturb_config_from_json(const json& j) {
  PerturbConfig c;
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j.at("variants")) c.variants.push_back(variant_from_string(v.get<std::string>()));
  }
  c.trials = j.value("trials", c.trials);
  c.validate();
  return c;
}

std::vector<VariantProfile> perturbation_study(const Corpus& corpus, const TrainConfig& base,
                                               const PolicyConfig& policy, const PerturbConfig& cfg,
                                               std::uint64_t seed) {
  cfg.validate();
  std::vector<VariantProfile> out;
  for (auto variant : cfg.variants) {
    auto tcfg = base;
    tcfg.codec.perceiver.variant = variant;
    auto trained = train_tokenizer(corpus.train, corpus.validation, corpus.registry, tcfg);
    const CodecTokenizer tok(trained.codec, 1);
    const auto ptrain = make_policy_data(tok, corpus.train);
    const auto pval = make_policy_data(tok, corpus.validation);
    auto pr = train_policy(ptrain, pval, policy, &tok, corpus.registry);

    VariantProfile vp;
    vp.variant = variant;
    vp.overlap = overlap_rate(tok, corpus.validation).overlap_rate;
    vp.curve = pr.curve;
    std::vector<int> positions(static_cast<std::size_t>(tcfg.codec.perceiver.n_tokens));
    for (std::size_t k = 0; k < positions.size(); ++k) positions[k] = static_cast<int>(k);
    vp.profile = perturbation_experiment(pr.policy, tok, pval, corpus.registry, positions, cfg.trials, seed);
    vp.trend = profile_trend(vp.profile);
    out.push_back(std::move(vp));
  }
  return out;
}

std::string perturbation_summary_csv(std::span<const VariantProfile> profiles) {
  std::ostringstream os;
  os.precision(9);
  os << "variant,overlap_rate,baseline_l1,mean_l1,early_l1,late_l1,slope,slope_se,flat\n";
  for (const auto& p : profiles)
    os << to_string(p.variant) << ',' << p.overlap << ',' << p.profile.baseline_error << ',' << p.trend.mean << ','
       << p.trend.early_mean << ',' << p.trend.late_mean << ',' << p.trend.slope << ',' << p.trend.slope_se << ','
       << (p.trend.flat() ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace actioncodec
