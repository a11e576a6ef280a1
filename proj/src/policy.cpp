#include "actioncodec/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace actioncodec {

using nlohmann::json;

void PolicyConfig::validate() const {
  if (width < 1 || heads < 1 || head_layers < 1 || ff_multiplier < 1) throw std::invalid_argument("policy sizes must be positive");
  if (width % heads != 0) throw std::invalid_argument("policy width must be divisible by heads");
  if (batch_size < 1 || steps < 0) throw std::invalid_argument("invalid policy schedule");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1]) throw std::invalid_argument("checkpoints must be strictly increasing");
}

json to_json(const PolicyConfig& c) {
  return json{{"width", c.width},
              {"heads", c.heads},
              {"head_layers", c.head_layers},
              {"ff_multiplier", c.ff_multiplier},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"steps", c.steps},
              {"checkpoints", c.checkpoints},
              {"eval_decode_limit", c.eval_decode_limit},
              {"seed", c.seed}};
}

PolicyConfig policy_config_from_json(const json& j) {
  PolicyConfig c;
  c.width = j.value("width", c.width);
  c.heads = j.value("heads", c.heads);
  c.head_layers = j.value("head_layers", c.head_layers);
  c.ff_multiplier = j.value("ff_multiplier", c.ff_multiplier);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.steps = j.value("steps", c.steps);
  c.checkpoints = j.value("checkpoints", c.checkpoints);
  c.eval_decode_limit = j.value("eval_decode_limit", c.eval_decode_limit);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

PolicyData make_policy_data(const Tokenizer& tokenizer, const ChunkedSet& set) {
  if (!tokenizer.fixed_length()) throw std::invalid_argument("policy harness needs a fixed-length tokenizer");
  PolicyData d;
  if (set.size() == 0) return d;
  const auto tokens = tokenizer.encode_batch(set.chunks);
  const auto obs_dim = static_cast<Eigen::Index>(set.context.front().observation.size());
  d.observations.resize(static_cast<Eigen::Index>(set.size()), obs_dim);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& ctx = set.context[i];
    if (static_cast<Eigen::Index>(ctx.observation.size()) != obs_dim) throw std::invalid_argument("ragged observations");
    for (Eigen::Index k = 0; k < obs_dim; ++k) d.observations(static_cast<Eigen::Index>(i), k) = ctx.observation[k];
    d.language.push_back(ctx.language_id);
    d.embodiment.push_back(set.chunks[i].embodiment_index);
    d.tokens.push_back(tokens[i].codes.front());
    d.targets.push_back(set.chunks[i]);
  }
  return d;
}

ToyPolicyImpl::ToyPolicyImpl(const PolicyConfig& cfg, int obs_dim, int n_languages, int n_embodiments, int vocab,
                             int length)
    : vocab_(vocab), length_(length) {
  cfg.validate();
  if (vocab < 2 || length < 1) throw std::invalid_argument("invalid token layout");
  const int w = cfg.width;
  const int side = std::max(4, w / 8);
  lang_ = register_module("lang", torch::nn::Embedding(std::max(1, n_languages), side));
  emb_ = register_module("emb", torch::nn::Embedding(std::max(1, n_embodiments), side));
  ctx1_ = register_module("ctx1", torch::nn::Linear(obs_dim + 2 * side, w));
  ctx2_ = register_module("ctx2", torch::nn::Linear(w, w));
  tok_ = register_module("tok", torch::nn::Embedding(vocab, w));
  pos_ = register_parameter("pos", torch::randn({length, w}) / std::sqrt(static_cast<double>(w)));
  for (int l = 0; l < cfg.head_layers; ++l) {
    const auto s = std::to_string(l);
    ln1_.push_back(register_module("ln1_" + s, torch::nn::LayerNorm(torch::nn::LayerNormOptions({w}))));
    att_.push_back(register_module("att_" + s, Attention(w, cfg.heads)));
    ln2_.push_back(register_module("ln2_" + s, torch::nn::LayerNorm(torch::nn::LayerNormOptions({w}))));
    ff_.push_back(register_module("ff_" + s, FeedForward(w, cfg.ff_multiplier)));
  }
  ln_out_ = register_module("ln_out", torch::nn::LayerNorm(torch::nn::LayerNormOptions({w})));
  head_ = register_module("head", torch::nn::Linear(w, vocab));
}

torch::Tensor ToyPolicyImpl::context(const torch::Tensor& obs, const torch::Tensor& language,
                                     const torch::Tensor& embodiment) {
  auto x = torch::cat({obs, lang_(language), emb_(embodiment)}, -1);
  return ctx2_(torch::gelu(ctx1_(x)));
}

torch::Tensor ToyPolicyImpl::run(const torch::Tensor& ctx, const torch::Tensor& prefix) {
  auto x = ctx.unsqueeze(1);
  if (prefix.size(1) > 0) x = torch::cat({x, tok_(prefix)}, 1);
  const auto k = x.size(1);
  x = x + pos_.narrow(0, 0, k).unsqueeze(0);
  const auto mask = torch::ones({k, k}, torch::TensorOptions().dtype(torch::kBool)).tril();
  for (std::size_t l = 0; l < att_.size(); ++l) {
    auto h = ln1_[l](x);
    x = x + att_[l](h, h, mask);
    x = x + ff_[l](ln2_[l](x));
  }
  return head_(ln_out_(x));
}

torch::Tensor ToyPolicyImpl::forward(const torch::Tensor& obs, const torch::Tensor& language,
                                     const torch::Tensor& embodiment, const torch::Tensor& tokens) {
  if (tokens.size(1) != length_) throw std::invalid_argument("token length mismatch");
  return run(context(obs, language, embodiment), tokens.narrow(1, 0, length_ - 1));
}

torch::Tensor ToyPolicyImpl::next_logits(const torch::Tensor& obs, const torch::Tensor& language,
                                         const torch::Tensor& embodiment, const torch::Tensor& prefix) {
  if (prefix.size(1) >= length_) throw std::invalid_argument("prefix already complete");
  return run(context(obs, language, embodiment), prefix).select(1, prefix.size(1));
}

TensorPolicyData to_tensors(const PolicyData& d) {
  TensorPolicyData t;
  const auto n = static_cast<std::int64_t>(d.size());
  t.obs = torch::from_blob(const_cast<double*>(d.observations.data()), {n, d.observations.cols()}, torch::kDouble)
              .to(torch::kFloat);
  std::vector<std::int64_t> lang(d.language.begin(), d.language.end());
  std::vector<std::int64_t> emb(d.embodiment.begin(), d.embodiment.end());
  t.language = torch::tensor(lang, torch::kLong);
  t.embodiment = torch::tensor(emb, torch::kLong);
  const auto len = n > 0 ? static_cast<std::int64_t>(d.tokens.front().size()) : 0;
  t.tokens = torch::empty({n, len}, torch::kLong);
  auto acc = t.tokens.accessor<std::int64_t, 2>();
  for (std::int64_t i = 0; i < n; ++i) {
    if (static_cast<std::int64_t>(d.tokens[i].size()) != len) throw std::invalid_argument("ragged token rows");
    for (std::int64_t k = 0; k < len; ++k) acc[i][k] = d.tokens[i][k];
  }
  return t;
}

namespace {

TensorPolicyData slice(const TensorPolicyData& d, std::int64_t start, std::int64_t len) {
  return {d.obs.narrow(0, start, len), d.language.narrow(0, start, len), d.embodiment.narrow(0, start, len),
          d.tokens.narrow(0, start, len)};
}

TensorPolicyData take(const TensorPolicyData& d, const torch::Tensor& idx) {
  return {d.obs.index_select(0, idx), d.language.index_select(0, idx), d.embodiment.index_select(0, idx),
          d.tokens.index_select(0, idx)};
}

std::vector<std::vector<std::int32_t>> to_rows(const torch::Tensor& t) {
  const auto c = t.contiguous();
  auto acc = c.accessor<std::int64_t, 2>();
  std::vector<std::vector<std::int32_t>> out(static_cast<std::size_t>(c.size(0)));
  for (std::int64_t i = 0; i < c.size(0); ++i)
    for (std::int64_t k = 0; k < c.size(1); ++k) out[i].push_back(static_cast<std::int32_t>(acc[i][k]));
  return out;
}

double decoded_l1(const std::vector<std::vector<std::int32_t>>& rows, const PolicyData& data, std::size_t offset,
                  const Tokenizer& tokenizer, const EmbodimentRegistry& registry, std::vector<double>* per_row) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& target = data.targets[offset + i];
    TokenSequence seq;
    seq.codes.push_back(rows[i]);
    seq.embodiment_index = target.embodiment_index;
    const auto dec = decode_with_fallback(seq, tokenizer, registry.by_index(target.embodiment_index));
    double e = 0.0;
    const auto rows_n = std::min(dec.actions.rows(), target.actions.rows());
    const auto cols_n = std::min(dec.actions.cols(), target.actions.cols());
    for (Eigen::Index r = 0; r < rows_n; ++r)
      for (Eigen::Index c = 0; c < cols_n; ++c) e += std::abs(dec.actions(r, c) - target.actions(r, c));
    e /= static_cast<double>(std::max<Eigen::Index>(1, rows_n * cols_n));
    if (per_row) per_row->push_back(e);
    total += e;
  }
  return rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
}

EfficiencyPoint evaluate_policy(ToyPolicy& policy, const PolicyData& val, const TensorPolicyData& vt, int step,
                                const PolicyConfig& cfg, const Tokenizer* tokenizer,
                                const EmbodimentRegistry& registry) {
  torch::NoGradGuard ng;
  EfficiencyPoint p;
  p.step = step;
  const auto n = vt.tokens.size(0);
  if (n == 0) return p;
  double correct = 0.0;
  double nll = 0.0;
  for (std::int64_t s = 0; s < n; s += 512) {
    const auto len = std::min<std::int64_t>(512, n - s);
    const auto b = slice(vt, s, len);
    const auto logp = torch::log_softmax(policy->forward(b.obs, b.language, b.embodiment, b.tokens), -1);
    correct += (logp.argmax(-1) == b.tokens).sum().item<double>();
    nll -= logp.gather(-1, b.tokens.unsqueeze(-1)).sum().item<double>();
  }
  const double count = static_cast<double>(vt.tokens.numel());
  p.token_accuracy = correct / count;
  p.nll_bits = nll / count / std::numbers::ln2;
  if (tokenizer) {
    const auto lim = std::min<std::int64_t>(n, cfg.eval_decode_limit);
    const auto rows = generate(policy, slice(vt, 0, lim));
    p.recon_l1 = decoded_l1(rows, val, 0, *tokenizer, registry, nullptr);
  }
  return p;
}

}  // namespace

std::vector<std::vector<std::int32_t>> generate(ToyPolicy& policy, const TensorPolicyData& data,
                                                std::optional<int> perturb_at, std::uint64_t seed) {
  torch::NoGradGuard ng;
  const int n = policy->length();
  if (perturb_at && (*perturb_at < 0 || *perturb_at >= n)) throw std::out_of_range("perturbation position out of range");
  const auto b = data.obs.size(0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> code(0, policy->vocab() - 1);
  auto prefix = torch::empty({b, 0}, torch::kLong);
  for (int k = 0; k < n; ++k) {
    torch::Tensor next;
    if (perturb_at && *perturb_at == k) {
      std::vector<std::int64_t> r(static_cast<std::size_t>(b));
      for (auto& x : r) x = code(rng);
      next = torch::tensor(r, torch::kLong);
    } else {
      next = policy->next_logits(data.obs, data.language, data.embodiment, prefix).argmax(-1);
    }
    prefix = torch::cat({prefix, next.unsqueeze(1)}, 1);
  }
  return to_rows(prefix);
}

std::optional<int> EfficiencyCurve::steps_to_accuracy(double threshold) const {
  for (const auto& p : points)
    if (p.token_accuracy >= threshold) return p.step;
  return std::nullopt;
}

std::string EfficiencyCurve::csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "step,token_accuracy,recon_l1,validation_nll_bits\n";
  for (const auto& p : points) os << p.step << ',' << p.token_accuracy << ',' << p.recon_l1 << ',' << p.nll_bits << '\n';
  return os.str();
}

PolicyResult train_policy(const PolicyData& train, const PolicyData& validation, const PolicyConfig& cfg,
                          const Tokenizer* tokenizer, const EmbodimentRegistry& registry) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("no data");
  const auto vocab = tokenizer ? tokenizer->vocab_size() : 0;
  int max_code = 0;
  int langs = 0;
  int embs = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (auto c : train.tokens[i]) max_code = std::max(max_code, c);
    langs = std::max(langs, train.language[i] + 1);
    embs = std::max(embs, train.embodiment[i] + 1);
  }
  for (std::size_t i = 0; i < validation.size(); ++i) {
    langs = std::max(langs, validation.language[i] + 1);
    embs = std::max(embs, validation.embodiment[i] + 1);
  }
  embs = std::max(embs, registry.index_capacity());
  const int s = static_cast<int>(std::max<std::int64_t>(vocab, max_code + 1));

  torch::manual_seed(cfg.seed);
  PolicyResult r;
  r.policy = ToyPolicy(cfg, static_cast<int>(train.observations.cols()), langs, embs, s,
                       static_cast<int>(train.tokens.front().size()));
  const auto tt = to_tensors(train);
  const auto vt = to_tensors(validation);
  torch::optim::Adam opt(r.policy->parameters(), torch::optim::AdamOptions(cfg.lr));
  std::mt19937_64 rng(cfg.seed ^ 0xa5a5a5a5ULL);
  std::uniform_int_distribution<std::int64_t> pick(0, static_cast<std::int64_t>(train.size()) - 1);

  std::size_t next_ckpt = 0;
  auto record = [&](int step) {
    while (next_ckpt < cfg.checkpoints.size() && cfg.checkpoints[next_ckpt] < step) ++next_ckpt;
    if (next_ckpt < cfg.checkpoints.size() && cfg.checkpoints[next_ckpt] == step) {
      r.curve.points.push_back(evaluate_policy(r.policy, validation, vt, step, cfg, tokenizer, registry));
      ++next_ckpt;
    }
  };
  record(0);
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(cfg.batch_size));
    for (auto& i : idx) i = pick(rng);
    const auto b = take(tt, torch::tensor(idx, torch::kLong));
    const auto logits = r.policy->forward(b.obs, b.language, b.embodiment, b.tokens);
    const auto loss = torch::nn::functional::cross_entropy(logits.reshape({-1, s}), b.tokens.reshape({-1}));
    if (!std::isfinite(loss.item<double>()))
      throw std::runtime_error("divergence at step " + std::to_string(step) + ": non-finite loss");
    opt.zero_grad();
    loss.backward();
    opt.step();
    record(step);
  }
  return r;
}

ActionChunk decode_with_fallback(const TokenSequence& tokens, const Tokenizer& tokenizer, const EmbodimentSpec& target) {
  const int steps = tokenizer.horizon_steps(target);
  bool valid = !tokens.codes.empty();
  const auto fixed = tokenizer.fixed_length();
  for (const auto& row : tokens.codes) {
    if (fixed && row.size() != *fixed) valid = false;
    for (auto c : row)
      if (c < 0 || c >= tokenizer.vocab_size()) valid = false;
  }
  if (valid) {
    try {
      auto out = tokenizer.decode(tokens, target);
      if (out.actions.rows() == steps && out.actions.cols() == target.action_dim && out.actions.allFinite()) return out;
    } catch (const std::exception&) {
    }
  }
  return zero_chunk(target, steps);
}

PerturbationProfile perturbation_experiment(ToyPolicy& policy, const Tokenizer& tokenizer, const PolicyData& data,
                                            const EmbodimentRegistry& registry, const std::vector<int>& positions,
                                            int trials, std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("need at least 2 trials");
  if (data.size() == 0) throw std::invalid_argument("no data");
  for (int j : positions)
    if (j < 0 || j >= policy->length()) throw std::out_of_range("perturbation position out of range");
  // trial t uses sample t mod N
  std::vector<std::int64_t> idx(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) idx[t] = t % static_cast<std::int64_t>(data.size());
  PolicyData sub;
  sub.observations.resize(trials, data.observations.cols());
  for (int t = 0; t < trials; ++t) {
    sub.observations.row(t) = data.observations.row(idx[t]);
    sub.language.push_back(data.language[idx[t]]);
    sub.embodiment.push_back(data.embodiment[idx[t]]);
    sub.tokens.push_back(data.tokens[idx[t]]);
    sub.targets.push_back(data.targets[idx[t]]);
  }
  const auto st = to_tensors(sub);

  PerturbationProfile p;
  p.positions = positions;
  p.trials = trials;
  p.baseline_error = decoded_l1(generate(policy, st), sub, 0, tokenizer, registry, nullptr);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    std::vector<double> errs;
    const auto rows = generate(policy, st, positions[k], seed + 7919ULL * (k + 1));
    const double mean = decoded_l1(rows, sub, 0, tokenizer, registry, &errs);
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errs.size() - 1);
    p.mean_error.push_back(mean);
    p.std_error.push_back(std::sqrt(var / static_cast<double>(errs.size())));
    p.samples.push_back(std::move(errs));
  }
  return p;
}

std::string PerturbationProfile::csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "position,mean_l1,std_error,trials\n";
  os << "none," << baseline_error << ",0," << trials << '\n';
  for (std::size_t k = 0; k < positions.size(); ++k)
    os << positions[k] << ',' << mean_error[k] << ',' << std_error[k] << ',' << trials << '\n';
  return os.str();
}

ProfileTrend profile_trend(const PerturbationProfile& p) {
  ProfileTrend t;
  if (p.positions.size() < 2) throw std::invalid_argument("trend needs at least two positions");
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < p.positions.size(); ++k)
    for (double e : p.samples[k]) {
      xs.push_back(p.positions[k]);
      ys.push_back(e);
    }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  t.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (my + t.slope * (xs[i] - mx));
    rss += r * r;
  }
  t.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  t.mean = my;
  const std::size_t half = p.positions.size() / 2;
  double early = 0.0, late = 0.0;
  for (std::size_t k = 0; k < p.positions.size(); ++k) (k < half ? early : late) += p.mean_error[k];
  t.early_mean = early / static_cast<double>(half);
  t.late_mean = late / static_cast<double>(p.positions.size() - half);
  return t;
}

}  // namespace actioncodec
