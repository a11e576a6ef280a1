#include "actioncodec/metrics.hpp"

#include "actioncodec/info.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace actioncodec {

double multiset_overlap(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  const std::size_t denom = std::max(a.size(), b.size());
  if (denom == 0) return 1.0;
  std::unordered_map<std::int32_t, std::int64_t> counts;
  for (auto c : a) ++counts[c];
  std::size_t shared = 0;
  for (auto c : b) {
    auto it = counts.find(c);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++shared;
    }
  }
  return static_cast<double>(shared) / static_cast<double>(denom);
}

ORReport overlap_rate(std::span<const TokenSequence> tokens, std::span<const std::optional<std::size_t>> successor,
                      int level) {
  if (tokens.size() != successor.size()) throw std::invalid_argument("token/successor count mismatch");
  ORReport r;
  double sum = 0.0;
  double pos_sum = 0.0;
  bool positional = true;
  std::map<int, double> emb_sum;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!successor[i]) continue;
    const auto& a = tokens[i];
    const auto& b = tokens[*successor[i]];
    if (level >= a.levels() || level >= b.levels()) throw std::invalid_argument("requested token level not present");
    const auto& ca = a.codes[level];
    const auto& cb = b.codes[level];
    const double o = multiset_overlap(ca, cb);
    sum += o;
    emb_sum[a.embodiment_index] += o;
    ++r.per_embodiment_pairs[a.embodiment_index];
    if (ca.size() == cb.size() && !ca.empty()) {
      std::size_t eq = 0;
      for (std::size_t k = 0; k < ca.size(); ++k) eq += ca[k] == cb[k];
      pos_sum += static_cast<double>(eq) / static_cast<double>(ca.size());
    } else {
      positional = false;
    }
    ++r.n_pairs;
  }
  if (r.n_pairs == 0) throw std::invalid_argument("empty pair set");
  r.overlap_rate = sum / static_cast<double>(r.n_pairs);
  if (positional) r.positional_match = pos_sum / static_cast<double>(r.n_pairs);
  for (const auto& [e, s] : emb_sum) r.per_embodiment[e] = s / static_cast<double>(r.per_embodiment_pairs[e]);
  return r;
}

ORReport overlap_rate(const Tokenizer& tokenizer, const ChunkedSet& chunks, int level) {
  const auto tokens = tokenizer.encode_batch(chunks.chunks);
  return overlap_rate(tokens, chunks.successor, level);
}

double artifact_entropy(const Tokenizer& tokenizer, const ActionChunk& chunk, double sigma, int m, std::uint64_t seed,
                        int level) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  if (m < 1) throw std::invalid_argument("sample count must be >= 1");
  if (!chunk.actions.allFinite()) throw std::invalid_argument("non-finite actions");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ActionChunk> noisy(static_cast<std::size_t>(m), chunk);
  if (sigma > 0.0) {
    for (auto& c : noisy)
      for (Eigen::Index i = 0; i < c.actions.size(); ++i) c.actions.data()[i] += sigma * normal(rng);
  }
  const auto tokens = tokenizer.encode_batch(noisy);
  std::vector<std::vector<std::int32_t>> seqs;
  seqs.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (level >= t.levels()) throw std::invalid_argument("requested token level not present");
    seqs.push_back(t.codes[level]);
  }
  return plugin_positional_entropy_sum(seqs);
}

double capacity_bound(std::int64_t n, std::int64_t vocab) {
  if (n < 1 || vocab < 1) throw std::invalid_argument("capacity_bound needs n, S >= 1");
  return static_cast<double>(n) * std::log2(static_cast<double>(vocab));
}

namespace {

// Velocity of dimension d sampled at normalized times grid[k], linear
// interpolation between step midpoints, clamped at the ends.
std::vector<double> resampled_velocity(const ActionChunk& c, int d, const std::vector<double>& grid) {
  const int T = c.steps();
  const double span = c.timestamps.back() - c.timestamps.front();
  std::vector<double> u(T - 1), v(T - 1);
  for (int t = 0; t + 1 < T; ++t) {
    const double dt = c.timestamps[t + 1] - c.timestamps[t];
    u[t] = (0.5 * (c.timestamps[t] + c.timestamps[t + 1]) - c.timestamps.front()) / span;
    v[t] = (c.actions(t + 1, d) - c.actions(t, d)) / dt;
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double g : grid) {
    if (g <= u.front()) {
      out.push_back(v.front());
    } else if (g >= u.back()) {
      out.push_back(v.back());
    } else {
      const auto hi = static_cast<std::size_t>(std::upper_bound(u.begin(), u.end(), g) - u.begin());
      const double w = (g - u[hi - 1]) / (u[hi] - u[hi - 1]);
      out.push_back((1.0 - w) * v[hi - 1] + w * v[hi]);
    }
  }
  return out;
}

}  // namespace

double velocity_profile_cosine(const ActionChunk& a, const ActionChunk& b, int samples) {
  if (a.steps() < 2 || b.steps() < 2) throw std::invalid_argument("velocity needs at least 2 steps");
  if (samples < 2) throw std::invalid_argument("samples must be >= 2");
  if (static_cast<int>(a.timestamps.size()) != a.steps() || static_cast<int>(b.timestamps.size()) != b.steps())
    throw std::invalid_argument("timestamps do not match steps");
  std::vector<double> grid(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) grid[k] = static_cast<double>(k) / (samples - 1);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int d = 0; d < std::min(a.dim(), b.dim()); ++d) {
    const auto va = resampled_velocity(a, d, grid);
    const auto vb = resampled_velocity(b, d, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      dot += va[k] * vb[k];
      na += va[k] * va[k];
      nb += vb[k] * vb[k];
    }
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("zero velocity profile");
  return dot / std::sqrt(na * nb);
}

double recon_error(const Tokenizer& tokenizer, std::span<const ActionChunk> chunks, const EmbodimentRegistry& registry,
                   ErrorNorm norm) {
  double total = 0.0;
  std::size_t count = 0;
  // Group by embodiment so batch decoders see one target at a time.
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < chunks.size(); ++i) groups[chunks[i].embodiment_index].push_back(i);
  for (const auto& [emb, idx] : groups) {
    const auto& spec = registry.by_index(emb);
    std::vector<ActionChunk> batch;
    batch.reserve(idx.size());
    for (auto i : idx) batch.push_back(chunks[i]);
    const auto tokens = tokenizer.encode_batch(batch);
    const auto recon = tokenizer.decode_batch(tokens, spec);
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto& a = batch[j].actions;
      const auto& b = recon[j].actions;
      if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::runtime_error("reconstruction shape mismatch");
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        const double e = a.data()[k] - b.data()[k];
        total += norm == ErrorNorm::kL1 ? std::abs(e) : e * e;
      }
      count += static_cast<std::size_t>(a.size());
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

ThroughputReport throughput_latency(const Tokenizer& tokenizer, std::span<const ActionChunk> chunks,
                                    const EmbodimentRegistry& registry, double per_token_delay_s, int trials) {
  if (trials < 10) throw std::invalid_argument("throughput_latency needs at least 10 trials");
  if (chunks.empty()) throw std::invalid_argument("no chunks");
  using clock = std::chrono::steady_clock;

  const auto tokens = tokenizer.encode_batch(chunks);
  double mean = 0.0;
  for (const auto& t : tokens) mean += static_cast<double>(t.flatten().size());
  mean /= static_cast<double>(tokens.size());
  double var = 0.0;
  for (const auto& t : tokens) {
    const double d = static_cast<double>(t.flatten().size()) - mean;
    var += d * d;
  }
  var /= static_cast<double>(tokens.size());

  ThroughputReport r;
  r.budget_mean = mean;
  r.budget_std = std::sqrt(var);
  double enc = 0.0;
  double dec = 0.0;
  double horizon = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto& c = chunks[static_cast<std::size_t>(t) % chunks.size()];
    const auto& spec = registry.by_index(c.embodiment_index);
    const auto t0 = clock::now();
    const auto tok = tokenizer.encode(c);
    const auto t1 = clock::now();
    (void)tokenizer.decode(tok, spec);
    const auto t2 = clock::now();
    enc += std::chrono::duration<double>(t1 - t0).count();
    dec += std::chrono::duration<double>(t2 - t1).count();
    horizon += tokenizer.horizon_steps(spec);
  }
  r.encode_s = enc / trials;
  r.decode_s = dec / trials;
  r.horizon = static_cast<int>(std::lround(horizon / trials));
  r.latency_s = r.budget_mean * per_token_delay_s + r.decode_s;
  r.actions_per_s = r.latency_s > 0.0 ? (horizon / trials) / r.latency_s : 0.0;
  return r;
}

}  // namespace actioncodec
