#include "actioncodec/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace actioncodec {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (a + 0x1234567ULL));
  h = splitmix64(h ^ (b + 0x89abcdefULL));
  h = splitmix64(h ^ (c + 0x13579bdfULL));
  return h;
}

double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

struct TaskMotion {
  // [dim][order-1]
  std::vector<std::vector<double>> poly;
  // [dim][k] -> amplitude, frequency (Hz), phase
  std::vector<std::vector<std::array<double, 3>>> waves;
  // [dim][goal_dim]
  std::vector<std::vector<double>> goal_weights;
};

TaskMotion draw_task(const SynthConfig& cfg, int dims, std::uint64_t seed, int task) {
  std::mt19937_64 rng(derive_seed(seed, 1, static_cast<std::uint64_t>(task)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  std::uniform_real_distribution<double> freq(0.25, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  TaskMotion m;
  m.poly.assign(dims, std::vector<double>(cfg.poly_order));
  m.waves.assign(dims, std::vector<std::array<double, 3>>(cfg.sinusoids));
  m.goal_weights.assign(dims, std::vector<double>(cfg.goal_dim));
  for (int d = 0; d < dims; ++d) {
    for (auto& c : m.poly[d]) c = normal(rng);
    for (auto& w : m.waves[d]) w = {amp(rng), freq(rng), phase(rng)};
    for (auto& g : m.goal_weights[d]) g = normal(rng);
  }
  return m;
}

double motion_value(const TaskMotion& m, const std::vector<double>& goal, int d, double t, double duration) {
  const double s = t / duration;
  double v = 0.0;
  double sp = 1.0;
  for (double c : m.poly[d]) {
    sp *= s;
    v += c * sp;
  }
  for (const auto& w : m.waves[d]) v += w[0] * std::sin(2.0 * std::numbers::pi * w[1] * t + w[2]);
  double g = 0.0;
  for (std::size_t i = 0; i < goal.size(); ++i) g += m.goal_weights[d][i] * goal[i];
  return v + g * smoothstep(s);
}

}  // namespace

int EmbodimentSpec::chunk_steps() const { return static_cast<int>(std::lround(control_hz * chunk_duration)); }

void EmbodimentSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("embodiment name must not be empty");
  if (index < 0) throw std::invalid_argument("embodiment index must be non-negative");
  if (!(control_hz > 0.0) || !std::isfinite(control_hz)) throw std::invalid_argument("control_hz must be positive");
  if (action_dim < 1) throw std::invalid_argument("action_dim must be positive");
  if (!(chunk_duration > 0.0) || !std::isfinite(chunk_duration))
    throw std::invalid_argument("chunk_duration must be positive");
  if (chunk_steps() < 1) throw std::invalid_argument("control_hz * chunk_duration must round to at least 1 step");
}

EmbodimentRegistry::EmbodimentRegistry(std::vector<EmbodimentSpec> specs) {
  for (auto& s : specs) add(std::move(s));
}

void EmbodimentRegistry::add(EmbodimentSpec spec) {
  spec.validate();
  for (const auto& s : specs_) {
    if (s.index == spec.index) throw std::invalid_argument("duplicate embodiment index " + std::to_string(spec.index));
    if (s.name == spec.name) throw std::invalid_argument("duplicate embodiment name " + spec.name);
  }
  specs_.push_back(std::move(spec));
}

const EmbodimentSpec& EmbodimentRegistry::by_index(int index) const {
  for (const auto& s : specs_)
    if (s.index == index) return s;
  throw std::out_of_range("unregistered embodiment index " + std::to_string(index));
}

const EmbodimentSpec& EmbodimentRegistry::by_name(const std::string& name) const {
  for (const auto& s : specs_)
    if (s.name == name) return s;
  throw std::out_of_range("unregistered embodiment " + name);
}

bool EmbodimentRegistry::contains(int index) const {
  return std::any_of(specs_.begin(), specs_.end(), [&](const auto& s) { return s.index == index; });
}

int EmbodimentRegistry::max_action_dim() const {
  int d = 0;
  for (const auto& s : specs_) d = std::max(d, s.action_dim);
  return d;
}

int EmbodimentRegistry::index_capacity() const {
  int n = 0;
  for (const auto& s : specs_) n = std::max(n, s.index + 1);
  return n;
}

double sorted_percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("no data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DatasetStats compute_stats(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("no data");
  const auto dims = trajectories.front().actions.cols();
  std::size_t total = 0;
  for (const auto& t : trajectories) {
    if (t.embodiment != trajectories.front().embodiment)
      throw std::invalid_argument("compute_stats expects a single embodiment");
    if (t.actions.cols() != dims) throw std::invalid_argument("dimension mismatch");
    total += static_cast<std::size_t>(t.actions.rows());
  }
  if (total == 0) throw std::invalid_argument("no data");
  if (total < 100) throw std::invalid_argument("fewer than 100 action steps");

  DatasetStats stats;
  std::vector<double> column;
  column.reserve(total);
  for (Eigen::Index d = 0; d < dims; ++d) {
    column.clear();
    for (const auto& t : trajectories)
      for (Eigen::Index r = 0; r < t.actions.rows(); ++r) column.push_back(t.actions(r, d));
    std::sort(column.begin(), column.end());
    const double lo = sorted_percentile(column, 0.01);
    const double hi = sorted_percentile(column, 0.99);
    if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) throw std::invalid_argument("degenerate dimension");
    stats.low.push_back(lo);
    stats.high.push_back(hi);
  }
  return stats;
}

StatsTable compute_stats_per_embodiment(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("no data");
  std::map<std::string, std::vector<Trajectory>> groups;
  for (const auto& t : trajectories) groups[t.embodiment].push_back(t);
  StatsTable table;
  for (const auto& [name, group] : groups) table[name] = compute_stats(group);
  return table;
}

ActionChunk normalize(const ActionChunk& raw, const DatasetStats& stats) {
  if (static_cast<std::size_t>(raw.dim()) != stats.low.size()) throw std::invalid_argument("dimension mismatch");
  ActionChunk out = raw;
  for (Eigen::Index d = 0; d < raw.actions.cols(); ++d) {
    const double lo = stats.low[d];
    const double hi = stats.high[d];
    for (Eigen::Index r = 0; r < raw.actions.rows(); ++r) {
      const double v = 2.0 * (raw.actions(r, d) - lo) / (hi - lo) - 1.0;
      out.actions(r, d) = std::clamp(v, -1.0, 1.0);
    }
  }
  return out;
}

ActionChunk denormalize(const ActionChunk& normalized, const DatasetStats& stats) {
  if (static_cast<std::size_t>(normalized.dim()) != stats.low.size()) throw std::invalid_argument("dimension mismatch");
  ActionChunk out = normalized;
  for (Eigen::Index d = 0; d < normalized.actions.cols(); ++d) {
    const double lo = stats.low[d];
    const double hi = stats.high[d];
    for (Eigen::Index r = 0; r < normalized.actions.rows(); ++r)
      out.actions(r, d) = lo + (normalized.actions(r, d) + 1.0) * 0.5 * (hi - lo);
  }
  return out;
}

std::vector<double> chunk_timestamps(int steps, double control_hz) {
  std::vector<double> ts(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) ts[i] = static_cast<double>(i) / control_hz;
  return ts;
}

void ChunkedSet::append(const ChunkedSet& other) {
  const std::size_t base = chunks.size();
  chunks.insert(chunks.end(), other.chunks.begin(), other.chunks.end());
  for (const auto& s : other.successor) successor.push_back(s ? std::optional<std::size_t>(*s + base) : std::nullopt);
  context.insert(context.end(), other.context.begin(), other.context.end());
  trajectory.insert(trajectory.end(), other.trajectory.begin(), other.trajectory.end());
  offset.insert(offset.end(), other.offset.begin(), other.offset.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

ChunkedSet ChunkedSet::subset(std::span<const std::size_t> indices) const {
  std::map<std::size_t, std::size_t> where;
  for (std::size_t k = 0; k < indices.size(); ++k) where.emplace(indices[k], k);
  ChunkedSet out;
  for (std::size_t i : indices) {
    out.chunks.push_back(chunks.at(i));
    std::optional<std::size_t> next;
    if (successor[i])
      if (const auto it = where.find(*successor[i]); it != where.end()) next = it->second;
    out.successor.push_back(next);
    out.context.push_back(context[i]);
    out.trajectory.push_back(trajectory[i]);
    out.offset.push_back(offset[i]);
  }
  out.warnings = warnings;
  return out;
}

ChunkedSet ChunkedSet::prefix(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, chunks.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx);
}

ChunkedSet ChunkedSet::for_embodiment(int index) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < chunks.size(); ++i)
    if (chunks[i].embodiment_index == index) idx.push_back(i);
  return subset(idx);
}

std::vector<std::size_t> ChunkedSet::linked_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < successor.size(); ++i)
    if (successor[i]) out.push_back(i);
  return out;
}

ChunkedSet chunk_trajectory(const Trajectory& traj, const EmbodimentSpec& spec, int stride_steps,
                            std::optional<int> horizon) {
  if (stride_steps < 1) throw std::invalid_argument("stride_steps must be >= 1");
  const int T = horizon.value_or(spec.chunk_steps());
  if (T < 1) throw std::invalid_argument("horizon must be >= 1");
  ChunkedSet set;
  if (stride_steps >= T) set.warnings.emplace_back("no temporal overlap");
  if (traj.steps() < T) return set;

  const auto ts = chunk_timestamps(T, spec.control_hz);
  const int count = (traj.steps() - T) / stride_steps + 1;
  for (int k = 0; k < count; ++k) {
    const int start = k * stride_steps;
    ActionChunk c;
    c.actions = traj.actions.middleRows(start, T);
    c.timestamps = ts;
    c.embodiment_index = spec.index;
    set.chunks.push_back(std::move(c));
    set.successor.push_back(k + 1 < count ? std::optional<std::size_t>(static_cast<std::size_t>(k + 1))
                                          : std::nullopt);
    ChunkContext ctx;
    ctx.language_id = traj.language_id;
    ctx.task_id = traj.task_id;
    if (traj.observation.rows() > start) {
      const auto row = traj.observation.row(start);
      ctx.observation.assign(row.data(), row.data() + row.size());
    }
    set.context.push_back(std::move(ctx));
    set.trajectory.push_back(0);
    set.offset.push_back(start);
  }
  return set;
}

ChunkedSet chunk_dataset(std::span<const Trajectory> trajectories, const EmbodimentRegistry& registry,
                         const StatsTable& stats, int stride_steps, std::optional<int> horizon) {
  ChunkedSet all;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& traj = trajectories[i];
    const auto& spec = registry.by_name(traj.embodiment);
    const auto it = stats.find(traj.embodiment);
    if (it == stats.end()) throw std::invalid_argument("missing stats for embodiment " + traj.embodiment);
    ChunkedSet part = chunk_trajectory(traj, spec, stride_steps, horizon);
    for (auto& c : part.chunks) c = normalize(c, it->second);
    for (auto& t : part.trajectory) t = i;
    all.append(part);
  }
  std::sort(all.warnings.begin(), all.warnings.end());
  all.warnings.erase(std::unique(all.warnings.begin(), all.warnings.end()), all.warnings.end());
  return all;
}

void SynthConfig::validate() const {
  if (embodiments.empty()) throw std::invalid_argument("synth config needs at least one embodiment");
  EmbodimentRegistry check(embodiments);
  if (n_tasks < 2) throw std::invalid_argument("synth config needs at least 2 tasks");
  if (trajectories_per_task < 1) throw std::invalid_argument("trajectories_per_task must be >= 1");
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration_s must be positive");
  if (sinusoids < 0 || poly_order < 0 || sinusoids + poly_order < 1)
    throw std::invalid_argument("need at least one basis motion");
  if (goal_dim < 1) throw std::invalid_argument("goal_dim must be >= 1");
  if (!(goal_range >= 0.0)) throw std::invalid_argument("goal_range must be non-negative");
  if (!(amplitude > 0.0)) throw std::invalid_argument("amplitude must be positive");
  if (!(jitter >= 0.0)) throw std::invalid_argument("jitter must be non-negative");
  for (const auto& e : embodiments) {
    if (std::lround(duration_s * e.control_hz) < e.chunk_steps())
      throw std::invalid_argument("duration_s too short for one chunk of " + e.name);
  }
}

int observation_dim(const SynthConfig& config) { return config.goal_dim + config.n_tasks + 3; }

std::vector<Trajectory> synth_dataset(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  int dims = 0;
  for (const auto& e : config.embodiments) dims = std::max(dims, e.action_dim);

  constexpr int kCanonicalGrid = 256;
  std::vector<Trajectory> out;
  for (int task = 0; task < config.n_tasks; ++task) {
    const TaskMotion motion = draw_task(config, dims, seed, task);
    for (int sample = 0; sample < config.trajectories_per_task; ++sample) {
      std::mt19937_64 goal_rng(derive_seed(seed, 2, static_cast<std::uint64_t>(task), static_cast<std::uint64_t>(sample)));
      std::uniform_real_distribution<double> goal_dist(-config.goal_range, config.goal_range);
      std::vector<double> goal(static_cast<std::size_t>(config.goal_dim));
      for (auto& g : goal) g = goal_dist(goal_rng);

      // Scale is fixed on a canonical grid so every embodiment renders the same motion.
      double mean_abs = 0.0;
      for (int i = 0; i < kCanonicalGrid; ++i) {
        const double t = config.duration_s * static_cast<double>(i) / kCanonicalGrid;
        for (int d = 0; d < dims; ++d) mean_abs += std::abs(motion_value(motion, goal, d, t, config.duration_s));
      }
      mean_abs /= static_cast<double>(kCanonicalGrid * dims);
      const double scale = config.amplitude / std::max(mean_abs, 1e-12);

      for (std::size_t e = 0; e < config.embodiments.size(); ++e) {
        const auto& spec = config.embodiments[e];
        const int steps = static_cast<int>(std::lround(config.duration_s * spec.control_hz));
        std::mt19937_64 jitter_rng(derive_seed(seed, 3, static_cast<std::uint64_t>(task * 100003 + sample),
                                               static_cast<std::uint64_t>(spec.index)));
        std::normal_distribution<double> jitter(0.0, 1.0);

        Trajectory traj;
        traj.embodiment = spec.name;
        traj.task_id = task;
        traj.language_id = task;
        traj.actions.resize(steps, spec.action_dim);
        traj.observation.resize(steps, observation_dim(config));
        for (int i = 0; i < steps; ++i) {
          const double t = static_cast<double>(i) / spec.control_hz;
          for (int d = 0; d < spec.action_dim; ++d) {
            double v = scale * motion_value(motion, goal, d, t, config.duration_s);
            if (config.jitter > 0.0) v += config.jitter * jitter(jitter_rng);
            traj.actions(i, d) = v;
          }
          const double progress = t / config.duration_s;
          int col = 0;
          for (double g : goal) traj.observation(i, col++) = g;
          for (int k = 0; k < config.n_tasks; ++k) traj.observation(i, col++) = k == task ? 1.0 : 0.0;
          traj.observation(i, col++) = progress;
          traj.observation(i, col++) = std::sin(2.0 * std::numbers::pi * progress);
          traj.observation(i, col++) = std::cos(2.0 * std::numbers::pi * progress);
        }
        out.push_back(std::move(traj));
      }
    }
  }
  return out;
}

TrajectorySplit split_trajectories(std::span<const Trajectory> trajectories, int holdout_every) {
  if (holdout_every < 2) throw std::invalid_argument("holdout_every must be >= 2");
  TrajectorySplit split;
  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const int k = seen[trajectories[i].embodiment]++;
    if (k % holdout_every == holdout_every - 1)
      split.validation.push_back(trajectories[i]);
    else
      split.train.push_back(trajectories[i]);
  }
  return split;
}

}  // namespace actioncodec
