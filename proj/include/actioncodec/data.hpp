#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace actioncodec {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Static description of one robot platform. `index` selects the soft-prompt row.
struct EmbodimentSpec {
  std::string name;
  int index = 0;
  double control_hz = 20.0;
  int action_dim = 7;
  double chunk_duration = 1.0;

  // T = round(control_hz * chunk_duration)
  int chunk_steps() const;
  void validate() const;
};

class EmbodimentRegistry {
 public:
  EmbodimentRegistry() = default;
  explicit EmbodimentRegistry(std::vector<EmbodimentSpec> specs);

  void add(EmbodimentSpec spec);

  const EmbodimentSpec& by_index(int index) const;
  const EmbodimentSpec& by_name(const std::string& name) const;
  bool contains(int index) const;

  std::span<const EmbodimentSpec> specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }
  int max_action_dim() const;
  // One past the largest registered index; soft-prompt tables are sized by it.
  int index_capacity() const;

 private:
  std::vector<EmbodimentSpec> specs_;
};

struct Trajectory {
  std::string embodiment;
  Matrix actions;      // steps x D (raw units)
  Matrix observation;  // steps x obs_dim
  int language_id = 0;
  int task_id = 0;

  int steps() const { return static_cast<int>(actions.rows()); }
};

struct ActionChunk {
  Matrix actions;                  // T x D
  std::vector<double> timestamps;  // seconds, starting at 0
  int embodiment_index = 0;

  int steps() const { return static_cast<int>(actions.rows()); }
  int dim() const { return static_cast<int>(actions.cols()); }
};

// Per-dimension 1st/99th percentile bounds for one embodiment.
struct DatasetStats {
  std::vector<double> low;
  std::vector<double> high;
};

using StatsTable = std::map<std::string, DatasetStats>;

// Linear-interpolation percentile over an already sorted sample, q in [0, 1].
double sorted_percentile(std::span<const double> sorted, double q);

// All trajectories must belong to one embodiment. Throws "no data",
// "fewer than 100 action steps" or "degenerate dimension".
DatasetStats compute_stats(std::span<const Trajectory> trajectories);
StatsTable compute_stats_per_embodiment(std::span<const Trajectory> trajectories);

// Affine map [low, high] -> [-1, 1] per dimension, clipped.
ActionChunk normalize(const ActionChunk& raw, const DatasetStats& stats);
ActionChunk denormalize(const ActionChunk& normalized, const DatasetStats& stats);

std::vector<double> chunk_timestamps(int steps, double control_hz);

struct ChunkContext {
  int language_id = 0;
  int task_id = 0;
  std::vector<double> observation;  // observation at the chunk's first step
};

// Chunks in dataset order with adjacency links (successor = chunk starting
// `stride` steps later in the same trajectory).
struct ChunkedSet {
  std::vector<ActionChunk> chunks;
  std::vector<std::optional<std::size_t>> successor;
  std::vector<ChunkContext> context;
  std::vector<std::size_t> trajectory;
  std::vector<int> offset;
  std::vector<std::string> warnings;

  std::size_t size() const { return chunks.size(); }
  void append(const ChunkedSet& other);
  // Chunks at `indices`, in that order; links that leave the selection are dropped.
  ChunkedSet subset(std::span<const std::size_t> indices) const;
  ChunkedSet prefix(std::size_t n) const;
  ChunkedSet for_embodiment(int index) const;
  // Indices whose successor link is present.
  std::vector<std::size_t> linked_indices() const;
};

// Sliding windows of `horizon` steps (default: the embodiment's chunk_steps()).
// A stride >= horizon records the warning "no temporal overlap".
ChunkedSet chunk_trajectory(const Trajectory& traj, const EmbodimentSpec& spec, int stride_steps,
                            std::optional<int> horizon = std::nullopt);

// Chunks every trajectory and normalizes with the per-embodiment stats.
ChunkedSet chunk_dataset(std::span<const Trajectory> trajectories, const EmbodimentRegistry& registry,
                         const StatsTable& stats, int stride_steps, std::optional<int> horizon = std::nullopt);

struct SynthConfig {
  std::vector<EmbodimentSpec> embodiments;
  int n_tasks = 4;
  int trajectories_per_task = 16;
  double duration_s = 4.0;
  int sinusoids = 2;
  int poly_order = 3;
  int goal_dim = 3;
  double goal_range = 1.0;
  double amplitude = 0.5;
  double jitter = 0.01;

  void validate() const;
};

// Deterministic multi-embodiment corpus; every (task, goal) sample is rendered
// once per embodiment at that embodiment's control frequency.
std::vector<Trajectory> synth_dataset(const SynthConfig& config, std::uint64_t seed);

// Observation layout: goal (goal_dim) | task one-hot (n_tasks) | progress, sin, cos.
int observation_dim(const SynthConfig& config);

// Deterministic split: every `holdout_every`-th trajectory of each embodiment
// goes to validation.
struct TrajectorySplit {
  std::vector<Trajectory> train;
  std::vector<Trajectory> validation;
};
TrajectorySplit split_trajectories(std::span<const Trajectory> trajectories, int holdout_every);

}  // namespace actioncodec
