#include "actioncodec/data.hpp"
#include "actioncodec/io.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace actioncodec;

namespace {

EmbodimentSpec arm(int index = 0, double hz = 20.0, int dim = 7) {
  return EmbodimentSpec{"arm" + std::to_string(index), index, hz, dim, 1.0};
}

Trajectory ramp(int steps, int dim, const std::string& emb = "arm0") {
  Trajectory t;
  t.embodiment = emb;
  t.actions.resize(steps, dim);
  t.observation = Matrix::Zero(steps, 2);
  for (int r = 0; r < steps; ++r)
    for (int c = 0; c < dim; ++c) t.actions(r, c) = r * 0.01 + c;
  return t;
}

}  // namespace

TEST_CASE("embodiment spec derives T and validates") {
  CHECK(arm(0, 20.0).chunk_steps() == 20);
  CHECK(EmbodimentSpec{"a", 0, 15.0, 7, 1.0}.chunk_steps() == 15);
  CHECK_THROWS(EmbodimentSpec{"a", 0, 0.0, 7, 1.0}.validate());
  CHECK_THROWS(EmbodimentSpec{"a", 0, 10.0, 0, 1.0}.validate());
  CHECK_THROWS(EmbodimentSpec{"a", 0, 1.0, 2, 0.1}.validate());  // T = 0
  CHECK_THROWS(EmbodimentSpec{"a", -1, 10.0, 2, 1.0}.validate());
}

TEST_CASE("registry rejects duplicate indices and unknown lookups") {
  EmbodimentRegistry r;
  r.add(arm(0));
  r.add(arm(2, 10.0, 3));
  CHECK_THROWS(r.add(arm(0)));
  CHECK(r.by_index(2).action_dim == 3);
  CHECK(r.by_name("arm0").index == 0);
  CHECK_THROWS_WITH(r.by_index(1), "unregistered embodiment index 1");
  CHECK(r.max_action_dim() == 7);
  CHECK(r.index_capacity() == 3);
}

TEST_CASE("compute_stats errors") {
  std::vector<Trajectory> none;
  CHECK_THROWS_WITH(compute_stats(none), "no data");
  std::vector<Trajectory> shortish{ramp(50, 2)};
  CHECK_THROWS_WITH(compute_stats(shortish), "fewer than 100 action steps");
  Trajectory c = ramp(200, 1);
  c.actions.setConstant(0.3);
  std::vector<Trajectory> constant{c};
  CHECK_THROWS_WITH(compute_stats(constant), "degenerate dimension");
}

TEST_CASE("compute_stats matches sort-based percentile oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trajectory t = ramp(10000, 1);
  oracle::Vec xs;
  for (int i = 0; i < 10000; ++i) xs.push_back(t.actions(i, 0) = u(rng));
  std::vector<Trajectory> ts{t};
  const auto s = compute_stats(ts);
  CHECK(s.low[0] == doctest::Approx(oracle::percentile(xs, 0.01)).epsilon(1e-12));
  CHECK(s.high[0] == doctest::Approx(oracle::percentile(xs, 0.99)).epsilon(1e-12));
  CHECK(std::abs(s.low[0] - 0.01) < 0.02);
  CHECK(std::abs(s.high[0] - 0.99) < 0.02);

  // symmetric data
  Trajectory sym = ramp(4001, 1);
  for (int i = 0; i < 4001; ++i) sym.actions(i, 0) = -2.0 + 4.0 * i / 4000.0;
  std::vector<Trajectory> ss{sym};
  const auto st = compute_stats(ss);
  CHECK(st.low[0] == doctest::Approx(-st.high[0]).epsilon(1e-12));
}

TEST_CASE("normalize maps bounds, clips, and round-trips") {
  DatasetStats s{{-2.0, 0.0}, {2.0, 10.0}};
  ActionChunk c;
  c.actions.resize(4, 2);
  c.actions << -2.0, 0.0, 0.0, 5.0, 1.0, 7.5, 9.0, -4.0;
  const auto n = normalize(c, s);
  CHECK(n.actions(0, 0) == -1.0);
  CHECK(n.actions(0, 1) == -1.0);
  CHECK(n.actions(1, 0) == 0.0);
  CHECK(n.actions(1, 1) == 0.0);
  CHECK(n.actions(3, 0) == 1.0);   // clipped
  CHECK(n.actions(3, 1) == -1.0);  // clipped
  const auto back = denormalize(n, s);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 2; ++k) CHECK(back.actions(r, k) == doctest::Approx(c.actions(r, k)).epsilon(1e-12));
  DatasetStats wrong{{0.0}, {1.0}};
  CHECK_THROWS(normalize(c, wrong));
}

TEST_CASE("chunking windows, links and warnings") {
  const auto spec = arm(0, 20.0, 2);
  const auto traj = ramp(30, 2);
  const auto set = chunk_trajectory(traj, spec, 5);
  REQUIRE(set.size() == 3);
  CHECK(set.offset == std::vector<int>{0, 5, 10});
  CHECK(set.successor[0] == std::optional<std::size_t>(1));
  CHECK(set.successor[1] == std::optional<std::size_t>(2));
  CHECK(!set.successor[2]);
  CHECK(set.warnings.empty());
  for (const auto& c : set.chunks) {
    REQUIRE(c.timestamps.size() == 20);
    CHECK(c.timestamps.front() == 0.0);
    CHECK(c.timestamps.back() < spec.chunk_duration);
    for (std::size_t i = 1; i < c.timestamps.size(); ++i)
      CHECK(c.timestamps[i] - c.timestamps[i - 1] == doctest::Approx(0.05));
  }

  // stride = T: disjoint, still linked, and reassembly reproduces the prefix
  const auto long_traj = ramp(65, 2);
  const auto disjoint = chunk_trajectory(long_traj, spec, 20);
  REQUIRE(disjoint.size() == 3);
  CHECK(disjoint.successor[0].has_value());
  CHECK(!disjoint.warnings.empty());
  CHECK(disjoint.warnings.front() == "no temporal overlap");
  for (std::size_t i = 0; i < disjoint.size(); ++i)
    for (int r = 0; r < 20; ++r)
      for (int k = 0; k < 2; ++k) CHECK(disjoint.chunks[i].actions(r, k) == long_traj.actions(20 * i + r, k));

  CHECK(chunk_trajectory(ramp(10, 2), spec, 1).size() == 0);
  CHECK_THROWS(chunk_trajectory(traj, spec, 0));
}

TEST_CASE("synthetic dataset determinism, jitter and amplitude") {
  SynthConfig cfg;
  cfg.embodiments = {arm(0, 20.0, 7), arm(1, 10.0, 4)};
  cfg.n_tasks = 3;
  cfg.trajectories_per_task = 4;
  const auto a = synth_dataset(cfg, 11);
  const auto b = synth_dataset(cfg, 11);
  const auto c = synth_dataset(cfg, 12);
  REQUIRE(a.size() == 3 * 4 * 2);
  auto same = [](const std::vector<Trajectory>& x, const std::vector<Trajectory>& y) {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].actions != y[i].actions || x[i].observation != y[i].observation) return false;
    return true;
  };
  CHECK(same(a, b));
  CHECK(!same(a, c));
  for (const auto& t : a) {
    const int steps = t.embodiment == "arm0" ? 80 : 40;
    CHECK(t.steps() == steps);
    CHECK(t.observation.cols() == observation_dim(cfg));
    CHECK(t.language_id == t.task_id);
    CHECK(t.actions.allFinite());
  }

  // the amplitude contract
  SynthConfig big = cfg;
  big.embodiments = {arm(0, 20.0, 7)};
  big.n_tasks = 5;
  big.trajectories_per_task = 200;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : synth_dataset(big, 5)) {
    total += t.actions.cwiseAbs().sum();
    count += static_cast<std::size_t>(t.actions.size());
  }
  const double mean_abs = total / static_cast<double>(count);
  CHECK(mean_abs == doctest::Approx(big.amplitude).epsilon(0.2));

  SynthConfig bad = cfg;
  bad.n_tasks = 1;
  CHECK_THROWS(synth_dataset(bad, 0));
  bad = cfg;
  bad.embodiments.clear();
  CHECK_THROWS(synth_dataset(bad, 0));
}

TEST_CASE("zero jitter makes equal (task, goal) trajectories identical") {
  SynthConfig cfg;
  cfg.embodiments = {arm(0, 20.0, 3)};
  cfg.n_tasks = 2;
  cfg.trajectories_per_task = 6;
  cfg.jitter = 0.0;
  cfg.goal_range = 0.0;  // every goal equal
  const auto ts = synth_dataset(cfg, 2);
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t j = i + 1; j < ts.size(); ++j)
      if (ts[i].task_id == ts[j].task_id) CHECK(ts[i].actions == ts[j].actions);
}

TEST_CASE("dataset JSONL round trip is exact") {
  SynthConfig cfg;
  cfg.embodiments = {arm(0, 20.0, 3), arm(1, 10.0, 2)};
  cfg.n_tasks = 2;
  cfg.trajectories_per_task = 2;
  const auto ts = synth_dataset(cfg, 4);
  const auto dir = std::filesystem::temp_directory_path() / "actioncodec_test_io";
  std::filesystem::create_directories(dir);
  write_dataset_jsonl(dir / "d.jsonl", ts);
  const auto back = read_dataset_jsonl(dir / "d.jsonl");
  REQUIRE(back.size() == ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    CHECK(back[i].actions == ts[i].actions);
    CHECK(back[i].observation == ts[i].observation);
    CHECK(back[i].embodiment == ts[i].embodiment);
    CHECK(back[i].task_id == ts[i].task_id);
  }
  const EmbodimentRegistry reg(cfg.embodiments);
  const auto reg2 = registry_from_json(registry_to_json(reg));
  CHECK(reg2.size() == 2);
  CHECK(reg2.by_index(1).control_hz == 10.0);
  const auto stats = compute_stats_per_embodiment(ts);
  const auto stats2 = stats_from_json(stats_to_json(stats));
  CHECK(stats2.at("arm0").low == stats.at("arm0").low);
  CHECK(file_checksum(dir / "d.jsonl") == checksum_hex(read_text(dir / "d.jsonl")));
  std::filesystem::remove_all(dir);
}

TEST_CASE("chunk_dataset normalizes into [-1, 1] and links within trajectories") {
  SynthConfig cfg;
  cfg.embodiments = {arm(0, 20.0, 3), arm(1, 10.0, 2)};
  cfg.n_tasks = 2;
  cfg.trajectories_per_task = 4;
  const auto ts = synth_dataset(cfg, 9);
  const EmbodimentRegistry reg(cfg.embodiments);
  const auto set = chunk_dataset(ts, reg, compute_stats_per_embodiment(ts), 1);
  CHECK(set.size() > 0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(set.chunks[i].actions.maxCoeff() <= 1.0);
    CHECK(set.chunks[i].actions.minCoeff() >= -1.0);
    if (set.successor[i]) {
      const auto j = *set.successor[i];
      CHECK(set.trajectory[j] == set.trajectory[i]);
      CHECK(set.offset[j] == set.offset[i] + 1);
    }
  }
  const auto split = split_trajectories(ts, 4);
  CHECK(split.train.size() + split.validation.size() == ts.size());
  // both embodiments are held out, in equal numbers
  std::map<std::string, int> held;
  for (const auto& t : split.validation) ++held[t.embodiment];
  CHECK(held.size() == 2);
  CHECK(held["arm0"] == 2);
  CHECK(held["arm1"] == 2);
}

TEST_CASE("chunked set prefix drops links that leave it") {
  const auto spec = arm(0, 10.0, 2);
  const auto set = chunk_trajectory(ramp(20, 2), spec, 2);
  REQUIRE(set.size() > 4);
  const auto head = set.prefix(3);
  CHECK(head.size() == 3);
  CHECK(head.successor[0] == set.successor[0]);
  CHECK(head.successor[1] == set.successor[1]);
  CHECK_FALSE(head.successor[2].has_value());
  CHECK(head.chunks[2].actions == set.chunks[2].actions);
  CHECK(set.prefix(1000).size() == set.size());
  const std::vector<std::size_t> pick{4, 2, 3};
  const auto sub = set.subset(pick);
  CHECK(sub.chunks[0].actions == set.chunks[4].actions);
  CHECK_FALSE(sub.successor[0].has_value());
  CHECK(sub.successor[1] == std::optional<std::size_t>(2));
  CHECK(set.for_embodiment(0).size() == set.size());
  CHECK(set.for_embodiment(1).size() == 0);
}
