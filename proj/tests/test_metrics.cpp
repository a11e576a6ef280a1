#include "actioncodec/baselines.hpp"
#include "actioncodec/info.hpp"
#include "actioncodec/metrics.hpp"

#include "doctest.h"
#include "stubs.hpp"

#include <cmath>

using namespace actioncodec;
using namespace stubs;

TEST_CASE("multiset overlap") {
  const std::vector<std::int32_t> a{1, 1, 2, 3};
  const std::vector<std::int32_t> b{1, 2, 2, 4};
  CHECK(multiset_overlap(a, b) == doctest::Approx(0.5));
  CHECK(multiset_overlap(a, a) == 1.0);
  const std::vector<std::int32_t> c{7, 8};
  CHECK(multiset_overlap(a, c) == 0.0);
  const std::vector<std::int32_t> shorter{1};
  CHECK(multiset_overlap(a, shorter) == doctest::Approx(0.25));
}

TEST_CASE("overlap rate: identical, disjoint, relabeled and empty") {
  std::vector<TokenSequence> toks{{{{1, 2, 3}}, 0}, {{{1, 2, 3}}, 0}, {{{4, 5, 6}}, 0}};
  std::vector<std::optional<std::size_t>> succ{1, 2, std::nullopt};
  const auto r = overlap_rate(toks, succ);
  CHECK(r.n_pairs == 2);
  CHECK(r.overlap_rate == doctest::Approx(0.5));
  REQUIRE(r.positional_match);
  CHECK(*r.positional_match == doctest::Approx(0.5));
  CHECK(r.per_embodiment.at(0) == doctest::Approx(0.5));

  auto relabeled = toks;
  for (auto& t : relabeled)
    for (auto& c : t.codes[0]) c = (c * 7 + 3) % 11;
  CHECK(overlap_rate(relabeled, succ).overlap_rate == r.overlap_rate);

  std::vector<std::optional<std::size_t>> none(3);
  CHECK_THROWS(overlap_rate(toks, none));

  const auto set = linked_set(12);
  ConstantTokenizer constant;
  CHECK(overlap_rate(constant, set).overlap_rate == 1.0);
}

TEST_CASE("artifact entropy calibration") {
  const auto set = linked_set(3);
  SignTokenizer sign;
  CHECK(artifact_entropy(sign, set.chunks[0], 0.0, 50, 1) == 0.0);
  ConstantTokenizer constant;
  CHECK(artifact_entropy(constant, set.chunks[0], 0.5, 50, 1) == 0.0);

  ActionChunk zero;
  zero.actions = Matrix::Zero(1, 1);
  zero.timestamps = {0.0};
  const double h = artifact_entropy(sign, zero, 10.0, 10000, 3);
  CHECK(std::abs(h - 1.0) <= 0.05);

  ActionChunk bad = zero;
  bad.actions(0, 0) = std::nan("");
  CHECK_THROWS(artifact_entropy(sign, bad, 0.1, 10, 0));
  CHECK_THROWS(artifact_entropy(sign, zero, -0.1, 10, 0));
}

TEST_CASE("capacity bound") {
  CHECK(capacity_bound(16, 2048) == doctest::Approx(176.0).epsilon(1e-15));
  CHECK(capacity_bound(1, 2) == 1.0);
  CHECK_THROWS(capacity_bound(0, 2));
}

TEST_CASE("reconstruction error stubs") {
  const auto set = linked_set(5);
  const auto reg = registry();
  IdentityTokenizer id;
  CHECK(recon_error(id, set.chunks, reg, ErrorNorm::kL1) == 0.0);
  ActionChunk unit;
  unit.actions = Matrix::Constant(4, 2, 1.0);
  unit.timestamps = chunk_timestamps(4, 4.0);
  std::vector<ActionChunk> units{unit, unit};
  ZeroTokenizer zero;
  CHECK(recon_error(zero, units, reg, ErrorNorm::kL1) == 1.0);
  CHECK(recon_error(zero, units, reg, ErrorNorm::kL2) == 1.0);
}

TEST_CASE("throughput model") {
  const auto reg = registry();
  const auto set = linked_set(10);
  BinningTokenizer bin(BinningConfig{1000, 4});
  const auto a = throughput_latency(bin, set.chunks, reg, 0.02, 10);
  CHECK(a.budget_mean == 8.0);
  CHECK(a.budget_std == 0.0);
  CHECK(a.horizon == 4);
  CHECK(a.latency_s == doctest::Approx(a.budget_mean * 0.02 + a.decode_s));
  CHECK_THROWS(throughput_latency(bin, set.chunks, reg, 0.02, 9));
  // with decode time negligible against the delay, halving the delay doubles throughput
  const auto slow = throughput_latency(bin, set.chunks, reg, 1.0, 10);
  const auto fast = throughput_latency(bin, set.chunks, reg, 0.5, 10);
  CHECK(fast.actions_per_s / slow.actions_per_s == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("plug-in capacity chain on sampled corpora") {
  std::mt19937_64 rng(9);
  for (int c = 0; c < 10; ++c) {
    std::uniform_int_distribution<int> code(0, 3 + c);
    std::vector<std::vector<std::int32_t>> corpus(200, std::vector<std::int32_t>(4));
    for (auto& s : corpus)
      for (auto& x : s) x = code(rng);
    const double joint = plugin_sequence_entropy(corpus);
    const double sum = plugin_positional_entropy_sum(corpus);
    CHECK(joint <= sum + 1e-12);
    CHECK(sum <= capacity_bound(4, 4 + c) + 1e-12);
  }
}

TEST_CASE("velocity profile cosine across rates") {
  auto sine = [](int steps, double hz, int dim, double phase) {
    ActionChunk c;
    c.timestamps = chunk_timestamps(steps, hz);
    c.actions.resize(steps, dim);
    for (int t = 0; t < steps; ++t)
      for (int d = 0; d < dim; ++d) c.actions(t, d) = std::sin(2.0 * M_PI * c.timestamps[t] / c.timestamps.back() + phase + d);
    return c;
  };
  const auto slow = sine(20, 20.0, 3, 0.0);
  const auto fast = sine(60, 60.0, 2, 0.0);
  CHECK(velocity_profile_cosine(slow, slow) == doctest::Approx(1.0).epsilon(1e-12));
  // same motion sampled at three times the rate, fewer dimensions
  CHECK(velocity_profile_cosine(slow, fast) > 0.98);
  // reversed motion
  auto neg = slow;
  neg.actions = -neg.actions;
  CHECK(velocity_profile_cosine(slow, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  auto flat = slow;
  flat.actions.setZero();
  CHECK_THROWS(velocity_profile_cosine(slow, flat));
}
