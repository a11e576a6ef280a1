#include "actioncodec/info.hpp"
#include "actioncodec/toy_world.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace actioncodec;

TEST_CASE("toy world construction and validation") {
  const auto w = build_toy_world({}, 7);
  const double sum = std::accumulate(w.p.begin(), w.p.end(), 0.0);
  CHECK(std::abs(sum - 1.0) < 1e-12);
  for (double p : w.p) CHECK(p >= 0.0);
  CHECK_THROWS(build_toy_world(ToyWorldShape{1, 3, 4, {3}}, 0));
  CHECK_THROWS(build_toy_world(ToyWorldShape{4, 17, 4, {3}}, 0));
  CHECK_THROWS(build_toy_world(ToyWorldShape{16, 16, 16, {16, 16}}, 0));  // > 1e6 cells
  ToyWorld bad = w;
  bad.p[0] += 0.1;
  CHECK_THROWS_WITH(bad.validate(), "unnormalized table");
}

TEST_CASE("marginals match an independent summation oracle") {
  const auto w = build_toy_world(ToyWorldShape{3, 2, 4, {3, 2}}, 5);
  for (const auto& vars : std::vector<std::vector<int>>{{0}, {2}, {0, 1}, {3, 4}, {0, 1, 2, 3, 4}, {4, 0}}) {
    CHECK(entropy_bits(marginal(w, vars)) == doctest::Approx(oracle::entropy(w.cards, w.p, vars)).epsilon(1e-12));
  }
}

TEST_CASE("preset worlds") {
  const auto det = build_toy_world({}, 1, ToyPreset::kDeterministic);
  const auto rep = entropy_identities(det);
  CHECK(std::abs(rep.h_c_given_vl) < 1e-12);
  CHECK(std::abs(rep.h_c_given_a) < 1e-12);

  const auto ind = build_toy_world({}, 1, ToyPreset::kIndependent);
  const auto ri = entropy_identities(ind);
  CHECK(std::abs(ri.i_c_a) < 1e-12);
  CHECK(std::abs(ri.i_c_vl) < 1e-12);
}

TEST_CASE("identities on random worlds and oracle agreement at seed 7") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    std::uniform_int_distribution<int> card(2, 5);
    ToyWorldShape s{card(rng), card(rng), card(rng), {card(rng), card(rng), card(rng)}};
    const auto w = build_toy_world(s, 100 + i);
    const auto r = entropy_identities(w);
    CHECK(std::abs(r.decomposition_residual) < 1e-9);
    CHECK(r.max_chain_residual < 1e-9);
    CHECK(r.i_c_a >= -1e-12);
    CHECK(r.i_c_vl >= -1e-12);
  }
  const auto w = build_toy_world({}, 7);
  const auto r = entropy_identities(w);
  const std::vector<int> c{3, 4}, vl{0, 1}, a{2};
  auto H = [&](std::vector<int> v) { return oracle::entropy(w.cards, w.p, v); };
  CHECK(r.h_c == doctest::Approx(H(c)).epsilon(1e-9));
  CHECK(std::abs(r.h_c_given_vl - (H({0, 1, 3, 4}) - H(vl))) < 1e-9);
  CHECK(std::abs(r.h_c_given_a - (H({2, 3, 4}) - H(a))) < 1e-9);
  CHECK(std::abs(r.i_c_a - (H(c) + H(a) - H({2, 3, 4}))) < 1e-9);
  CHECK(std::abs(r.i_c_vl - (H(c) + H(vl) - H({0, 1, 3, 4}))) < 1e-9);
  // I(c_2; c_1 | V, L)
  const double cmi = H({0, 1, 4}) + H({0, 1, 3}) - H({0, 1, 3, 4}) - H(vl);
  CHECK(std::abs(r.tokens[1].residual_grammar - cmi) < 1e-9);
}

TEST_CASE("NLL decomposition") {
  const auto w = build_toy_world({}, 3);
  const auto exact = nll_decomposition(w, true_conditional(w));
  CHECK(std::abs(exact.kl) < 1e-12);
  CHECK(exact.expected_nll == doctest::Approx(exact.conditional_entropy).epsilon(1e-12));

  const auto uni = nll_decomposition(w, uniform_model(w));
  CHECK(uni.expected_nll == doctest::Approx(std::log2(static_cast<double>(w.joint_token_card()))).epsilon(1e-12));

  for (int s = 0; s < 5; ++s) {
    const auto d = nll_decomposition(w, random_model(w, s));
    CHECK(std::abs(d.residual) < 1e-9);
    CHECK(d.kl >= 0.0);
  }
  auto zero = uniform_model(w);
  zero.q[0] = 0.0;
  CHECK_THROWS_WITH(nll_decomposition(w, zero), "support violation");
}

TEST_CASE("plug-in estimators") {
  const std::vector<std::int64_t> xs{1, 1, 2, 2, 3, 3, 4, 4};
  CHECK(plugin_entropy(xs) == doctest::Approx(2.0));
  const std::vector<std::vector<std::int32_t>> seqs{{0, 1}, {0, 1}, {1, 1}, {1, 0}};
  CHECK(plugin_sequence_entropy(seqs) == doctest::Approx(1.5));
  CHECK(plugin_positional_entropy_sum(seqs) == doctest::Approx(1.0 + oracle::plugin(std::vector<int>{1, 1, 1, 0})));
  CHECK(plugin_sequence_entropy(seqs) <= plugin_positional_entropy_sum(seqs) + 1e-12);
  const std::vector<std::int64_t> ctx{0, 0, 1, 1};
  CHECK(plugin_conditional_entropy(ctx, seqs) == doctest::Approx(0.5));
}
