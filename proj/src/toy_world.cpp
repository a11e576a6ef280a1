#include "actioncodec/toy_world.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace actioncodec {

std::vector<int> ToyWorld::token_vars() const {
  std::vector<int> v(static_cast<std::size_t>(n_tokens()));
  std::iota(v.begin(), v.end(), kFirstToken);
  return v;
}

std::size_t ToyWorld::joint_token_card() const {
  std::size_t n = 1;
  for (int k = kFirstToken; k < n_vars(); ++k) n *= static_cast<std::size_t>(cards[k]);
  return n;
}

std::size_t ToyWorld::flat_index(std::span<const int> values) const {
  if (values.size() != cards.size()) throw std::invalid_argument("value count mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < cards.size(); ++i) {
    if (values[i] < 0 || values[i] >= cards[i]) throw std::out_of_range("value out of range");
    idx = idx * static_cast<std::size_t>(cards[i]) + static_cast<std::size_t>(values[i]);
  }
  return idx;
}

void ToyWorld::validate(double tol) const {
  std::size_t cells = 1;
  for (int c : cards) cells *= static_cast<std::size_t>(c);
  if (cells != p.size()) throw std::invalid_argument("unnormalized table: size mismatch");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("unnormalized table: negative or non-finite entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > tol) throw std::invalid_argument("unnormalized table");
}

namespace {

void check_card(int c, const char* what) {
  if (c < 2 || c > 16) throw std::invalid_argument(std::string("cardinality out of range for ") + what);
}

std::vector<double> dirichlet_ones(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) {
    x = expo(rng);
    s += x;
  }
  for (auto& x : w) x /= s;
  return w;
}

}  // namespace

ToyWorld build_toy_world(const ToyWorldShape& shape, std::uint64_t seed, ToyPreset preset) {
  check_card(shape.vision, "V");
  check_card(shape.language, "L");
  check_card(shape.action, "A");
  if (shape.tokens.empty()) throw std::invalid_argument("toy world needs at least one token");
  for (int c : shape.tokens) check_card(c, "token");

  ToyWorld w;
  w.cards = {shape.vision, shape.language, shape.action};
  w.cards.insert(w.cards.end(), shape.tokens.begin(), shape.tokens.end());
  double cells = 1.0;
  for (int c : w.cards) cells *= c;
  if (cells > 1e6) throw std::invalid_argument("toy world table exceeds 1e6 cells");

  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(cells);
  switch (preset) {
    case ToyPreset::kRandom:
      w.p = dirichlet_ones(n, rng);
      break;
    case ToyPreset::kDeterministic: {
      w.p.assign(n, 0.0);
      const double mass = 1.0 / (shape.vision * shape.language);
      std::vector<int> values(w.cards.size(), 0);
      for (int v = 0; v < shape.vision; ++v) {
        for (int l = 0; l < shape.language; ++l) {
          const int a = (7 * v + 3 * l + 1) % shape.action;
          values[0] = v;
          values[1] = l;
          values[2] = a;
          for (int k = 0; k < w.n_tokens(); ++k) values[3 + k] = (a * (k + 2) + k) % shape.tokens[k];
          w.p[w.flat_index(values)] += mass;
        }
      }
      break;
    }
    case ToyPreset::kIndependent: {
      const std::size_t ctx = static_cast<std::size_t>(shape.vision * shape.language * shape.action);
      const std::size_t tok = w.joint_token_card();
      const auto pc = dirichlet_ones(ctx, rng);
      const auto pt = dirichlet_ones(tok, rng);
      w.p.resize(n);
      for (std::size_t i = 0; i < ctx; ++i)
        for (std::size_t j = 0; j < tok; ++j) w.p[i * tok + j] = pc[i] * pt[j];
      break;
    }
  }
  w.validate(1e-12);
  return w;
}

}  // namespace actioncodec
