#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace actioncodec {

// Exhaustively enumerable joint distribution over (V, L, A, c_1..c_m).
// Variables are stored in that order; the last variable varies fastest.
struct ToyWorld {
  static constexpr int kVision = 0;
  static constexpr int kLanguage = 1;
  static constexpr int kAction = 2;
  static constexpr int kFirstToken = 3;

  std::vector<int> cards;
  std::vector<double> p;

  int n_vars() const { return static_cast<int>(cards.size()); }
  int n_tokens() const { return n_vars() - kFirstToken; }
  std::vector<int> token_vars() const;
  std::size_t joint_token_card() const;
  std::size_t flat_index(std::span<const int> values) const;
  // Throws "unnormalized table" unless entries are >= 0 and sum to 1 within tol.
  void validate(double tol = 1e-9) const;
};

struct ToyWorldShape {
  int vision = 4;
  int language = 3;
  int action = 4;
  std::vector<int> tokens{3, 3};
};

enum class ToyPreset {
  kRandom,         // Dirichlet(1) joint table
  kDeterministic,  // A = g(V, L), C = f(A), (V, L) uniform
  kIndependent,    // C independent of (V, L, A)
};

// Throws when a cardinality is outside [2, 16] or the table exceeds 1e6 cells.
ToyWorld build_toy_world(const ToyWorldShape& shape, std::uint64_t seed, ToyPreset preset = ToyPreset::kRandom);

}  // namespace actioncodec
