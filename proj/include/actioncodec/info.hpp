#pragma once

#include "actioncodec/toy_world.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace actioncodec {

// All quantities in bits.
double entropy_bits(std::span<const double> probs);

// Marginal table over `vars` (in the given order, last fastest).
std::vector<double> marginal(const ToyWorld& world, std::span<const int> vars);
double joint_entropy(const ToyWorld& world, std::vector<int> vars);
double conditional_entropy(const ToyWorld& world, const std::vector<int>& x, const std::vector<int>& given);
double mutual_information(const ToyWorld& world, const std::vector<int>& x, const std::vector<int>& y);
double conditional_mutual_information(const ToyWorld& world, const std::vector<int>& x, const std::vector<int>& y,
                                      const std::vector<int>& given);

struct TokenInfo {
  int position = 0;
  double alignment = 0.0;         // I(c_k; V, L)
  double residual_grammar = 0.0;  // I(c_k; c_<k | V, L)
  double total = 0.0;             // I(c_k; V, L, c_<k)
  double chain_residual = 0.0;    // total - (alignment + residual_grammar)
};

struct InfoReport {
  double h_c = 0.0;
  double h_c_given_vl = 0.0;
  double h_c_given_a = 0.0;  // artifact entropy
  double i_c_a = 0.0;        // capacity
  double i_c_vl = 0.0;       // perceptual alignment
  // H(C|V,L) - [H(C|A) + I(C;A) - I(C;V,L)]
  double decomposition_residual = 0.0;
  double max_chain_residual = 0.0;
  std::vector<TokenInfo> tokens;
};

InfoReport entropy_identities(const ToyWorld& world);

// Conditional model P_theta(C | V, L) over the joint token alphabet, laid out
// [v][l][c] with c the mixed-radix index of the token tuple.
struct ModelTable {
  int vision = 0;
  int language = 0;
  std::size_t outcomes = 0;
  std::vector<double> q;
};

ModelTable true_conditional(const ToyWorld& world);
ModelTable uniform_model(const ToyWorld& world);
ModelTable random_model(const ToyWorld& world, std::uint64_t seed);

struct NllDecomposition {
  double expected_nll = 0.0;
  double kl = 0.0;
  double conditional_entropy = 0.0;
  double residual = 0.0;  // E[NLL] - (KL + H)
};

// Throws "support violation" if the model assigns zero mass where data has mass.
NllDecomposition nll_decomposition(const ToyWorld& world, const ModelTable& model);

// Sample-based plug-in estimators.
double plugin_entropy(std::span<const std::int64_t> symbols);
double plugin_sequence_entropy(std::span<const std::vector<std::int32_t>> sequences);
// Sum over positions of per-position marginal plug-in entropies; shorter
// sequences contribute an "absent" symbol at missing positions.
double plugin_positional_entropy_sum(std::span<const std::vector<std::int32_t>> sequences);
// H(C | X) with X given as opaque context ids.
double plugin_conditional_entropy(std::span<const std::int64_t> context, std::span<const std::vector<std::int32_t>> sequences);

}  // namespace actioncodec
