#pragma once

// Independent reference computations used by the tests. Written directly
// from the definitions with plain loops over std::vector; nothing here calls
// into the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline double sq_dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Exhaustive nearest neighbour, first minimum wins.
inline int nearest(const Vec& z, const Mat& book) {
  int best = 0;
  double best_d = sq_dist(z, book[0]);
  for (std::size_t j = 1; j < book.size(); ++j) {
    const double d = sq_dist(z, book[j]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

inline double mean_sq(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Flattened tensors; recon + codebook + commitment, each a mean.
inline double vq_loss(const Vec& a, const Vec& a_hat, const Vec& z, const Vec& e, double beta = 1.0) {
  return mean_sq(a, a_hat) + mean_sq(z, e) + beta * mean_sq(z, e);
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine(const Vec& a, const Vec& b) { return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b)); }

inline double tcl(const Mat& anchors, const Mat& pos, const Mat& neg) {
  double total = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double ep = std::exp(cosine(anchors[i], pos[i]));
    const double en = std::exp(cosine(anchors[i], neg[i]));
    total += -std::log(ep / (ep + en));
  }
  return total / static_cast<double>(anchors.size());
}

inline double clip(const Mat& z, const std::vector<int>& lang, const Mat& table, double t, double b) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = 0; j < table.size(); ++j) {
      const double l = static_cast<int>(j) == lang[i] ? 1.0 : -1.0;
      const double s = cosine(z[i], table[j]);
      total += -std::log(1.0 / (1.0 + std::exp(l * (-t * s + b))));
    }
  return total / static_cast<double>(z.size() * table.size());
}

inline double infonce(const Mat& a, const Mat& p, double temperature) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) z += std::exp(cosine(a[i], p[j]) / temperature);
    total += -std::log(std::exp(cosine(a[i], p[i]) / temperature) / z);
  }
  return total / static_cast<double>(a.size());
}

inline double l1(const Vec& z) {
  double s = 0.0;
  for (double v : z) s += std::abs(v);
  return s / static_cast<double>(z.size());
}

// Entropy (bits) of the marginal over `vars` of a joint table with the given
// cardinalities, last variable fastest. Accumulates per-cell into a map keyed
// by the value tuple (a second, independent marginalization route).
inline double entropy(const std::vector<int>& cards, const std::vector<double>& p, const std::vector<int>& vars) {
  std::map<std::vector<int>, double> acc;
  std::vector<int> values(cards.size(), 0);
  for (std::size_t cell = 0; cell < p.size(); ++cell) {
    std::size_t rem = cell;
    for (int v = static_cast<int>(cards.size()) - 1; v >= 0; --v) {
      values[v] = static_cast<int>(rem % static_cast<std::size_t>(cards[v]));
      rem /= static_cast<std::size_t>(cards[v]);
    }
    std::vector<int> key;
    for (int v : vars) key.push_back(values[v]);
    acc[key] += p[cell];
  }
  double h = 0.0;
  for (const auto& [_, q] : acc)
    if (q > 0.0) h -= q * std::log(q) / std::log(2.0);
  return h;
}

// Linear-interpolation percentile after a fresh sort.
inline double percentile(Vec xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

// Plug-in entropy (bits) of a list of hashable symbols.
template <typename T>
double plugin(const std::vector<T>& xs) {
  std::map<T, double> c;
  for (const auto& x : xs) c[x] += 1.0;
  double h = 0.0;
  for (const auto& [_, n] : c) {
    const double q = n / static_cast<double>(xs.size());
    h -= q * std::log2(q);
  }
  return h;
}

}  // namespace oracle
