#include "actioncodec/info.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

namespace actioncodec {

double entropy_bits(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

std::vector<double> marginal(const ToyWorld& world, std::span<const int> vars) {
  const int nv = world.n_vars();
  std::vector<std::size_t> stride(static_cast<std::size_t>(nv), 0);
  std::size_t out_size = 1;
  for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
    const int v = *it;
    if (v < 0 || v >= nv) throw std::out_of_range("variable index out of range");
    if (stride[v] != 0) throw std::invalid_argument("variable listed twice");
    stride[v] = out_size;
    out_size *= static_cast<std::size_t>(world.cards[v]);
  }
  std::vector<double> out(out_size, 0.0);
  std::vector<int> values(static_cast<std::size_t>(nv), 0);
  std::size_t target = 0;
  for (double p : world.p) {
    out[target] += p;
    // odometer step, keeping `target` in sync
    for (int i = nv - 1; i >= 0; --i) {
      if (++values[i] < world.cards[i]) {
        target += stride[i];
        break;
      }
      target -= stride[i] * static_cast<std::size_t>(world.cards[i] - 1);
      values[i] = 0;
    }
  }
  return out;
}

double joint_entropy(const ToyWorld& world, std::vector<int> vars) {
  if (vars.empty()) return 0.0;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return entropy_bits(marginal(world, vars));
}

namespace {

std::vector<int> join(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<int> join(const std::vector<int>& a, const std::vector<int>& b, const std::vector<int>& c) {
  return join(join(a, b), c);
}

}  // namespace

double conditional_entropy(const ToyWorld& world, const std::vector<int>& x, const std::vector<int>& given) {
  return joint_entropy(world, join(x, given)) - joint_entropy(world, given);
}

double mutual_information(const ToyWorld& world, const std::vector<int>& x, const std::vector<int>& y) {
  return joint_entropy(world, x) + joint_entropy(world, y) - joint_entropy(world, join(x, y));
}

double conditional_mutual_information(const ToyWorld& world, const std::vector<int>& x, const std::vector<int>& y,
                                      const std::vector<int>& given) {
  if (x.empty() || y.empty()) return 0.0;
  return joint_entropy(world, join(x, given)) + joint_entropy(world, join(y, given)) -
         joint_entropy(world, join(x, y, given)) - joint_entropy(world, given);
}

InfoReport entropy_identities(const ToyWorld& world) {
  world.validate();
  const std::vector<int> vl{ToyWorld::kVision, ToyWorld::kLanguage};
  const std::vector<int> a{ToyWorld::kAction};
  const std::vector<int> c = world.token_vars();

  InfoReport r;
  r.h_c = joint_entropy(world, c);
  r.h_c_given_vl = conditional_entropy(world, c, vl);
  r.h_c_given_a = conditional_entropy(world, c, a);
  r.i_c_a = mutual_information(world, c, a);
  r.i_c_vl = mutual_information(world, c, vl);
  r.decomposition_residual = r.h_c_given_vl - (r.h_c_given_a + r.i_c_a - r.i_c_vl);

  for (int k = 0; k < world.n_tokens(); ++k) {
    const std::vector<int> ck{ToyWorld::kFirstToken + k};
    const std::vector<int> prefix(c.begin(), c.begin() + k);
    TokenInfo t;
    t.position = k;
    t.alignment = mutual_information(world, ck, vl);
    t.residual_grammar = conditional_mutual_information(world, ck, prefix, vl);
    t.total = mutual_information(world, ck, join(vl, prefix));
    t.chain_residual = t.total - (t.alignment + t.residual_grammar);
    r.max_chain_residual = std::max(r.max_chain_residual, std::abs(t.chain_residual));
    r.tokens.push_back(t);
  }
  return r;
}

namespace {

std::vector<double> vlc_table(const ToyWorld& world) {
  std::vector<int> vars{ToyWorld::kVision, ToyWorld::kLanguage};
  for (int v : world.token_vars()) vars.push_back(v);
  return marginal(world, vars);
}

ModelTable empty_model(const ToyWorld& world) {
  ModelTable m;
  m.vision = world.cards[ToyWorld::kVision];
  m.language = world.cards[ToyWorld::kLanguage];
  m.outcomes = world.joint_token_card();
  m.q.assign(static_cast<std::size_t>(m.vision * m.language) * m.outcomes, 0.0);
  return m;
}

}  // namespace

ModelTable true_conditional(const ToyWorld& world) {
  ModelTable m = empty_model(world);
  const auto joint = vlc_table(world);
  const std::size_t contexts = static_cast<std::size_t>(m.vision * m.language);
  for (std::size_t ctx = 0; ctx < contexts; ++ctx) {
    double z = 0.0;
    for (std::size_t c = 0; c < m.outcomes; ++c) z += joint[ctx * m.outcomes + c];
    for (std::size_t c = 0; c < m.outcomes; ++c)
      m.q[ctx * m.outcomes + c] = z > 0.0 ? joint[ctx * m.outcomes + c] / z : 1.0 / static_cast<double>(m.outcomes);
  }
  return m;
}

ModelTable uniform_model(const ToyWorld& world) {
  ModelTable m = empty_model(world);
  std::fill(m.q.begin(), m.q.end(), 1.0 / static_cast<double>(m.outcomes));
  return m;
}

ModelTable random_model(const ToyWorld& world, std::uint64_t seed) {
  ModelTable m = empty_model(world);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  const std::size_t contexts = static_cast<std::size_t>(m.vision * m.language);
  for (std::size_t ctx = 0; ctx < contexts; ++ctx) {
    double z = 0.0;
    for (std::size_t c = 0; c < m.outcomes; ++c) z += (m.q[ctx * m.outcomes + c] = u(rng));
    for (std::size_t c = 0; c < m.outcomes; ++c) m.q[ctx * m.outcomes + c] /= z;
  }
  return m;
}

NllDecomposition nll_decomposition(const ToyWorld& world, const ModelTable& model) {
  world.validate();
  if (model.vision != world.cards[ToyWorld::kVision] || model.language != world.cards[ToyWorld::kLanguage] ||
      model.outcomes != world.joint_token_card())
    throw std::invalid_argument("model table shape mismatch");
  const auto joint = vlc_table(world);
  const std::size_t contexts = static_cast<std::size_t>(model.vision * model.language);
  NllDecomposition d;
  for (std::size_t ctx = 0; ctx < contexts; ++ctx) {
    double p_ctx = 0.0;
    for (std::size_t c = 0; c < model.outcomes; ++c) p_ctx += joint[ctx * model.outcomes + c];
    if (p_ctx <= 0.0) continue;
    for (std::size_t c = 0; c < model.outcomes; ++c) {
      const double p = joint[ctx * model.outcomes + c];
      if (p <= 0.0) continue;
      const double q = model.q[ctx * model.outcomes + c];
      if (!(q > 0.0)) throw std::invalid_argument("support violation");
      const double p_cond = p / p_ctx;
      d.expected_nll -= p * std::log2(q);
      d.kl += p * std::log2(p_cond / q);
      d.conditional_entropy -= p * std::log2(p_cond);
    }
  }
  d.residual = d.expected_nll - (d.kl + d.conditional_entropy);
  return d;
}

namespace {

template <typename Key>
double histogram_entropy(const std::map<Key, std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

double plugin_entropy(std::span<const std::int64_t> symbols) {
  std::map<std::int64_t, std::size_t> counts;
  for (auto s : symbols) ++counts[s];
  return histogram_entropy(counts, symbols.size());
}

double plugin_sequence_entropy(std::span<const std::vector<std::int32_t>> sequences) {
  std::map<std::vector<std::int32_t>, std::size_t> counts;
  for (const auto& s : sequences) ++counts[s];
  return histogram_entropy(counts, sequences.size());
}

double plugin_positional_entropy_sum(std::span<const std::vector<std::int32_t>> sequences) {
  std::size_t max_len = 0;
  for (const auto& s : sequences) max_len = std::max(max_len, s.size());
  double total = 0.0;
  std::vector<std::int64_t> column(sequences.size());
  for (std::size_t k = 0; k < max_len; ++k) {
    for (std::size_t i = 0; i < sequences.size(); ++i)
      column[i] = k < sequences[i].size() ? sequences[i][k] : std::int64_t{-1};
    total += plugin_entropy(column);
  }
  return total;
}

double plugin_conditional_entropy(std::span<const std::int64_t> context,
                                  std::span<const std::vector<std::int32_t>> sequences) {
  if (context.size() != sequences.size()) throw std::invalid_argument("context/sequence count mismatch");
  std::map<std::pair<std::int64_t, std::vector<std::int32_t>>, std::size_t> joint;
  for (std::size_t i = 0; i < sequences.size(); ++i) ++joint[{context[i], sequences[i]}];
  return histogram_entropy(joint, sequences.size()) - plugin_entropy(context);
}

}  // namespace actioncodec
