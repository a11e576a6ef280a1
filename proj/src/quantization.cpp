#include "actioncodec/quantization.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace actioncodec {

namespace {

double sq_dist(const double* a, const double* b, std::int64_t d) {
  double s = 0.0;
  for (std::int64_t k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

}  // namespace

torch::Tensor nearest_codes(const torch::Tensor& z, const torch::Tensor& book) {
  if (z.dim() != 2 || book.dim() != 2 || z.size(1) != book.size(1))
    throw std::invalid_argument("latent/codebook dimension mismatch");
  if (book.size(0) < 1) throw std::invalid_argument("empty codebook");
  torch::NoGradGuard ng;
  const auto zd = z.detach().to(torch::kDouble).contiguous();
  const auto bd = book.detach().to(torch::kDouble).contiguous();
  const auto n = zd.size(0);
  const auto s = bd.size(0);
  const auto d = zd.size(1);

  const auto z2 = zd.pow(2).sum(1);
  const auto b2 = bd.pow(2).sum(1);
  const auto dist = (z2.unsqueeze(1) - 2.0 * torch::matmul(zd, bd.t()) + b2.unsqueeze(0)).contiguous();
  const double b2max = s > 0 ? b2.max().item<double>() : 0.0;

  auto codes = torch::empty({n}, torch::kLong);
  auto* out = codes.data_ptr<std::int64_t>();
  const auto* zp = zd.data_ptr<double>();
  const auto* bp = bd.data_ptr<double>();
  const auto* dp = dist.data_ptr<double>();
  const auto* z2p = z2.data_ptr<double>();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = dp + i * s;
    double lo = std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < s; ++j) lo = std::min(lo, row[j]);
    // expansion error of the matmul form is a few ulps of the operand norms
    const double tol = 1e-9 * (z2p[i] + b2max + 1.0);
    std::int64_t best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < s; ++j) {
      if (row[j] > lo + tol) continue;
      const double e = sq_dist(zp + i * d, bp + j * d, d);
      if (e < best_d) {
        best_d = e;
        best = j;
      }
    }
    out[i] = best;
  }
  return codes;
}

QuantizeResult quantize(const torch::Tensor& z, const torch::Tensor& book) {
  if (z.size(-1) != book.size(1)) throw std::invalid_argument("latent/codebook dimension mismatch");
  if (!torch::isfinite(z).all().item<bool>()) throw std::invalid_argument("non-finite Z");
  const auto d = z.size(-1);
  auto lead = z.sizes().vec();
  lead.pop_back();

  QuantizeResult r;
  r.codes = nearest_codes(z.reshape({-1, d}), book).view(lead);
  r.embeddings = book.index_select(0, r.codes.reshape({-1})).view(z.sizes());
  r.quantized = z + (r.embeddings - z).detach();
  r.codebook_loss = torch::mse_loss(z.detach(), r.embeddings);
  r.commitment_loss = torch::mse_loss(z, r.embeddings.detach());
  return r;
}

torch::Tensor vq_loss(const torch::Tensor& a, const torch::Tensor& a_hat, const torch::Tensor& z,
                      const torch::Tensor& e_c, double beta) {
  if (a.sizes() != a_hat.sizes() || z.sizes() != e_c.sizes()) throw std::invalid_argument("shape mismatch");
  return torch::mse_loss(a_hat, a) + torch::mse_loss(z.detach(), e_c) + beta * torch::mse_loss(z, e_c.detach());
}

RvqResult rvq_quantize(const torch::Tensor& z, const std::vector<torch::Tensor>& books) {
  if (books.empty()) throw std::invalid_argument("empty RVQ stack");
  RvqResult r;
  std::vector<torch::Tensor> codes;
  torch::Tensor residual = z;
  torch::Tensor cumulative;
  for (const auto& book : books) {
    auto q = quantize(residual, book);
    codes.push_back(q.codes);
    cumulative = cumulative.defined() ? cumulative + q.embeddings : q.embeddings;
    r.cumulative.push_back(cumulative);
    r.codebook_loss.push_back(q.codebook_loss);
    residual = residual - q.embeddings.detach();
  }
  r.codes = torch::stack(codes);
  return r;
}

torch::Tensor kmeans(const torch::Tensor& data, int k, int max_iters, std::uint64_t seed) {
  if (data.dim() != 2 || data.size(0) < 1) throw std::invalid_argument("no data");
  if (k < 1) throw std::invalid_argument("k must be positive");
  torch::NoGradGuard ng;
  const auto x = data.detach().to(torch::kDouble).contiguous();
  const auto n = x.size(0);
  std::mt19937_64 rng(seed);

  // k-means++ seeding
  std::vector<std::int64_t> chosen;
  chosen.push_back(std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng));
  auto min_d = (x - x[chosen[0]]).pow(2).sum(1);
  while (static_cast<int>(chosen.size()) < k) {
    const double total = min_d.sum().item<double>();
    std::int64_t pick;
    if (total <= 0.0) {
      pick = std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng);
    } else {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      const auto* md = min_d.data_ptr<double>();
      double acc = 0.0;
      pick = n - 1;
      for (std::int64_t i = 0; i < n; ++i) {
        acc += md[i];
        if (acc >= u) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
    min_d = torch::minimum(min_d, (x - x[pick]).pow(2).sum(1));
  }
  auto centers = x.index_select(0, torch::tensor(chosen, torch::kLong)).clone();

  for (int it = 0; it < max_iters; ++it) {
    const auto assign = nearest_codes(x, centers);
    auto sums = torch::zeros_like(centers).index_add_(0, assign, x);
    auto counts = torch::zeros({k}, torch::kDouble).index_add_(0, assign, torch::ones({n}, torch::kDouble));
    const auto nonempty = counts > 0;
    auto updated = torch::where(nonempty.unsqueeze(1), sums / counts.clamp_min(1.0).unsqueeze(1), centers);
    const bool converged = torch::equal(updated, centers);
    centers = updated;
    if (converged) break;
  }
  return centers.to(data.scalar_type());
}

CodebookImpl::CodebookImpl(int size, int dim) {
  if (size < 2) throw std::invalid_argument("codebook needs S >= 2");
  entries_ = register_parameter("entries", torch::randn({size, dim}) / std::sqrt(static_cast<double>(dim)));
  usage_.assign(static_cast<std::size_t>(size), 0);
  idle_epochs_.assign(static_cast<std::size_t>(size), 0);
  epoch_usage_.assign(static_cast<std::size_t>(size), 0);
}

void CodebookImpl::record_usage(const torch::Tensor& codes) {
  const auto flat = codes.reshape({-1}).to(torch::kLong).contiguous();
  const auto* p = flat.data_ptr<std::int64_t>();
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    if (p[i] < 0 || p[i] >= size()) throw std::out_of_range("code outside vocabulary");
    ++usage_[p[i]];
    ++epoch_usage_[p[i]];
  }
}

std::int64_t CodebookImpl::total_usage() const {
  std::int64_t t = 0;
  for (auto u : usage_) t += u;
  return t;
}

double CodebookImpl::perplexity() const {
  const double total = static_cast<double>(total_usage());
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (auto u : usage_)
    if (u > 0) {
      const double p = static_cast<double>(u) / total;
      h -= p * std::log(p);
    }
  return std::exp(h);
}

int CodebookImpl::end_epoch(const torch::Tensor& candidates, int patience, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int reseeded = 0;
  torch::NoGradGuard ng;
  for (int j = 0; j < size(); ++j) {
    idle_epochs_[j] = epoch_usage_[j] == 0 ? idle_epochs_[j] + 1 : 0;
    if (idle_epochs_[j] >= patience && candidates.defined() && candidates.size(0) > 0) {
      const auto row = std::uniform_int_distribution<std::int64_t>(0, candidates.size(0) - 1)(rng);
      entries_[j].copy_(candidates[row].detach().to(entries_.scalar_type()));
      idle_epochs_[j] = 0;
      ++reseeded;
    }
  }
  std::fill(epoch_usage_.begin(), epoch_usage_.end(), 0);
  return reseeded;
}

void CodebookImpl::reset_usage() {
  std::fill(usage_.begin(), usage_.end(), 0);
  std::fill(epoch_usage_.begin(), epoch_usage_.end(), 0);
}

}  // namespace actioncodec
