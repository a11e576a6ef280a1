#include "actioncodec/objectives.hpp"

#include "torch_doctest.hpp"
#include "oracles.hpp"
#include "torch_helpers.hpp"

using namespace actioncodec;
using namespace helpers;

namespace {

oracle::Mat rows(const torch::Tensor& t) {
  const auto d = t.detach().to(torch::kDouble).contiguous();
  oracle::Mat out(static_cast<std::size_t>(d.size(0)), oracle::Vec(static_cast<std::size_t>(d.size(1))));
  for (std::int64_t i = 0; i < d.size(0); ++i)
    for (std::int64_t k = 0; k < d.size(1); ++k) out[i][k] = d[i][k].item<double>();
  return out;
}

torch::Tensor vec(std::initializer_list<double> v) { return torch::tensor(std::vector<double>(v), torch::kDouble); }

}  // namespace

TEST_CASE("cosine similarity examples") {
  CHECK(actioncodec::cosine_similarity(vec({1, 0}), vec({0, 1})).item<double>() == 0.0);
  CHECK(actioncodec::cosine_similarity(vec({1, 1}), vec({2, 2})).item<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(actioncodec::cosine_similarity(vec({1, 2}), vec({-1, -2})).item<double>() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS(actioncodec::cosine_similarity(vec({0, 0}), vec({1, 2})));
}

TEST_CASE("tcl loss examples and oracle") {
  // identical anchor/positive, orthogonal negative: log(1 + e^{-1})
  const auto a = vec({1, 0}).view({1, 2});
  const auto n = vec({0, 1}).view({1, 2});
  CHECK(tcl_loss(a, a, n).item<double>() == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
  CHECK(tcl_loss(a, a, a).item<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  for (int s = 0; s < 10; ++s) {
    torch::manual_seed(s);
    auto x = torch::randn({6, 5}, torch::kDouble);
    auto p = torch::randn({6, 5}, torch::kDouble);
    auto q = torch::randn({6, 5}, torch::kDouble);
    CHECK(std::abs(tcl_loss(x, p, q).item<double>() - oracle::tcl(rows(x), rows(p), rows(q))) < 1e-12);
    // positive scaling of any argument leaves the value unchanged
    CHECK(std::abs(tcl_loss(3.0 * x, 0.5 * p, 7.0 * q).item<double>() - tcl_loss(x, p, q).item<double>()) < 1e-12);
  }

  auto x = torch::randn({4, 3}, torch::kDouble).requires_grad_();
  auto p = torch::randn({4, 3}, torch::kDouble);
  auto q = torch::randn({4, 3}, torch::kDouble);
  CHECK(gradient_check(x, [&] { return tcl_loss(x, p, q); }, 12, 1) < 1e-5);
  CHECK(std::isfinite(tcl_loss_all_negatives(x, p).item<double>()));
}

TEST_CASE("clip loss examples and oracle") {
  const auto t = torch::tensor(10.0, torch::kDouble);
  const auto b = torch::tensor(0.0, torch::kDouble);
  // aligned with the true row, orthogonal to the other: (log(1+e^-10) + log 2) / 2
  const auto z = vec({1, 0}).view({1, 2});
  const auto table = vec({1, 0, 0, 1}).view({2, 2});
  const auto ids = torch::tensor({0}, torch::kLong);
  const double expect = (std::log1p(std::exp(-10.0)) + std::log(2.0)) / 2.0;
  CHECK(clip_loss(z, ids, table, t, b).item<double>() == doctest::Approx(expect).epsilon(1e-12));

  for (int s = 0; s < 10; ++s) {
    torch::manual_seed(100 + s);
    auto zz = torch::randn({5, 4}, torch::kDouble);
    auto tab = torch::randn({3, 4}, torch::kDouble);
    auto lid = torch::randint(0, 3, {5}, torch::kLong);
    std::vector<int> lang;
    for (int i = 0; i < 5; ++i) lang.push_back(static_cast<int>(lid[i].item<std::int64_t>()));
    const auto tt = torch::tensor(2.5, torch::kDouble);
    const auto bb = torch::tensor(-0.3, torch::kDouble);
    CHECK(std::abs(clip_loss(zz, lid, tab, tt, bb).item<double>() - oracle::clip(rows(zz), lang, rows(tab), 2.5, -0.3)) <
          1e-12);
    CHECK(std::abs(clip_loss(4.0 * zz, lid, 0.2 * tab, tt, bb).item<double>() -
                   clip_loss(zz, lid, tab, tt, bb).item<double>()) < 1e-12);
  }
  CHECK_THROWS_WITH(clip_loss(z, torch::tensor({5}, torch::kLong), table, t, b), "missing language rows");

  auto zz = torch::randn({3, 4}, torch::kDouble).requires_grad_();
  auto tab = torch::randn({2, 4}, torch::kDouble).requires_grad_();
  auto tt = torch::tensor(3.0, torch::kDouble).requires_grad_();
  auto bb = torch::tensor(0.5, torch::kDouble).requires_grad_();
  const auto lid = torch::tensor({0, 1, 1}, torch::kLong);
  auto loss = [&] { return clip_loss(zz, lid, tab, tt, bb); };
  CHECK(gradient_check(zz, loss, 12, 2) < 1e-5);
  CHECK(gradient_check(tab, loss, 8, 3) < 1e-5);
  CHECK(gradient_check(tt, loss, 1, 4) < 1e-5);
  CHECK(gradient_check(bb, loss, 1, 5) < 1e-5);
}

TEST_CASE("infonce loss oracle, gradient and batch guard") {
  for (int s = 0; s < 10; ++s) {
    torch::manual_seed(200 + s);
    auto a = torch::randn({6, 5}, torch::kDouble);
    auto p = torch::randn({6, 5}, torch::kDouble);
    CHECK(std::abs(infonce_or_loss(a, p, 0.1).item<double>() - oracle::infonce(rows(a), rows(p), 0.1)) < 1e-10);
  }
  auto a = torch::randn({4, 3}, torch::kDouble).requires_grad_();
  auto p = torch::randn({4, 3}, torch::kDouble);
  CHECK(gradient_check(a, [&] { return infonce_or_loss(a, p, 0.5); }, 12, 6) < 1e-5);
  CHECK_THROWS_WITH(infonce_or_loss(a.narrow(0, 0, 1), p.narrow(0, 0, 1), 0.1), "batch size < 2");
}

TEST_CASE("l1 penalty and pooling") {
  auto z = torch::randn({2, 3, 4}, torch::kDouble);
  const auto flat = z.contiguous().view({-1});
  CHECK(std::abs(l1_penalty(z).item<double>() -
                 oracle::l1(oracle::Vec(flat.data_ptr<double>(), flat.data_ptr<double>() + flat.numel()))) < 1e-12);
  const auto pooled = pool_tokens(z);
  CHECK(pooled.sizes() == std::vector<std::int64_t>{2, 4});
  CHECK(torch::allclose(pooled[1], (z[1][0] + z[1][1] + z[1][2]) / 3.0));
}
