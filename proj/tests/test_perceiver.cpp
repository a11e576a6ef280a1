#include "actioncodec/codec.hpp"
#include "actioncodec/perceiver.hpp"

#include "torch_doctest.hpp"
#include "torch_helpers.hpp"

#include <cmath>
#include <numbers>

using namespace actioncodec;
using namespace helpers;

TEST_CASE("fourier time embedding") {
  const std::vector<double> zero{0.0, 0.0};
  const auto z = fourier_time_embed(zero, 8, 0.5, 5.0);
  for (int k = 0; k < 4; ++k) {
    CHECK(z(0, k) == 0.0);
    CHECK(z(0, 4 + k) == 1.0);
  }
  CHECK(z.row(0) == z.row(1));

  const std::vector<double> quarter{0.25};
  const auto f = fourier_time_embed(quarter, 4, 1.0, 10.0);
  const double expect[4] = {std::sin(std::numbers::pi / 2), std::sin(5 * std::numbers::pi),
                            std::cos(std::numbers::pi / 2), std::cos(5 * std::numbers::pi)};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(f(0, k) - expect[k]) < 1e-12);
  CHECK(std::abs(f(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(f(0, 3) + 1.0) < 1e-12);
  CHECK_THROWS_WITH(fourier_time_embed(quarter, 5, 1.0, 10.0), "odd dim");
}

namespace {

struct EncoderProbe {
  PerceiverEncoder enc;
  torch::Tensor actions, time, emb;

  explicit EncoderProbe(Variant v) : enc(nullptr) {
    torch::manual_seed(3);
    auto cfg = tiny_codec(v).perceiver;
    cfg.max_action_dim = 3;
    cfg.n_embodiments = 2;
    enc = PerceiverEncoder(cfg);
    enc->to(torch::kDouble);
    actions = torch::rand({2, 5, 3}, torch::kDouble) * 2 - 1;
    time = torch::randn({2, 5, cfg.fourier_dim}, torch::kDouble);
    emb = torch::tensor({0, 1}, torch::kLong);
  }
  torch::Tensor run() { return enc->forward(actions, time, emb); }
};

}  // namespace

TEST_CASE("encoder determinism, prompt sensitivity and errors") {
  EncoderProbe p(Variant::kSelfAttention);
  const auto a = p.run();
  const auto b = p.run();
  CHECK(a.sizes() == std::vector<std::int64_t>{2, 4, 16});
  CHECK(torch::equal(a, b));

  // same chunk, different embodiment index
  auto same_actions = p.actions[0].unsqueeze(0).repeat({2, 1, 1});
  auto same_time = p.time[0].unsqueeze(0).repeat({2, 1, 1});
  const auto out = p.enc->forward(same_actions, same_time, p.emb);
  CHECK(!torch::allclose(out[0], out[1]));

  CHECK_THROWS(p.enc->forward(same_actions, same_time, torch::tensor({0, 5}, torch::kLong)));
  CHECK_THROWS(p.enc->forward(torch::zeros({2, 5, 2}, torch::kDouble), same_time, p.emb));
}

TEST_CASE("independent variant: query slots do not interact") {
  EncoderProbe p(Variant::kIndependent);
  const auto base = p.run().detach();
  auto& q = p.enc->queries();
  for (int j = 0; j < 4; ++j) {
    {
      torch::NoGradGuard ng;
      q[j] += 1e-3;
    }
    const auto moved = p.run().detach();
    {
      torch::NoGradGuard ng;
      q[j] -= 1e-3;
    }
    for (int k = 0; k < 4; ++k) {
      const double diff = (moved.select(1, k) - base.select(1, k)).abs().max().item<double>();
      if (k == j)
        CHECK(diff > 0.0);
      else
        CHECK(diff == 0.0);
    }
  }

  // permuting the query parameters permutes the output rows
  const auto perm = torch::tensor({2, 0, 3, 1}, torch::kLong);
  {
    torch::NoGradGuard ng;
    q.copy_(q.index_select(0, perm));
  }
  const auto permuted = p.run().detach();
  CHECK(torch::allclose(permuted, base.index_select(1, perm), 1e-12, 1e-12));
}

TEST_CASE("causal variant: latent k ignores query slots above k") {
  EncoderProbe p(Variant::kCausal);
  const auto base = p.run().detach();
  auto& q = p.enc->queries();
  for (int j = 0; j < 4; ++j) {
    {
      torch::NoGradGuard ng;
      q[j] += 1e-3;
    }
    const auto moved = p.run().detach();
    {
      torch::NoGradGuard ng;
      q[j] -= 1e-3;
    }
    for (int k = 0; k < 4; ++k) {
      const double diff = (moved.select(1, k) - base.select(1, k)).abs().max().item<double>();
      if (k < j)
        CHECK(diff == 0.0);
      else
        CHECK(diff > 0.0);
    }
  }

  // Jacobian of latent k w.r.t. query j via finite differences
  const double h = 1e-6;
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) {
      const double fd = finite_difference(q, j * 16 + 5, [&] { return p.run().select(1, k).sum().item<double>(); }, h);
      if (k < j) CHECK(std::abs(fd) < 1e-5);
    }
}

TEST_CASE("sa variant mixes every slot") {
  EncoderProbe p(Variant::kSelfAttention);
  const auto base = p.run().detach();
  {
    torch::NoGradGuard ng;
    p.enc->queries()[3] += 1e-3;
  }
  const auto moved = p.run().detach();
  CHECK((moved.select(1, 0) - base.select(1, 0)).abs().max().item<double>() > 0.0);
}

TEST_CASE("decoder shape contract, bounds and cross-embodiment decode") {
  torch::manual_seed(5);
  const auto reg = two_arms();
  ActionCodec codec(tiny_codec(), reg);
  const auto emb = torch::randn({3, 4, 16}) * 5.0;
  const auto fast = codec->decode_embeddings(emb, reg.by_index(0));
  const auto slow = codec->decode_embeddings(emb, reg.by_index(1));
  CHECK(fast.sizes() == std::vector<std::int64_t>{3, 10, 3});
  CHECK(slow.sizes() == std::vector<std::int64_t>{3, 6, 2});
  CHECK(torch::isfinite(fast).all().item<bool>());
  CHECK(fast.abs().max().item<double>() <= 1.0);
  CHECK(torch::equal(fast, codec->decode_embeddings(emb, reg.by_index(0))));
  CHECK_THROWS(codec->decode_embeddings(emb, EmbodimentSpec{"ghost", 7, 10.0, 3, 1.0}));
}

TEST_CASE("encode then decode composite: analytic vs finite-difference gradients") {
  torch::manual_seed(9);
  const auto reg = two_arms();
  ActionCodec codec(tiny_codec(Variant::kCausal), reg);
  codec->to(torch::kDouble);
  std::vector<ActionChunk> chunks{random_chunk(reg.by_index(0), 1), random_chunk(reg.by_index(0), 2)};
  const auto batch = codec->make_batch(chunks);
  auto loss = [&] {
    auto z = codec->encode_latents(batch);
    auto out = codec->decode_embeddings(z, batch);
    return (out - batch.actions).pow(2).mean();
  };
  std::mt19937_64 rng(4);
  auto params = codec->parameters();
  double worst = 0.0;
  for (int c = 0; c < 10; ++c) {
    // skip codebooks: they are not on the encode/decode path
    auto& p = params[std::uniform_int_distribution<std::size_t>(0, params.size() - 2)(rng)];
    worst = std::max(worst, gradient_check(p, loss, 1, 100 + c));
  }
  CHECK(worst < 1e-4);
}
