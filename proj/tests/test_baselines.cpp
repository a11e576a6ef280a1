#include "actioncodec/baselines.hpp"
#include "actioncodec/data.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace actioncodec;

namespace {

ActionChunk random_chunk(int steps, int dim, std::uint64_t seed, int emb = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ActionChunk c;
  c.actions.resize(steps, dim);
  for (Eigen::Index i = 0; i < c.actions.size(); ++i) c.actions.data()[i] = u(rng);
  c.timestamps = chunk_timestamps(steps, 10.0);
  c.embodiment_index = emb;
  return c;
}

ActionChunk smooth_chunk(int steps, int dim, double phase) {
  ActionChunk c;
  c.actions.resize(steps, dim);
  for (int t = 0; t < steps; ++t)
    for (int k = 0; k < dim; ++k) c.actions(t, k) = 0.6 * std::sin(0.3 * t + phase + k);
  c.timestamps = chunk_timestamps(steps, 10.0);
  return c;
}

const EmbodimentSpec kSpec{"arm", 0, 8.0, 7, 1.0};

}  // namespace

TEST_CASE("binning boundaries, budget and round trip") {
  CHECK(bin_index(-1.0, 1000) == 0);
  CHECK(bin_index(1.0, 1000) == 999);
  CHECK(bin_index(-5.0, 1000) == 0);
  CHECK(bin_index(5.0, 1000) == 999);
  BinningTokenizer tok;
  for (int s = 0; s < 20; ++s) {
    const auto c = random_chunk(8, 7, s);
    const auto t = tok.encode(c);
    CHECK(t.length() == 56);
    const auto back = tok.decode(t, kSpec);
    CHECK((back.actions - c.actions).cwiseAbs().maxCoeff() <= 1.0 / 1000.0);
  }
  // time-major order
  ActionChunk c = random_chunk(2, 7, 1);
  const auto t = tok.encode(c);
  CHECK(t.codes[0][7] == bin_index(c.actions(1, 0), 1000));
}

TEST_CASE("string tokenizer renders, parses and rejects malformed text") {
  Matrix m(2, 2);
  m << 0.1234, -0.5, 1.0, 0.0;
  CHECK(render_action_string(m, 3) == "[[0.123, -0.500], [1.000, 0.000]]");
  const auto back = parse_action_string("[[0.123, -0.500], [1.000, 0.000]]");
  CHECK(back(0, 0) == 0.123);
  CHECK(back(0, 1) == -0.5);
  CHECK_THROWS_WITH(parse_action_string("[[0.1, 0.2], [0.3]]"), "invalid action string");
  CHECK_THROWS_WITH(parse_action_string("[[0.1, 0.2]"), "invalid action string");
  CHECK_THROWS_WITH(parse_action_string("[[0..1]]"), "invalid action string");

  StringTokenizer tok;
  ActionChunk q;
  q.actions.resize(8, 7);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(-1000, 1000);
  for (Eigen::Index i = 0; i < q.actions.size(); ++i) q.actions.data()[i] = u(rng) / 1000.0;
  const auto t = tok.encode(q);
  const auto d = tok.decode(t, kSpec);
  CHECK(d.actions == q.actions);

  // token count grows linearly in T*D for fixed-width values
  ActionChunk ones;
  ones.actions = Matrix::Constant(4, 7, 0.5);
  ActionChunk twice;
  twice.actions = Matrix::Constant(8, 7, 0.5);
  const auto l4 = tok.encode(ones).length();
  const auto l8 = tok.encode(twice).length();
  CHECK(l8 == 2 * l4);
}

TEST_CASE("orthonormal DCT round trip") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int len : {1, 2, 7, 20}) {
    std::vector<double> x(static_cast<std::size_t>(len));
    for (auto& v : x) v = n(rng);
    const auto y = dct_iii(dct_ii(x));
    for (int i = 0; i < len; ++i) CHECK(std::abs(y[i] - x[i]) < 1e-12);
    double e1 = 0.0, e2 = 0.0;
    const auto c = dct_ii(x);
    for (int i = 0; i < len; ++i) {
      e1 += x[i] * x[i];
      e2 += c[i] * c[i];
    }
    CHECK(e1 == doctest::Approx(e2).epsilon(1e-12));
  }
}

TEST_CASE("DCT+BPE fit, encode and decode") {
  std::vector<ActionChunk> corpus;
  for (int i = 0; i < 1000; ++i) corpus.push_back(smooth_chunk(8, 7, 0.01 * i));
  DctBpeConfig cfg;
  cfg.bpe_vocab = 1400;
  const auto fitted = dct_bpe_fit(corpus, cfg);
  CHECK(!fitted.merges.empty());
  CHECK(static_cast<int>(fitted.merges.size()) <= cfg.bpe_vocab - fitted.base_vocab());
  DctBpeTokenizer tok(fitted);
  double budget = 0.0;
  for (int i = 0; i < 1000; i += 37) {
    const auto stream = dct_quantize(corpus[i], fitted);
    const auto enc = bpe_encode(stream, fitted);
    CHECK(enc.size() <= stream.size());
    CHECK(bpe_decode(enc, fitted) == stream);
  }
  // out-of-corpus chunks
  for (int s = 0; s < 10; ++s) {
    const auto c = random_chunk(8, 7, 50 + s);
    const auto stream = dct_quantize(c, fitted);
    CHECK(bpe_decode(bpe_encode(stream, fitted), fitted) == stream);
  }
  for (const auto& c : corpus) budget += static_cast<double>(tok.encode(c).length());
  budget /= static_cast<double>(corpus.size());
  CHECK(budget < 8.0 * 7.0 / 4.0);

  // decode of a truncated stream still yields a full chunk
  auto t = tok.encode(corpus[3]);
  t.codes[0].resize(t.codes[0].size() / 2);
  const auto d = tok.decode(t, kSpec);
  CHECK(d.actions.rows() == 8);
  CHECK(d.actions.cols() == 7);

  TokenSequence bad;
  bad.codes = {{static_cast<std::int32_t>(tok.vocab_size())}};
  CHECK_THROWS(tok.decode(bad, kSpec));

  const auto j = merges_to_json(fitted);
  DctBpeConfig again = cfg;
  merges_from_json(again, j);
  CHECK(again.merges == fitted.merges);
}

TEST_CASE("DCT without quantization error is exact") {
  DctBpeConfig cfg;
  cfg.quant_scale = 1e6;
  cfg.base_bits = 24;
  const auto c = smooth_chunk(8, 7, 0.3);
  const auto stream = dct_quantize(c, cfg);
  const auto d = dct_dequantize(stream, cfg, kSpec, 8);
  CHECK((d.actions - c.actions).cwiseAbs().maxCoeff() < 1e-5);
}
