#include "actioncodec/metrics.hpp"
#include "actioncodec/training.hpp"

#include "torch_doctest.hpp"
#include "torch_helpers.hpp"

using namespace actioncodec;
using namespace helpers;

namespace {

TrainConfig quick(int steps) {
  TrainConfig cfg;
  cfg.codec = tiny_codec();
  cfg.steps = steps;
  cfg.batch_size = 16;
  cfg.lr = 3e-3;
  cfg.kmeans_rows = 256;
  cfg.kmeans_iters = 20;
  cfg.log_every = 10;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST_CASE("zero training steps return the seeded initialization") {
  const auto corpus = small_corpus();
  const auto r = train_tokenizer(corpus.train, corpus.validation, corpus.registry, quick(0));
  torch::manual_seed(4);
  ActionCodec fresh(quick(0).codec, corpus.registry);
  CHECK(parameter_checksum(*r.codec) == parameter_checksum(*fresh));
  CHECK(r.log.empty());
}

TEST_CASE("training is seed-deterministic and reduces reconstruction error") {
  const auto corpus = small_corpus();
  const auto a = train_tokenizer(corpus.train, corpus.validation, corpus.registry, quick(60));
  const auto b = train_tokenizer(corpus.train, corpus.validation, corpus.registry, quick(60));
  CHECK(parameter_checksum(*a.codec) == parameter_checksum(*b.codec));
  REQUIRE(a.log.size() == 6);
  CHECK(training_log_csv(a.log) == training_log_csv(b.log));
  CHECK(training_log_csv(a.log).rfind("step,total,recon,codebook,commitment,tcl,clip,infonce,l1,or,", 0) == 0);

  auto init = train_tokenizer(corpus.train, corpus.validation, corpus.registry, quick(0));
  const double before = recon_error(CodecTokenizer(init.codec), corpus.validation.chunks, corpus.registry, ErrorNorm::kL2);
  const double after = recon_error(CodecTokenizer(a.codec), corpus.validation.chunks, corpus.registry, ErrorNorm::kL2);
  CHECK(after < before);
  for (const auto& row : a.log) {
    CHECK(std::isfinite(row.total));
    CHECK(row.perplexity >= 1.0);
    CHECK((row.overlap >= 0.0 && row.overlap <= 1.0));
  }

  auto other = quick(60);
  other.seed = 5;
  CHECK(parameter_checksum(*train_tokenizer(corpus.train, corpus.validation, corpus.registry, other).codec) !=
        parameter_checksum(*a.codec));
}

TEST_CASE("training config validation and json defaults") {
  auto cfg = quick(10);
  cfg.batch_size = 1;
  CHECK_THROWS(cfg.validate());
  cfg = quick(10);
  cfg.weights.tcl = -1.0;
  CHECK_THROWS(cfg.validate());
  const auto j = to_json(quick(10));
  const auto back = train_config_from_json(j);
  CHECK(back.steps == 10);
  CHECK(back.codec.vocab_size == 16);
  const auto partial = train_config_from_json(nlohmann::json{{"steps", 3}});
  CHECK(partial.steps == 3);
  CHECK(partial.batch_size == TrainConfig{}.batch_size);
  const auto corpus = small_corpus();
  CHECK_THROWS_WITH(train_tokenizer(ChunkedSet{}, corpus.validation, corpus.registry, quick(1)), "no data");
}

TEST_CASE("residual post-training keeps level 0 and the encoder intact") {
  const auto corpus = small_corpus();
  auto base = train_tokenizer(corpus.train, corpus.validation, corpus.registry, quick(30)).codec;
  const auto before = parameter_checksum(*base);

  PosttrainConfig pc;
  pc.levels = 1;
  CHECK_THROWS_WITH(pc.validate(), "post-training needs L >= 2");

  pc.levels = 3;
  pc.steps = 20;
  pc.batch_size = 16;
  pc.lr = 1e-3;
  pc.kmeans_rows = 256;
  pc.kmeans_iters = 20;
  pc.eval_every = 5;
  pc.seed = 2;
  const auto r = rvq_posttrain(base, corpus.train, corpus.validation, pc);
  CHECK(parameter_checksum(*base) == before);
  CHECK(r.codec->levels() == 3);
  CHECK(r.audit.level0_changed == 0);
  CHECK(r.audit.chunks == corpus.validation.size());
  CHECK(r.audit.encoder_identical);
  CHECK(r.audit.level0_book_identical);
  CHECK(r.audit.post_l2 <= r.audit.base_l2);
  CHECK(r.audit.summary() == "level-0 codes changed: 0 of " + std::to_string(corpus.validation.size()));

  const CodecTokenizer t(r.codec);
  const auto seq = t.encode(corpus.validation.chunks.front());
  CHECK(seq.levels() == 3);
  CHECK(seq.codes[0] == CodecTokenizer(base).encode(corpus.validation.chunks.front()).codes[0]);

  const auto again = rvq_posttrain(base, corpus.train, corpus.validation, pc);
  CHECK(parameter_checksum(*again.codec) == parameter_checksum(*r.codec));
}
