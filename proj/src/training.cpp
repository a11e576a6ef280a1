#include "actioncodec/training.hpp"

#include "actioncodec/metrics.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace actioncodec {

using nlohmann::json;

void TrainConfig::validate() const {
  codec.validate();
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  for (double w : {weights.recon, weights.tcl, weights.clip, weights.l1, weights.infonce})
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("loss weights must be finite and non-negative");
  if (log_every < 1) throw std::invalid_argument("log_every must be positive");
}

json to_json(const TrainConfig& c) {
  return json{{"codec", to_json(c.codec)},
              {"steps", c.steps},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"final_lr_ratio", c.final_lr_ratio},
              {"grad_clip", c.grad_clip},
              {"weights",
               {{"recon", c.weights.recon},
                {"tcl", c.weights.tcl},
                {"clip", c.weights.clip},
                {"l1", c.weights.l1},
                {"infonce", c.weights.infonce}}},
              {"sigma", c.sigma},
              {"infonce_temperature", c.infonce_temperature},
              {"tcl_all_negatives", c.tcl_all_negatives},
              {"kmeans_rows", c.kmeans_rows},
              {"kmeans_iters", c.kmeans_iters},
              {"dead_code_patience", c.dead_code_patience},
              {"log_every", c.log_every},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  if (j.contains("codec")) c.codec = codec_config_from_json(j.at("codec"));
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.final_lr_ratio = j.value("final_lr_ratio", c.final_lr_ratio);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    c.weights.recon = w.value("recon", c.weights.recon);
    c.weights.tcl = w.value("tcl", c.weights.tcl);
    c.weights.clip = w.value("clip", c.weights.clip);
    c.weights.l1 = w.value("l1", c.weights.l1);
    c.weights.infonce = w.value("infonce", c.weights.infonce);
  }
  c.sigma = j.value("sigma", c.sigma);
  c.infonce_temperature = j.value("infonce_temperature", c.infonce_temperature);
  c.tcl_all_negatives = j.value("tcl_all_negatives", c.tcl_all_negatives);
  c.kmeans_rows = j.value("kmeans_rows", c.kmeans_rows);
  c.kmeans_iters = j.value("kmeans_iters", c.kmeans_iters);
  c.dead_code_patience = j.value("dead_code_patience", c.dead_code_patience);
  c.log_every = j.value("log_every", c.log_every);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::string training_log_csv(const std::vector<TrainLogRow>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "step,total,recon,codebook,commitment,tcl,clip,infonce,l1,or,codebook_perplexity,recon_l1,recon_l2\n";
  for (const auto& r : rows)
    os << r.step << ',' << r.total << ',' << r.recon << ',' << r.codebook << ',' << r.commitment << ',' << r.tcl << ','
       << r.clip << ',' << r.infonce << ',' << r.l1 << ',' << r.overlap << ',' << r.perplexity << ',' << r.recon_l1
       << ',' << r.recon_l2 << '\n';
  return os.str();
}

namespace {

// Batches drawn from one embodiment at a time (chunk lengths differ across
// embodiments), groups chosen in proportion to their size, each group walked
// in seeded shuffled order.
class Sampler {
 public:
  Sampler(const ChunkedSet& set, bool need_successor, std::uint64_t seed) : rng_(seed) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (need_successor && !set.successor[i]) continue;
      groups_[set.chunks[i].embodiment_index].push_back(i);
    }
    if (groups_.empty()) throw std::invalid_argument(need_successor ? "batch without adjacency links" : "no data");
    std::vector<double> w;
    for (auto& [k, v] : groups_) {
      keys_.push_back(k);
      w.push_back(static_cast<double>(v.size()));
      total_ += v.size();
      std::shuffle(v.begin(), v.end(), rng_);
      cursor_[k] = 0;
    }
    pick_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  std::vector<std::size_t> next(int batch) {
    const int key = keys_[pick_(rng_)];
    auto& g = groups_[key];
    auto& cur = cursor_[key];
    const std::size_t want = std::min(g.size(), static_cast<std::size_t>(batch));
    std::vector<std::size_t> out;
    while (out.size() < want) {
      if (cur >= g.size()) {
        std::shuffle(g.begin(), g.end(), rng_);
        cur = 0;
      }
      out.push_back(g[cur++]);
    }
    return out;
  }

  std::size_t total() const { return total_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::map<int, std::vector<std::size_t>> groups_;
  std::map<int, std::size_t> cursor_;
  std::vector<int> keys_;
  std::discrete_distribution<std::size_t> pick_;
  std::size_t total_ = 0;
};

std::vector<ActionChunk> gather(const ChunkedSet& set, const std::vector<std::size_t>& idx) {
  std::vector<ActionChunk> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(set.chunks[i]);
  return out;
}

torch::Tensor masked_mse(const torch::Tensor& pred, const torch::Tensor& target, const torch::Tensor& valid) {
  return ((pred - target).pow(2) * valid).sum() / valid.sum();
}

double cosine_lr(double base, double floor_ratio, int step, int steps) {
  if (steps <= 1) return base;
  const double progress = static_cast<double>(step) / static_cast<double>(steps - 1);
  const double c = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return base * (floor_ratio + (1.0 - floor_ratio) * c);
}

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
}

// Deterministic strided subset of at most `limit` chunks.
std::vector<ActionChunk> strided(const ChunkedSet& set, std::size_t limit) {
  std::vector<ActionChunk> out;
  if (set.size() == 0) return out;
  const std::size_t stride = std::max<std::size_t>(1, set.size() / limit + (set.size() % limit ? 1 : 0));
  for (std::size_t i = 0; i < set.size(); i += stride) out.push_back(set.chunks[i]);
  return out;
}

torch::Tensor encode_rows(ActionCodec& codec, const std::vector<ActionChunk>& chunks) {
  torch::NoGradGuard ng;
  std::map<int, std::vector<ActionChunk>> by_steps;
  for (const auto& c : chunks) by_steps[c.steps()].push_back(c);
  std::vector<torch::Tensor> parts;
  for (auto& [_, group] : by_steps)
    for (std::size_t s = 0; s < group.size(); s += 256) {
      const std::size_t e = std::min(group.size(), s + 256);
      std::vector<ActionChunk> part(group.begin() + static_cast<std::ptrdiff_t>(s),
                                    group.begin() + static_cast<std::ptrdiff_t>(e));
      parts.push_back(codec->encode_latents(codec->make_batch(part)));
    }
  auto z = torch::cat(parts, 0);
  return z.reshape({-1, z.size(-1)});
}

struct EvalStats {
  double overlap = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
};

EvalStats evaluate(ActionCodec& codec, int levels, const ChunkedSet& set) {
  EvalStats s;
  if (set.size() == 0) return s;
  CodecTokenizer tok(codec, levels);
  const auto tokens = tok.encode_batch(set.chunks);
  bool linked = false;
  for (const auto& x : set.successor) linked = linked || x.has_value();
  if (linked) s.overlap = overlap_rate(tokens, set.successor, 0).overlap_rate;
  s.l1 = recon_error(tok, set.chunks, codec->registry(), ErrorNorm::kL1);
  s.l2 = recon_error(tok, set.chunks, codec->registry(), ErrorNorm::kL2);
  return s;
}

int language_rows(const ChunkedSet& a, const ChunkedSet& b) {
  int m = 0;
  for (const auto* s : {&a, &b})
    for (const auto& c : s->context) m = std::max(m, c.language_id + 1);
  return std::max(m, 1);
}

void check_finite(const torch::Tensor& loss, int step) {
  if (!std::isfinite(loss.item<double>()))
    throw std::runtime_error("divergence at step " + std::to_string(step) + ": non-finite loss");
}

}  // namespace

TrainResult train_tokenizer(const ChunkedSet& train, const ChunkedSet& validation, const EmbodimentRegistry& registry,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("no data");
  torch::manual_seed(cfg.seed);

  TrainResult r;
  r.codec = ActionCodec(cfg.codec, registry);
  const int d = cfg.codec.perceiver.latent_dim;
  r.language = LanguageEmbeddingTable(language_rows(train, validation), d);
  r.contrastive = ContrastiveParams();
  if (cfg.steps == 0) return r;

  const auto& w = cfg.weights;
  const bool need_pairs = w.tcl > 0.0;
  Sampler sampler(train, need_pairs, cfg.seed ^ 0x5eedULL);
  auto& codec = r.codec;
  auto book = codec->book(0);

  {
    const auto warm = encode_rows(codec, strided(train, static_cast<std::size_t>(
                                                          std::max(1, cfg.kmeans_rows / cfg.codec.perceiver.n_tokens))));
    torch::NoGradGuard ng;
    book->entries().copy_(kmeans(warm, book->size(), cfg.kmeans_iters, cfg.seed + 17));
  }

  std::vector<torch::Tensor> params = codec->parameters();
  for (const auto& p : r.language->parameters()) params.push_back(p);
  for (const auto& p : r.contrastive->parameters()) params.push_back(p);
  torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr));

  const int epoch_steps =
      std::max<int>(1, static_cast<int>((sampler.total() + cfg.batch_size - 1) / static_cast<std::size_t>(cfg.batch_size)));
  torch::Tensor last_latents;

  for (int step = 0; step < cfg.steps; ++step) {
    set_lr(opt, cosine_lr(cfg.lr, cfg.final_lr_ratio, step, cfg.steps));
    const auto idx = sampler.next(cfg.batch_size);
    const auto anchors = gather(train, idx);
    const auto batch = codec->make_batch(anchors);

    auto z = codec->encode_latents(batch);
    auto q = quantize(z, book->entries());
    book->record_usage(q.codes);
    auto a_hat = codec->decode_embeddings(q.quantized, batch);
    auto recon = masked_mse(a_hat, batch.actions, batch.valid);
    auto total = w.recon * (recon + q.codebook_loss + cfg.codec.beta * q.commitment_loss);

    TrainLogRow row;
    row.step = step + 1;
    const auto pooled = pool_tokens(z);
    if (w.tcl > 0.0) {
      std::vector<std::size_t> succ;
      for (auto i : idx) succ.push_back(*train.successor[i]);
      const auto pos = pool_tokens(codec->encode_latents(codec->make_batch(gather(train, succ))));
      torch::Tensor tcl;
      if (cfg.tcl_all_negatives) {
        tcl = tcl_loss_all_negatives(pooled, pos);
      } else {
        const auto b = static_cast<std::int64_t>(idx.size());
        std::vector<std::int64_t> neg(static_cast<std::size_t>(b));
        std::uniform_int_distribution<std::int64_t> u(0, std::max<std::int64_t>(0, b - 2));
        for (std::int64_t i = 0; i < b; ++i) {
          const auto j = u(sampler.rng());
          neg[i] = b > 1 && j >= i ? j + 1 : j;
        }
        tcl = tcl_loss(pooled, pos, pooled.index_select(0, torch::tensor(neg, torch::kLong)));
      }
      row.tcl = tcl.item<double>();
      total = total + w.tcl * tcl;
    }
    if (w.clip > 0.0) {
      std::vector<std::int64_t> lang;
      for (auto i : idx) lang.push_back(train.context[i].language_id);
      const auto c = clip_loss(pooled, torch::tensor(lang, torch::kLong), r.language->weight.to(pooled.scalar_type()),
                               r.contrastive->t.to(pooled.scalar_type()), r.contrastive->b.to(pooled.scalar_type()));
      row.clip = c.item<double>();
      total = total + w.clip * c;
    }
    if (w.infonce > 0.0) {
      auto noisy = batch;
      noisy.actions = batch.actions + cfg.sigma * torch::randn_like(batch.actions) * batch.valid;
      const auto zp = codec->encode_latents(noisy);
      // one row per token latent; other tokens in the batch are the negatives
      const auto nce = infonce_or_loss(z.reshape({-1, d}), zp.reshape({-1, d}), cfg.infonce_temperature);
      row.infonce = nce.item<double>();
      total = total + w.infonce * nce;
    }
    if (w.l1 > 0.0) {
      const auto l1 = l1_penalty(z);
      row.l1 = l1.item<double>();
      total = total + w.l1 * l1;
    }
    check_finite(total, step + 1);

    opt.zero_grad();
    total.backward();
    if (cfg.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(params, cfg.grad_clip);
    opt.step();
    last_latents = z.detach().reshape({-1, d});

    if ((step + 1) % epoch_steps == 0)
      r.reseeded_codes += book->end_epoch(last_latents, cfg.dead_code_patience, cfg.seed + 1000003ULL * (step + 1));

    if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps) {
      row.total = total.item<double>();
      row.recon = recon.item<double>();
      row.codebook = q.codebook_loss.item<double>();
      row.commitment = q.commitment_loss.item<double>();
      row.perplexity = book->perplexity();
      const auto ev = evaluate(codec, 1, validation);
      row.overlap = ev.overlap;
      row.recon_l1 = ev.l1;
      row.recon_l2 = ev.l2;
      r.log.push_back(row);
    }
  }
  return r;
}

void PosttrainConfig::validate() const {
  if (levels < 2) throw std::invalid_argument("post-training needs L >= 2");
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be positive");
}

json to_json(const PosttrainConfig& c) {
  return json{{"levels", c.levels},         {"steps", c.steps},           {"batch_size", c.batch_size},
              {"lr", c.lr},                 {"grad_clip", c.grad_clip},   {"kmeans_rows", c.kmeans_rows},
              {"kmeans_iters", c.kmeans_iters}, {"eval_every", c.eval_every}, {"seed", c.seed}};
}

PosttrainConfig posttrain_config_from_json(const json& j) {
  PosttrainConfig c;
  c.levels = j.value("levels", c.levels);
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.kmeans_rows = j.value("kmeans_rows", c.kmeans_rows);
  c.kmeans_iters = j.value("kmeans_iters", c.kmeans_iters);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::string PosttrainAudit::summary() const {
  return "level-0 codes changed: " + std::to_string(level0_changed) + " of " + std::to_string(chunks);
}

json PosttrainAudit::to_json() const {
  return json{{"chunks", chunks},
              {"level0_changed", level0_changed},
              {"summary", summary()},
              {"encoder_identical", encoder_identical},
              {"level0_book_identical", level0_book_identical},
              {"base_l2", base_l2},
              {"post_l2", post_l2},
              {"base_or", base_overlap},
              {"post_or", post_overlap},
              {"selected_step", selected_step}};
}

namespace {

std::string frozen_checksum(ActionCodec& codec) {
  std::string s = parameter_checksum(*codec->encoder());
  s += parameter_checksum(*codec->book(0));
  return s;
}

double train_l2(ActionCodec& codec, int levels, const std::vector<ActionChunk>& chunks) {
  CodecTokenizer tok(codec, levels);
  return recon_error(tok, chunks, codec->registry(), ErrorNorm::kL2);
}

}  // namespace

PosttrainResult rvq_posttrain(ActionCodec& base, const ChunkedSet& train, const ChunkedSet& audit_set,
                              const PosttrainConfig& cfg) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("no data");
  if (base->levels() != 1) throw std::invalid_argument("base tokenizer must be single-level");
  torch::manual_seed(cfg.seed);

  PosttrainResult r;
  auto post = clone_codec(base);
  const std::string frozen_before = frozen_checksum(base);
  const auto eval_chunks = strided(train, 2048);
  const double base_l2 = train_l2(base, 1, eval_chunks);

  // residual books from k-means on the residuals left by the previous levels
  {
    const int n = post->config().perceiver.n_tokens;
    auto z = encode_rows(post, strided(train, static_cast<std::size_t>(std::max(1, cfg.kmeans_rows / n))));
    torch::NoGradGuard ng;
    auto residual = z - post->book(0)->entries().index_select(0, nearest_codes(z, post->book(0)->entries()));
    for (int l = 1; l < cfg.levels; ++l) {
      post->add_level();
      auto& b = post->book(l);
      b->entries().copy_(kmeans(residual, b->size(), cfg.kmeans_iters, cfg.seed + 31 * l));
      residual = residual - b->entries().index_select(0, nearest_codes(residual, b->entries()));
    }
  }

  for (auto& p : post->encoder()->parameters()) p.requires_grad_(false);
  post->book(0)->entries().requires_grad_(false);
  std::vector<torch::Tensor> params = post->decoder()->parameters();
  for (int l = 1; l < post->levels(); ++l) params.push_back(post->book(l)->entries());
  torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr));

  // model selection on training reconstruction, starting from the untrained stack
  auto best_state = clone_codec(post);
  double best_l2 = train_l2(post, post->levels(), eval_chunks);
  int best_step = 0;

  Sampler sampler(train, false, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int step = 0; step < cfg.steps; ++step) {
    set_lr(opt, cosine_lr(cfg.lr, 0.1, step, cfg.steps));
    const auto batch = post->make_batch(gather(train, sampler.next(cfg.batch_size)));
    torch::Tensor z;
    {
      torch::NoGradGuard ng;
      z = post->encode_latents(batch);
    }
    const auto rvq = rvq_quantize(z, post->book_entries());
    auto a_hat = post->decode_embeddings(rvq.cumulative.back(), batch);
    auto recon = masked_mse(a_hat, batch.actions, batch.valid);
    auto total = recon;
    for (int l = 1; l < post->levels(); ++l) total = total + rvq.codebook_loss[l];
    check_finite(total, step + 1);
    opt.zero_grad();
    total.backward();
    if (cfg.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(params, cfg.grad_clip);
    opt.step();

    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps) {
      TrainLogRow row;
      row.step = step + 1;
      row.total = total.item<double>();
      row.recon = recon.item<double>();
      row.recon_l2 = train_l2(post, post->levels(), eval_chunks);
      r.log.push_back(row);
      if (row.recon_l2 < best_l2) {
        best_l2 = row.recon_l2;
        best_step = step + 1;
        best_state = clone_codec(post);
      }
    }
  }
  r.codec = best_state;

  auto& a = r.audit;
  a.chunks = audit_set.size();
  CodecTokenizer base_tok(base, 1);
  CodecTokenizer post_tok(r.codec, 1);
  const auto before = base_tok.encode_batch(audit_set.chunks);
  const auto after = post_tok.encode_batch(audit_set.chunks);
  for (std::size_t i = 0; i < before.size(); ++i) a.level0_changed += before[i].codes[0] != after[i].codes[0];
  a.encoder_identical = parameter_checksum(*base->encoder()) == parameter_checksum(*r.codec->encoder());
  a.level0_book_identical = parameter_checksum(*base->book(0)) == parameter_checksum(*r.codec->book(0));
  if (frozen_checksum(base) != frozen_before) throw std::logic_error("base tokenizer modified during post-training");
  a.base_l2 = base_l2;
  a.post_l2 = best_l2;
  a.selected_step = best_step;
  bool linked = false;
  for (const auto& x : audit_set.successor) linked = linked || x.has_value();
  if (linked) {
    a.base_overlap = overlap_rate(before, audit_set.successor, 0).overlap_rate;
    a.post_overlap = overlap_rate(after, audit_set.successor, 0).overlap_rate;
  }
  return r;
}

}  // namespace actioncodec
