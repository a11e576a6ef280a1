#pragma once

#include "actioncodec/codec.hpp"
#include "actioncodec/objectives.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace actioncodec {

struct TrainConfig {
  CodecConfig codec;
  int steps = 2000;
  int batch_size = 256;
  double lr = 2e-4;
  double final_lr_ratio = 0.1;  // cosine decay floor
  double grad_clip = 1.0;
  LossWeights weights;
  double sigma = 0.05;  // InfoNCE positive perturbation, normalized units
  double infonce_temperature = 0.1;
  bool tcl_all_negatives = false;
  int kmeans_rows = 4096;
  int kmeans_iters = 256;
  int dead_code_patience = 2;
  int log_every = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainLogRow {
  int step = 0;
  double total = 0.0;
  double recon = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
  double tcl = 0.0;
  double clip = 0.0;
  double infonce = 0.0;
  double l1 = 0.0;
  double overlap = 0.0;
  double perplexity = 0.0;
  double recon_l1 = 0.0;
  double recon_l2 = 0.0;
};

std::string training_log_csv(const std::vector<TrainLogRow>& rows);

struct TrainResult {
  ActionCodec codec{nullptr};
  LanguageEmbeddingTable language{nullptr};
  ContrastiveParams contrastive{nullptr};
  std::vector<TrainLogRow> log;
  int reseeded_codes = 0;
};

// Seed-deterministic. `validation` feeds OR / reconstruction columns of the
// log and may be empty. Throws on a non-finite loss.
TrainResult train_tokenizer(const ChunkedSet& train, const ChunkedSet& validation, const EmbodimentRegistry& registry,
                            const TrainConfig& cfg);

struct PosttrainConfig {
  int levels = 3;
  int steps = 1000;
  int batch_size = 256;
  double lr = 2e-4;
  double grad_clip = 1.0;
  int kmeans_rows = 4096;
  int kmeans_iters = 256;
  int eval_every = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const PosttrainConfig& cfg);
PosttrainConfig posttrain_config_from_json(const nlohmann::json& j);

struct PosttrainAudit {
  std::size_t chunks = 0;
  std::size_t level0_changed = 0;
  bool encoder_identical = false;
  bool level0_book_identical = false;
  double base_l2 = 0.0;  // training data
  double post_l2 = 0.0;  // training data
  double base_overlap = 0.0;
  double post_overlap = 0.0;
  int selected_step = 0;

  std::string summary() const;  // "level-0 codes changed: X of N"
  nlohmann::json to_json() const;
};

struct PosttrainResult {
  ActionCodec codec{nullptr};
  PosttrainAudit audit;
  std::vector<TrainLogRow> log;
};

// Adds residual levels 1..L-1 to a copy of `base`. Encoder and level-0 book are
// frozen; residual books and the decoder train on reconstruction + codebook
// terms. The evaluated state with the lowest training reconstruction error is
// kept. The audit compares level-0 codes on `audit_set`.
PosttrainResult rvq_posttrain(ActionCodec& base, const ChunkedSet& train, const ChunkedSet& audit_set,
                              const PosttrainConfig& cfg);

}  // namespace actioncodec
