#pragma once

#include "actioncodec/data.hpp"
#include "actioncodec/tokenizer.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace actioncodec {

struct ORReport {
  double overlap_rate = 0.0;
  // Fraction of positions with equal codes; fixed-length tokenizers only.
  std::optional<double> positional_match;
  std::size_t n_pairs = 0;
  std::map<int, double> per_embodiment;
  std::map<int, std::size_t> per_embodiment_pairs;
};

// |multiset(a) ∩ multiset(b)| / max(|a|, |b|); 1 when both are empty.
double multiset_overlap(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

// Pairs are (i, successor[i]) for every linked chunk. Codes come from `level`.
ORReport overlap_rate(std::span<const TokenSequence> tokens, std::span<const std::optional<std::size_t>> successor,
                      int level = 0);
ORReport overlap_rate(const Tokenizer& tokenizer, const ChunkedSet& chunks, int level = 0);

// E_eps[ sum_k H(c_k) ] under eps ~ N(0, sigma^2) added to the normalized
// actions; per-position plug-in entropies over m encodings (independence
// upper bound on the joint token entropy). Deterministic given seed.
double artifact_entropy(const Tokenizer& tokenizer, const ActionChunk& chunk, double sigma, int m, std::uint64_t seed,
                        int level = 0);

// n * log2(S)
double capacity_bound(std::int64_t n, std::int64_t vocab);

// Cosine similarity of per-dimension velocity profiles over the shared
// dimensions, both resampled to `samples` points on normalized time.
// Chunks of different rates and lengths compare on the same footing.
double velocity_profile_cosine(const ActionChunk& a, const ActionChunk& b, int samples = 64);

enum class ErrorNorm { kL1, kL2 };

// Mean per-element error between each chunk and decode(encode(chunk)) for the
// chunk's own embodiment.
double recon_error(const Tokenizer& tokenizer, std::span<const ActionChunk> chunks, const EmbodimentRegistry& registry,
                   ErrorNorm norm);

struct ThroughputReport {
  double latency_s = 0.0;
  double actions_per_s = 0.0;
  double budget_mean = 0.0;
  double budget_std = 0.0;
  int horizon = 0;
  double encode_s = 0.0;  // measured, mean per chunk
  double decode_s = 0.0;  // measured, mean per chunk
};

// Latency = budget * per_token_delay_s + measured decode time; throughput =
// horizon / latency. Needs at least 10 trials.
ThroughputReport throughput_latency(const Tokenizer& tokenizer, std::span<const ActionChunk> chunks,
                                    const EmbodimentRegistry& registry, double per_token_delay_s, int trials);

}  // namespace actioncodec
