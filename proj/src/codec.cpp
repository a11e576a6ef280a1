#include "actioncodec/codec.hpp"

#include "actioncodec/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace actioncodec {

using nlohmann::json;

void CodecConfig::validate() const {
  perceiver.validate();
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (levels < 1) throw std::invalid_argument("levels must be >= 1");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
}

json to_json(const PerceiverConfig& c) {
  return json{{"latent_dim", c.latent_dim},       {"n_tokens", c.n_tokens},
              {"n_layers", c.n_layers},           {"n_heads", c.n_heads},
              {"variant", to_string(c.variant)},  {"ff_multiplier", c.ff_multiplier},
              {"prompt_dim", c.prompt_dim},       {"fourier_dim", c.fourier_dim},
              {"max_action_dim", c.max_action_dim}, {"n_embodiments", c.n_embodiments}};
}

PerceiverConfig perceiver_config_from_json(const json& j) {
  PerceiverConfig c;
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.n_tokens = j.value("n_tokens", c.n_tokens);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.variant = variant_from_string(j.value("variant", to_string(c.variant)));
  c.ff_multiplier = j.value("ff_multiplier", c.ff_multiplier);
  c.prompt_dim = j.value("prompt_dim", c.prompt_dim);
  c.fourier_dim = j.value("fourier_dim", c.fourier_dim);
  c.max_action_dim = j.value("max_action_dim", c.max_action_dim);
  c.n_embodiments = j.value("n_embodiments", c.n_embodiments);
  c.validate();
  return c;
}

json to_json(const CodecConfig& c) {
  return json{{"perceiver", to_json(c.perceiver)}, {"vocab_size", c.vocab_size}, {"levels", c.levels}, {"beta", c.beta}};
}

CodecConfig codec_config_from_json(const json& j) {
  CodecConfig c;
  c.perceiver = perceiver_config_from_json(j.value("perceiver", json::object()));
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.levels = j.value("levels", c.levels);
  c.beta = j.value("beta", c.beta);
  c.validate();
  return c;
}

ActionCodecImpl::ActionCodecImpl(CodecConfig cfg, EmbodimentRegistry registry)
    : cfg_(std::move(cfg)), registry_(std::move(registry)) {
  if (registry_.empty()) throw std::invalid_argument("empty embodiment registry");
  cfg_.perceiver.max_action_dim = std::max(cfg_.perceiver.max_action_dim, registry_.max_action_dim());
  cfg_.perceiver.n_embodiments = std::max(cfg_.perceiver.n_embodiments, registry_.index_capacity());
  cfg_.validate();
  encoder_ = register_module("encoder", PerceiverEncoder(cfg_.perceiver));
  decoder_ = register_module("decoder", PerceiverDecoder(cfg_.perceiver));
  const int levels = cfg_.levels;
  cfg_.levels = 0;
  for (int l = 0; l < levels; ++l) add_level();
}

torch::Dtype ActionCodecImpl::dtype() const {
  return encoder_->parameters().front().scalar_type();
}

void ActionCodecImpl::add_level() {
  const auto name = "book" + std::to_string(books_.size());
  auto book = register_module(name, Codebook(cfg_.vocab_size, cfg_.perceiver.latent_dim));
  if (!books_.empty()) book->to(dtype());
  books_.push_back(book);
  cfg_.levels = static_cast<int>(books_.size());
}

std::vector<torch::Tensor> ActionCodecImpl::book_entries(int levels) const {
  const int n = levels < 0 ? static_cast<int>(books_.size()) : levels;
  if (n > static_cast<int>(books_.size())) throw std::invalid_argument("requested more levels than the codec has");
  std::vector<torch::Tensor> out;
  for (int l = 0; l < n; ++l) out.push_back(books_[l]->entries());
  return out;
}

torch::Tensor ActionCodecImpl::time_features(const EmbodimentSpec& target, std::int64_t batch) const {
  const auto ts = chunk_timestamps(target.chunk_steps(), target.control_hz);
  const Matrix f = fourier_time_embed(ts, cfg_.perceiver.fourier_dim, target);
  auto t = torch::from_blob(const_cast<double*>(f.data()), {f.rows(), f.cols()}, torch::kDouble).clone();
  return t.to(dtype()).unsqueeze(0).expand({batch, f.rows(), f.cols()}).contiguous();
}

ChunkBatch ActionCodecImpl::make_batch(std::span<const ActionChunk> chunks) const {
  if (chunks.empty()) throw std::invalid_argument("empty batch");
  const int steps = chunks.front().steps();
  const int dmax = cfg_.perceiver.max_action_dim;
  const int fd = cfg_.perceiver.fourier_dim;
  const auto b = static_cast<std::int64_t>(chunks.size());
  auto actions = torch::zeros({b, steps, dmax}, torch::kDouble);
  auto valid = torch::zeros({b, steps, dmax}, torch::kDouble);
  auto time = torch::empty({b, steps, fd}, torch::kDouble);
  auto emb = torch::empty({b}, torch::kLong);
  auto a_acc = actions.accessor<double, 3>();
  auto v_acc = valid.accessor<double, 3>();
  auto t_acc = time.accessor<double, 3>();
  std::map<int, Matrix> feature_cache;
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& c = chunks[i];
    const auto& spec = registry_.by_index(c.embodiment_index);
    if (c.steps() != steps) throw std::invalid_argument("shape mismatch: mixed step counts in batch");
    if (c.dim() != spec.action_dim || c.dim() > dmax) throw std::invalid_argument("shape mismatch");
    for (int t = 0; t < steps; ++t)
      for (int k = 0; k < c.dim(); ++k) {
        a_acc[i][t][k] = c.actions(t, k);
        v_acc[i][t][k] = 1.0;
      }
    const auto ts = c.timestamps.size() == static_cast<std::size_t>(steps) ? c.timestamps
                                                                          : chunk_timestamps(steps, spec.control_hz);
    const Matrix f = fourier_time_embed(ts, fd, spec);
    for (int t = 0; t < steps; ++t)
      for (int k = 0; k < fd; ++k) t_acc[i][t][k] = f(t, k);
    emb[i] = c.embodiment_index;
  }
  ChunkBatch out;
  const auto dt = dtype();
  out.actions = actions.to(dt);
  out.valid = valid.to(dt);
  out.time = time.to(dt);
  out.embodiment = emb;
  out.steps = steps;
  return out;
}

torch::Tensor ActionCodecImpl::encode_latents(const ChunkBatch& batch) {
  return encoder_(batch.actions, batch.time, batch.embodiment);
}

torch::Tensor ActionCodecImpl::decode_embeddings(const torch::Tensor& embeddings, const EmbodimentSpec& target) {
  if (!registry_.contains(target.index)) throw std::invalid_argument("unregistered embodiment index");
  const auto b = embeddings.size(0);
  auto emb = torch::full({b}, static_cast<std::int64_t>(target.index), torch::kLong);
  auto out = decoder_(embeddings, time_features(target, b), emb);
  return out.narrow(2, 0, target.action_dim);
}

torch::Tensor ActionCodecImpl::decode_embeddings(const torch::Tensor& embeddings, const ChunkBatch& like) {
  return decoder_(embeddings, like.time, like.embodiment);
}

ActionCodec clone_codec(ActionCodec& src) {
  ActionCodec dst(src->config(), src->registry());
  dst->to(src->dtype());
  torch::NoGradGuard ng;
  auto sp = src->named_parameters();
  auto dp = dst->named_parameters();
  for (auto& item : sp) dp[item.key()].copy_(item.value());
  return dst;
}

namespace {

Matrix to_matrix(const torch::Tensor& t) {
  const auto d = t.detach().to(torch::kDouble).contiguous();
  Matrix m(d.size(0), d.size(1));
  std::memcpy(m.data(), d.data_ptr<double>(), sizeof(double) * static_cast<std::size_t>(d.numel()));
  return m;
}

constexpr std::int64_t kMaxBatch = 256;

}  // namespace

CodecTokenizer::CodecTokenizer(ActionCodec codec, int levels, std::string name)
    : codec_(std::move(codec)), levels_(levels < 0 ? codec_->levels() : levels), name_(std::move(name)) {
  if (levels_ < 1 || levels_ > codec_->levels()) throw std::invalid_argument("invalid level count");
}

TokenSequence CodecTokenizer::encode(const ActionChunk& chunk) const {
  return encode_batch(std::span<const ActionChunk>(&chunk, 1)).front();
}

std::vector<TokenSequence> CodecTokenizer::encode_batch(std::span<const ActionChunk> chunks) const {
  torch::NoGradGuard ng;
  std::vector<TokenSequence> out(chunks.size());
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < chunks.size(); ++i) groups[chunks[i].steps()].push_back(i);
  const auto books = codec_->book_entries(levels_);
  for (const auto& [steps, idx] : groups) {
    for (std::size_t start = 0; start < idx.size(); start += kMaxBatch) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(kMaxBatch));
      std::vector<ActionChunk> part;
      for (std::size_t k = start; k < end; ++k) part.push_back(chunks[idx[k]]);
      const auto batch = codec_->make_batch(part);
      const auto z = codec_->encode_latents(batch);
      const auto codes = rvq_quantize(z, books).codes.contiguous();  // L x B x n
      const auto acc = codes.accessor<std::int64_t, 3>();
      for (std::size_t k = 0; k < part.size(); ++k) {
        TokenSequence seq;
        seq.embodiment_index = part[k].embodiment_index;
        seq.codes.resize(static_cast<std::size_t>(levels_));
        for (int l = 0; l < levels_; ++l) {
          auto& row = seq.codes[l];
          row.resize(static_cast<std::size_t>(codes.size(2)));
          for (std::int64_t j = 0; j < codes.size(2); ++j) row[j] = static_cast<std::int32_t>(acc[l][k][j]);
        }
        out[idx[start + k]] = std::move(seq);
      }
    }
  }
  return out;
}

ActionChunk CodecTokenizer::decode(const TokenSequence& tokens, const EmbodimentSpec& target) const {
  return decode_batch(std::span<const TokenSequence>(&tokens, 1), target).front();
}

std::vector<ActionChunk> CodecTokenizer::decode_batch(std::span<const TokenSequence> tokens,
                                                      const EmbodimentSpec& target) const {
  torch::NoGradGuard ng;
  const auto& cfg = codec_->config();
  const int n = cfg.perceiver.n_tokens;
  std::vector<ActionChunk> out;
  out.reserve(tokens.size());
  for (std::size_t start = 0; start < tokens.size(); start += kMaxBatch) {
    const std::size_t end = std::min(tokens.size(), start + static_cast<std::size_t>(kMaxBatch));
    const auto b = static_cast<std::int64_t>(end - start);
    torch::Tensor emb = torch::zeros({b, n, cfg.perceiver.latent_dim}, codec_->dtype());
    for (std::size_t i = start; i < end; ++i) {
      const auto& seq = tokens[i];
      if (seq.levels() < 1 || seq.levels() > codec_->levels()) throw std::invalid_argument("invalid token stream");
      for (int l = 0; l < seq.levels(); ++l) {
        const auto& row = seq.codes[l];
        if (static_cast<int>(row.size()) != n) throw std::invalid_argument("invalid token stream");
        for (auto c : row)
          if (c < 0 || c >= cfg.vocab_size) throw std::invalid_argument("invalid token stream");
        auto idx = torch::tensor(std::vector<std::int64_t>(row.begin(), row.end()), torch::kLong);
        emb[static_cast<std::int64_t>(i - start)] += codec_->book(l)->entries().index_select(0, idx);
      }
    }
    const auto dec = codec_->decode_embeddings(emb, target);
    const auto ts = chunk_timestamps(target.chunk_steps(), target.control_hz);
    for (std::int64_t i = 0; i < b; ++i) {
      ActionChunk c;
      c.actions = to_matrix(dec[i]);
      c.timestamps = ts;
      c.embodiment_index = target.index;
      out.push_back(std::move(c));
    }
  }
  return out;
}

namespace {

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& manifest, ActionCodec& codec, const json& extra) {
  static_assert(std::endian::native == std::endian::little, "checkpoint blob assumes a little-endian host");
  json tensors = json::array();
  std::string blob;
  for (const auto& item : codec->named_parameters()) {
    const auto t = item.value().detach().to(torch::kFloat).contiguous();
    json entry{{"name", item.key()},
               {"shape", t.sizes().vec()},
               {"dtype", "float32"},
               {"offset", blob.size()},
               {"count", t.numel()}};
    tensors.push_back(entry);
    blob.append(reinterpret_cast<const char*>(t.data_ptr<float>()), sizeof(float) * static_cast<std::size_t>(t.numel()));
  }
  const auto bin = blob_path(manifest);
  json m{{"format", "actioncodec-checkpoint"},
         {"config", to_json(codec->config())},
         {"registry", registry_to_json(codec->registry())},
         {"blob", bin.filename().string()},
         {"tensors", tensors},
         {"extra", extra}};
  write_json(manifest, m);
  std::ofstream os(bin, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + bin.string());
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

ActionCodec load_checkpoint(const std::filesystem::path& manifest, json* extra) {
  const json m = read_json(manifest);
  if (m.value("format", "") != "actioncodec-checkpoint") throw std::runtime_error("not a checkpoint: " + manifest.string());
  ActionCodec codec(codec_config_from_json(m.at("config")), registry_from_json(m.at("registry")));
  const auto bin = manifest.parent_path() / m.at("blob").get<std::string>();
  const std::string blob = read_text(bin);
  auto params = codec->named_parameters();
  if (m.at("tensors").size() != params.size()) throw std::runtime_error("incompatible checkpoint: tensor count");
  torch::NoGradGuard ng;
  for (const auto& e : m.at("tensors")) {
    const auto name = e.at("name").get<std::string>();
    auto* p = params.find(name);
    if (!p) throw std::runtime_error("incompatible checkpoint: unknown tensor " + name);
    const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
    if (p->sizes().vec() != shape) throw std::runtime_error("incompatible checkpoint: shape of " + name);
    const auto offset = e.at("offset").get<std::size_t>();
    const auto count = e.at("count").get<std::size_t>();
    if (offset + count * sizeof(float) > blob.size()) throw std::runtime_error("truncated checkpoint blob");
    auto t = torch::empty(shape, torch::kFloat);
    std::memcpy(t.data_ptr<float>(), blob.data() + offset, count * sizeof(float));
    p->copy_(t);
  }
  if (extra) *extra = m.value("extra", json::object());
  return codec;
}

std::string parameter_checksum(const torch::nn::Module& module) {
  std::string bytes;
  for (const auto& item : module.named_parameters()) {
    const auto t = item.value().detach().contiguous();
    bytes += item.key();
    bytes.append(static_cast<const char*>(t.data_ptr()), t.nbytes());
  }
  return checksum_hex(bytes);
}

}  // namespace actioncodec
