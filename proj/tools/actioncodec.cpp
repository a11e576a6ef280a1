// actioncodec: synthesize corpora, train and post-train codecs, evaluate,
// compare against baseline tokenizers, run perturbation studies, transfer
// chunks across embodiments and render plots.
#include "actioncodec/baselines.hpp"
#include "actioncodec/codec.hpp"
#include "actioncodec/experiments.hpp"
#include "actioncodec/info.hpp"
#include "actioncodec/io.hpp"
#include "actioncodec/metrics.hpp"
#include "actioncodec/report.hpp"
#include "actioncodec/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace actioncodec;

namespace {

// Problems with the config file itself; exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string dataset;
  std::string input;
};

// Keys that the run fills in: seeds come from --seed, layout sizes from the registry.
const std::set<std::string> kDerived{"seed", "max_action_dim", "n_embodiments"};

void require_fields(const json& section, const json& tmpl, const std::string& path) {
  if (!section.is_object()) throw ConfigError("config field must be an object: " + path);
  for (const auto& [key, value] : tmpl.items()) {
    if (kDerived.contains(key)) continue;
    if (!section.contains(key)) throw ConfigError("missing config field: " + path + "." + key);
    if (value.is_object()) require_fields(section.at(key), value, path + "." + key);
  }
}

const json& section(const json& cfg, const std::string& name) {
  if (!cfg.contains(name)) throw ConfigError("missing config field: " + name);
  return cfg.at(name);
}

// Parses one section through `parse`, after checking it against `tmpl`.
template <typename F>
auto strict(const json& cfg, const std::string& name, const json& tmpl, F parse) {
  const auto& s = section(cfg, name);
  require_fields(s, tmpl, name);
  try {
    return parse(s);
  } catch (const json::exception& e) {
    throw ConfigError("invalid config section " + name + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("invalid config section " + name + ": " + e.what());
  }
}

// Command-specific sections not backed by a library struct.
const json kEvalTemplate = {{"artifact_sigmas", json::array()},
                            {"artifact_samples", 0},
                            {"artifact_chunks", 0},
                            {"max_chunks", 0}};
const json kCompareTemplate = {{"binning", {{"bins_per_dim", 0}, {"horizon", 0}}},
                               {"string", {{"precision", 0}, {"horizon", 0}}},
                               {"dct_bpe", {{"dct_keep", 0}, {"quant_scale", 0}, {"base_bits", 0}, {"bpe_vocab", 0}, {"min_corpus", 0}}},
                               {"per_token_delay_s", 0},
                               {"latency_trials", 0},
                               {"max_chunks", 0}};
const json kTransferTemplate = {{"source", ""}, {"target", ""}, {"chunk_index", 0}};
const json kPosttrainExtra = {{"audit_chunks", 0}};

class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt) {
    if (opt_.out.empty()) throw std::invalid_argument("--out is required");
    fs::create_directories(opt_.out);
    if (!opt_.config.empty()) {
      try {
        config_ = read_json(opt_.config);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("unreadable config: ") + e.what());
      }
      if (opt_.seed) {
        seed_ = *opt_.seed;
      } else {
        if (!config_.contains("seed")) throw ConfigError("missing config field: seed");
        seed_ = config_.at("seed").get<std::uint64_t>();
      }
    }
    resolved_ = json{{"command", command_}, {"seed", seed_}, {"inputs", json::object()}};
  }

  const json& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  fs::path out(const std::string& name) const { return fs::path(opt_.out) / name; }

  void resolve(const std::string& key, json value) { resolved_[key] = std::move(value); }
  void time(const std::string& key, json value) { timing_[key] = std::move(value); }

  // Records the input's checksum (not its path) so reruns from elsewhere agree.
  fs::path input(const std::string& key, const fs::path& path) {
    if (path.empty()) throw std::invalid_argument("--" + key + " is required");
    if (!fs::exists(path)) throw std::runtime_error("missing file: " + path.string());
    resolved_["inputs"][key] = fs::is_directory(path) ? directory_checksum(path) : file_checksum(path);
    return path;
  }

  void finish() {
    write_json(out("resolved_config.json"), resolved_);
    timing_["command"] = command_;
    timing_["wall_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_json(out("timing.json"), timing_);
  }

 private:
  static std::string directory_checksum(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().filename() != "timing.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.filename().string() + ":" + file_checksum(f) + ";";
    return checksum_hex(all);
  }

  std::string command_;
  Options opt_;
  json config_;
  std::uint64_t seed_ = 0;
  json resolved_;
  json timing_ = json::object();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  EmbodimentRegistry registry;
  StatsTable stats;
};

Dataset load_dataset(Run& run, const std::string& dir) {
  const fs::path d = run.input("dataset", dir);
  Dataset ds;
  ds.trajectories = read_dataset_jsonl(d / "dataset.jsonl");
  ds.registry = registry_from_json(read_json(d / "registry.json"));
  ds.stats = stats_from_json(read_json(d / "stats.json"));
  return ds;
}

ActionCodec load_codec(Run& run, const std::string& path, const EmbodimentRegistry& registry) {
  auto codec = load_checkpoint(run.input("checkpoint", path));
  for (const auto& spec : registry.specs())
    if (!codec->registry().contains(spec.index) || codec->registry().by_index(spec.index).name != spec.name)
      throw std::runtime_error("checkpoint does not cover embodiment " + spec.name);
  codec->eval();
  return codec;
}

SplitConfig split_config(const json& cfg) {
  return strict(cfg, "split", to_json(SplitConfig{}), split_config_from_json);
}

TrainConfig train_config(const json& cfg, std::uint64_t seed) {
  auto c = strict(cfg, "train", to_json(TrainConfig{}), train_config_from_json);
  c.seed = seed;
  return c;
}

PolicyConfig policy_config(const json& cfg, std::uint64_t seed) {
  auto c = strict(cfg, "policy", to_json(PolicyConfig{}), policy_config_from_json);
  c.seed = seed;
  return c;
}

// Up to `limit` chunks split evenly over the registered embodiments.
ChunkedSet balanced(const ChunkedSet& set, const EmbodimentRegistry& registry, std::size_t limit) {
  const std::size_t per = std::max<std::size_t>(1, limit / registry.size());
  std::map<int, std::size_t> taken;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (taken[set.chunks[i].embodiment_index]++ < per) idx.push_back(i);
  return set.subset(idx);
}

std::string chunk_csv(const ActionChunk& c) {
  std::ostringstream os;
  os << "t";
  for (int d = 0; d < c.dim(); ++d) os << ",a" << d;
  os << '\n';
  for (int t = 0; t < c.steps(); ++t) {
    os << format_float(c.timestamps[t]);
    for (int d = 0; d < c.dim(); ++d) os << ',' << format_float(c.actions(t, d));
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_synth(const Options& opt) {
  Run run("synth", opt);
  const auto sc = strict(run.config(), "synth", to_json(SynthConfig{}), synth_config_from_json);
  run.resolve("synth", to_json(sc));
  const auto trajs = synth_dataset(sc, run.seed());
  const EmbodimentRegistry registry(sc.embodiments);
  const auto stats = compute_stats_per_embodiment(trajs);
  write_dataset_jsonl(run.out("dataset.jsonl"), trajs);
  write_json(run.out("registry.json"), registry_to_json(registry));
  write_json(run.out("stats.json"), stats_to_json(stats));
  run.finish();
  std::cout << "wrote " << trajs.size() << " trajectories to " << opt.out << "\n";
  return 0;
}

int cmd_train(const Options& opt) {
  Run run("train", opt);
  const auto split = split_config(run.config());
  const auto tc = train_config(run.config(), run.seed());
  run.resolve("split", to_json(split));
  run.resolve("train", to_json(tc));
  const auto ds = load_dataset(run, opt.dataset);
  const auto corpus = build_corpus(ds.trajectories, ds.registry, ds.stats, split);
  const auto t0 = std::chrono::steady_clock::now();
  auto result = train_tokenizer(corpus.train, corpus.validation, corpus.registry, tc);
  run.time("train_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  save_checkpoint(run.out("model.json"), result.codec, json{{"train", to_json(tc)}});
  write_text(run.out("train_log.csv"), training_log_csv(result.log));
  run.finish();
  const auto& last = result.log.empty() ? TrainLogRow{} : result.log.back();
  std::cout << "trained " << tc.steps << " steps; recon_l1 " << last.recon_l1 << ", or " << last.overlap << "\n";
  return 0;
}

int cmd_posttrain(const Options& opt) {
  Run run("posttrain", opt);
  const auto split = split_config(run.config());
  auto tmpl = to_json(PosttrainConfig{});
  tmpl.update(kPosttrainExtra);
  auto pc = strict(run.config(), "posttrain", tmpl, posttrain_config_from_json);
  pc.seed = run.seed();
  const auto audit_chunks = run.config().at("posttrain").at("audit_chunks").get<int>();
  if (audit_chunks < 1) throw ConfigError("invalid config section posttrain: audit_chunks must be >= 1");
  auto resolved = to_json(pc);
  resolved["audit_chunks"] = audit_chunks;
  run.resolve("split", to_json(split));
  run.resolve("posttrain", resolved);

  const auto ds = load_dataset(run, opt.dataset);
  auto base = load_codec(run, opt.checkpoint, ds.registry);
  const auto corpus = build_corpus(ds.trajectories, ds.registry, ds.stats, split);
  auto audit_set = corpus.validation.prefix(static_cast<std::size_t>(audit_chunks));
  const auto t0 = std::chrono::steady_clock::now();
  auto result = rvq_posttrain(base, corpus.train, audit_set, pc);
  run.time("posttrain_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  save_checkpoint(run.out("rvq.json"), result.codec, json{{"posttrain", resolved}, {"audit", result.audit.to_json()}});
  write_json(run.out("audit.json"), result.audit.to_json());
  write_text(run.out("posttrain_log.csv"), training_log_csv(result.log));
  run.finish();
  std::cout << result.audit.summary() << "\n";
  const bool ok = result.audit.level0_changed == 0 && result.audit.post_l2 <= result.audit.base_l2;
  if (!ok) std::cerr << "post-training audit failed\n";
  return ok ? 0 : 1;
}

int cmd_eval(const Options& opt) {
  Run run("eval", opt);
  const auto split = split_config(run.config());
  const auto ev = strict(run.config(), "eval", kEvalTemplate, [](const json& j) { return j; });
  const auto sigmas = ev.at("artifact_sigmas").get<std::vector<double>>();
  const int samples = ev.at("artifact_samples").get<int>();
  const int n_artifact = ev.at("artifact_chunks").get<int>();
  const auto max_chunks = ev.at("max_chunks").get<std::size_t>();
  if (samples < 1 || n_artifact < 1 || max_chunks < 1) throw ConfigError("invalid config section eval: counts must be >= 1");
  for (double s : sigmas)
    if (!(s >= 0.0)) throw ConfigError("invalid config section eval: sigma must be >= 0");
  run.resolve("split", to_json(split));
  run.resolve("eval", ev);

  const auto ds = load_dataset(run, opt.dataset);
  auto codec = load_codec(run, opt.checkpoint, ds.registry);
  const auto corpus = build_corpus(ds.trajectories, ds.registry, ds.stats, split);
  const auto val = balanced(corpus.validation, ds.registry, max_chunks);
  const CodecTokenizer all(codec);
  const CodecTokenizer base(codec, 1);

  json out;
  const auto orr = overlap_rate(base, val);
  out["overlap_rate"] = orr.overlap_rate;
  out["positional_match"] = orr.positional_match.value_or(0.0);
  out["overlap_pairs"] = orr.n_pairs;
  out["recon_l1"] = recon_error(all, val.chunks, ds.registry, ErrorNorm::kL1);
  out["recon_l2"] = recon_error(all, val.chunks, ds.registry, ErrorNorm::kL2);
  out["recon_l1_level0"] = recon_error(base, val.chunks, ds.registry, ErrorNorm::kL1);

  const int n = codec->config().perceiver.n_tokens;
  const auto seqs = base.encode_batch(val.chunks);
  std::vector<std::vector<std::int32_t>> rows;
  for (const auto& s : seqs) rows.push_back(s.codes[0]);
  const double h_joint = plugin_sequence_entropy(rows);
  const double h_sum = plugin_positional_entropy_sum(rows);
  const double bound = capacity_bound(n, codec->config().vocab_size);
  out["capacity"] = json{{"plugin_joint_bits", h_joint},
                         {"positional_sum_bits", h_sum},
                         {"bound_bits", bound},
                         {"chain_holds", h_joint <= h_sum + 1e-9 && h_sum <= bound + 1e-9}};
  out["budget"] = json{{"tokens_per_level", n}, {"levels", codec->levels()}, {"total", n * codec->levels()}};

  const auto step = std::max<std::size_t>(1, val.size() / static_cast<std::size_t>(n_artifact));
  std::ostringstream csv;
  csv.precision(9);
  csv << "sigma,mean_bits,min_bits,max_bits,chunks\n";
  json sweep = json::array();
  for (double sigma : sigmas) {
    double sum = 0.0, lo = 1e300, hi = -1e300;
    int count = 0;
    for (std::size_t i = 0; i < val.size() && count < n_artifact; i += step, ++count) {
      const double h = artifact_entropy(base, val.chunks[i], sigma, samples, run.seed() + i);
      sum += h;
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    csv << sigma << ',' << sum / count << ',' << lo << ',' << hi << ',' << count << '\n';
    sweep.push_back(json{{"sigma", sigma}, {"mean_bits", sum / count}});
  }
  out["artifact_entropy"] = sweep;
  write_json(run.out("eval.json"), out);
  write_text(run.out("artifact_entropy.csv"), csv.str());
  run.finish();
  std::cout << "or " << orr.overlap_rate << ", recon_l1 " << out["recon_l1"].get<double>() << "\n";
  return 0;
}

int cmd_compare(const Options& opt) {
  Run run("compare", opt);
  const auto split = split_config(run.config());
  const auto cc = strict(run.config(), "compare", kCompareTemplate, [](const json& j) { return j; });
  BinningConfig bc;
  bc.bins_per_dim = cc.at("binning").at("bins_per_dim");
  bc.horizon = cc.at("binning").at("horizon");
  StringConfig sc;
  sc.precision = cc.at("string").at("precision");
  sc.horizon = cc.at("string").at("horizon");
  DctBpeConfig dc;
  dc.dct_keep = cc.at("dct_bpe").at("dct_keep");
  dc.quant_scale = cc.at("dct_bpe").at("quant_scale");
  dc.base_bits = cc.at("dct_bpe").at("base_bits");
  dc.bpe_vocab = cc.at("dct_bpe").at("bpe_vocab");
  dc.min_corpus = cc.at("dct_bpe").at("min_corpus");
  const double delay = cc.at("per_token_delay_s");
  const int trials = cc.at("latency_trials");
  const auto max_chunks = cc.at("max_chunks").get<std::size_t>();
  run.resolve("split", to_json(split));
  run.resolve("compare", cc);

  const auto ds = load_dataset(run, opt.dataset);
  auto codec = load_codec(run, opt.checkpoint, ds.registry);
  const auto parts = split_trajectories(ds.trajectories, split.holdout_every);

  // Tokenizers with their own horizon get chunks of that length.
  auto chunks_for = [&](const Tokenizer& tok, const std::vector<Trajectory>& trajs) {
    std::optional<int> horizon;
    for (const auto& spec : ds.registry.specs()) {
      const int h = tok.horizon_steps(spec);
      if (h == spec.chunk_steps() && !horizon) continue;
      if (horizon && *horizon != h) throw std::runtime_error(tok.name() + ": horizon differs across embodiments");
      horizon = h;
    }
    return chunk_dataset(trajs, ds.registry, ds.stats, split.stride, horizon);
  };

  const CodecTokenizer codec_tok(codec);
  const BinningTokenizer binning(bc);
  const StringTokenizer strings(sc);
  const auto fit_corpus = chunk_dataset(parts.train, ds.registry, ds.stats, split.stride);
  const DctBpeTokenizer dct(dct_bpe_fit(fit_corpus.chunks, dc));
  const std::vector<const Tokenizer*> toks{&codec_tok, &binning, &strings, &dct};

  std::ostringstream csv;
  csv.precision(9);
  csv << "tokenizer,embodiment,action_dim,vocab_size,horizon,budget_mean,budget_std,recon_l1,overlap_rate,chunks\n";
  json table = json::array(), timing = json::array();
  for (const auto* tok : toks) {
    const auto all = chunks_for(*tok, parts.validation);
    for (const auto& spec : ds.registry.specs()) {
      const auto set = all.for_embodiment(spec.index).prefix(max_chunks);
      if (set.size() == 0) continue;
      const auto seqs = tok->encode_batch(set.chunks);
      double mean = 0.0, var = 0.0;
      for (const auto& s : seqs) mean += static_cast<double>(s.flatten().size());
      mean /= static_cast<double>(seqs.size());
      for (const auto& s : seqs) var += std::pow(static_cast<double>(s.flatten().size()) - mean, 2);
      const double sd = std::sqrt(var / static_cast<double>(seqs.size()));
      const double l1 = recon_error(*tok, set.chunks, ds.registry, ErrorNorm::kL1);
      const double orr = set.linked_indices().empty() ? 0.0 : overlap_rate(seqs, set.successor).overlap_rate;
      const int horizon = set.chunks.front().steps();
      csv << tok->name() << ',' << spec.name << ',' << spec.action_dim << ',' << tok->vocab_size() << ',' << horizon
          << ',' << mean << ',' << sd << ',' << l1 << ',' << orr << ',' << set.size() << '\n';
      table.push_back(json{{"tokenizer", tok->name()}, {"embodiment", spec.name}, {"action_dim", spec.action_dim},
                           {"vocab_size", tok->vocab_size()}, {"horizon", horizon}, {"budget_mean", mean},
                           {"budget_std", sd}, {"recon_l1", l1}, {"overlap_rate", orr}});
      const auto tp = throughput_latency(*tok, set.chunks, ds.registry, delay, trials);
      timing.push_back(json{{"tokenizer", tok->name()}, {"embodiment", spec.name}, {"latency_s", tp.latency_s},
                            {"actions_per_s", tp.actions_per_s}, {"encode_s", tp.encode_s}, {"decode_s", tp.decode_s}});
    }
  }
  write_text(run.out("compare.csv"), csv.str());
  write_json(run.out("compare.json"), table);
  write_json(run.out("dct_bpe_merges.json"), merges_to_json(dct.config()));
  run.time("throughput", timing);
  run.finish();
  std::cout << csv.str();
  return 0;
}

int cmd_perturb(const Options& opt) {
  Run run("perturb", opt);
  const auto split = split_config(run.config());
  const auto tc = train_config(run.config(), run.seed());
  const auto pc = policy_config(run.config(), run.seed());
  const auto pert = strict(run.config(), "perturb", to_json(PerturbConfig{}), perturb_config_from_json);
  run.resolve("split", to_json(split));
  run.resolve("train", to_json(tc));
  run.resolve("policy", to_json(pc));
  run.resolve("perturb", to_json(pert));
  const auto ds = load_dataset(run, opt.dataset);
  const auto corpus = build_corpus(ds.trajectories, ds.registry, ds.stats, split);
  const auto profiles = perturbation_study(corpus, tc, pc, pert, run.seed());
  for (const auto& p : profiles) {
    write_text(run.out("perturb_" + to_string(p.variant) + ".csv"), p.profile.csv());
    write_text(run.out("efficiency_" + to_string(p.variant) + ".csv"), p.curve.csv());
  }
  write_text(run.out("perturb_summary.csv"), perturbation_summary_csv(profiles));
  run.finish();
  std::cout << perturbation_summary_csv(profiles);
  return 0;
}

int cmd_transfer(const Options& opt) {
  Run run("transfer", opt);
  const auto tc = strict(run.config(), "transfer", kTransferTemplate, [](const json& j) { return j; });
  const auto split = split_config(run.config());
  run.resolve("split", to_json(split));
  run.resolve("transfer", tc);
  const auto ds = load_dataset(run, opt.dataset);
  auto codec = load_codec(run, opt.checkpoint, ds.registry);
  const auto& source = ds.registry.by_name(tc.at("source").get<std::string>());
  const auto& target = ds.registry.by_name(tc.at("target").get<std::string>());
  const auto corpus = build_corpus(ds.trajectories, ds.registry, ds.stats, split);

  const auto wanted = tc.at("chunk_index").get<std::size_t>();
  std::optional<ActionChunk> chunk;
  std::size_t seen = 0;
  for (const auto& c : corpus.validation.chunks)
    if (c.embodiment_index == source.index && seen++ == wanted) {
      chunk = c;
      break;
    }
  if (!chunk) throw std::runtime_error("no validation chunk " + std::to_string(wanted) + " for " + source.name);

  const CodecTokenizer tok(codec);
  const auto tokens = tok.encode(*chunk);
  const auto recon = tok.decode(tok.encode(*chunk), source);
  const auto moved = tok.decode(tokens, target);

  json out{{"source", source.name},
           {"target", target.name},
           {"tokens", serialize_tokens(tokens)},
           {"target_steps", moved.steps()},
           {"target_dim", moved.dim()},
           {"recon_l1", (recon.actions - chunk->actions).cwiseAbs().mean()},
           {"velocity_cosine", velocity_profile_cosine(*chunk, moved)},
           {"velocity_cosine_reconstruction", velocity_profile_cosine(*chunk, recon)}};
  if (source.index == target.index) out["bitwise_equal_to_reconstruction"] = moved.actions == recon.actions;
  write_text(run.out("transfer_source.csv"), chunk_csv(*chunk));
  write_text(run.out("transfer_reconstruction.csv"), chunk_csv(recon));
  write_text(run.out("transfer_target.csv"), chunk_csv(moved));
  write_json(run.out("transfer.json"), out);
  run.finish();
  std::cout << source.name << " -> " << target.name << ": velocity cosine " << out["velocity_cosine"].get<double>()
            << "\n";
  if (source.index == target.index && !out["bitwise_equal_to_reconstruction"].get<bool>()) {
    std::cerr << "same-embodiment transfer differs from reconstruction\n";
    return 1;
  }
  return 0;
}

int cmd_report(const Options& opt) {
  Run run("report", opt);
  const fs::path in = opt.input.empty() ? fs::path(opt.out) : fs::path(opt.input);
  if (!fs::is_directory(in)) throw std::runtime_error("missing directory: " + in.string());
  const fs::path plots = run.out("plots");
  fs::create_directories(plots);

  std::vector<fs::path> csvs;
  for (const auto& e : fs::recursive_directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().parent_path() != plots)
      csvs.push_back(e.path());
  std::sort(csvs.begin(), csvs.end());

  std::vector<Series> perturb, efficiency, transfer;
  json written = json::array();
  auto emit = [&](const std::string& name, const std::string& svg) {
    write_text(plots / name, svg);
    written.push_back(name);
  };
  for (const auto& path : csvs) {
    const auto stem = path.stem().string();
    const auto t = read_csv(path);
    if (stem == "train_log" || stem == "posttrain_log") {
      const auto step = t.column("step");
      emit(stem + "_recon.svg", svg_line_plot(stem, "step", "reconstruction L1", {{"recon_l1", step, t.column("recon_l1")}}));
      emit(stem + "_or.svg", svg_line_plot(stem, "step", "overlap rate", {{"or", step, t.column("or")}}));
    } else if (stem == "artifact_entropy") {
      emit("artifact_entropy.svg", svg_line_plot("artifact entropy", "sigma", "bits",
                                                 {{"mean", t.column("sigma"), t.column("mean_bits")}}));
    } else if (stem.rfind("perturb_", 0) == 0 && t.has("position")) {
      perturb.push_back({stem.substr(8), t.column("position"), t.column("mean_l1")});
    } else if (stem.rfind("efficiency_", 0) == 0) {
      efficiency.push_back({stem.substr(11), t.column("step"), t.column("token_accuracy")});
    } else if (stem.rfind("transfer_", 0) == 0 && t.has("a0")) {
      transfer.push_back({stem.substr(9), t.column("t"), t.column("a0")});
    }
  }
  if (!perturb.empty()) emit("perturbation.svg", svg_line_plot("token perturbation", "position", "L1", perturb));
  if (!efficiency.empty())
    emit("efficiency.svg", svg_line_plot("training efficiency", "step", "token accuracy", efficiency));
  if (!transfer.empty()) emit("transfer.svg", svg_line_plot("cross-embodiment transfer", "time (s)", "a0", transfer));
  run.resolve("plots", written);
  run.finish();
  std::cout << "wrote " << written.size() << " plots to " << plots.string() << "\n";
  return 0;
}

void set_threads() {
  int threads = 1;
  if (const char* env = std::getenv("ACTIONCODEC_THREADS")) {
    threads = std::atoi(env);
    if (threads < 1) throw std::invalid_argument("ACTIONCODEC_THREADS must be a positive integer");
  }
  torch::set_num_threads(threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action tokenizer toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;

  auto add = [&](const std::string& name, const std::string& help, bool config) {
    auto* sub = app.add_subcommand(name, help);
    auto* c = sub->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    if (config) c->required();
    sub->add_option("--seed", seed, "run seed (overrides the config)");
    sub->add_option("--out", opt.out, "output directory")->required();
    sub->add_option("--checkpoint", opt.checkpoint, "codec checkpoint manifest");
    sub->add_option("--dataset", opt.dataset, "dataset directory written by synth");
    return sub;
  };
  add("synth", "generate a synthetic multi-embodiment corpus", true);
  add("train", "train a codec", true);
  add("posttrain", "add residual levels to a trained codec", true);
  add("eval", "overlap, reconstruction, capacity and artifact entropy", true);
  add("compare", "codec against binning, string and DCT+BPE tokenizers", true);
  add("perturb", "token perturbation study across encoder variants", true);
  add("transfer", "decode one embodiment's tokens for another", true);
  add("report", "plots from the CSVs in a directory", false)
      ->add_option("--input", opt.input, "directory to scan (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opt.seed = seed;

  try {
    set_threads();
    const auto name = sub->get_name();
    if (name == "synth") return cmd_synth(opt);
    if (name == "train") return cmd_train(opt);
    if (name == "posttrain") return cmd_posttrain(opt);
    if (name == "eval") return cmd_eval(opt);
    if (name == "compare") return cmd_compare(opt);
    if (name == "perturb") return cmd_perturb(opt);
    if (name == "transfer") return cmd_transfer(opt);
    return cmd_report(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
