#include "actioncodec/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace actioncodec {

using nlohmann::json;

namespace {

Matrix matrix_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw std::invalid_argument(std::string("field '") + field + "' must be a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw std::invalid_argument(std::string("ragged rows in field '") + field + "'");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// Fixed textual form (17 significant digits) so files round-trip exactly.
void write_matrix(std::ostream& os, const Matrix& m) {
  os << '[';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) os << ',';
    os << '[';
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << format_float(m(r, c));
    }
    os << ']';
  }
  os << ']';
}

}  // namespace

std::string format_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json to_json(const EmbodimentSpec& spec) {
  return json{{"name", spec.name},
              {"index", spec.index},
              {"control_hz", spec.control_hz},
              {"action_dim", spec.action_dim},
              {"chunk_duration", spec.chunk_duration}};
}

EmbodimentSpec embodiment_from_json(const json& j) {
  EmbodimentSpec s;
  s.name = j.at("name").get<std::string>();
  s.index = j.at("index").get<int>();
  s.control_hz = j.at("control_hz").get<double>();
  s.action_dim = j.at("action_dim").get<int>();
  s.chunk_duration = j.value("chunk_duration", 1.0);
  s.validate();
  return s;
}

json registry_to_json(const EmbodimentRegistry& registry) {
  json list = json::array();
  for (const auto& s : registry.specs()) list.push_back(to_json(s));
  return json{{"embodiments", list}};
}

EmbodimentRegistry registry_from_json(const json& j) {
  EmbodimentRegistry reg;
  for (const auto& e : j.at("embodiments")) reg.add(embodiment_from_json(e));
  return reg;
}

json to_json(const SynthConfig& c) {
  json embodiments = json::array();
  for (const auto& e : c.embodiments) embodiments.push_back(to_json(e));
  return json{{"embodiments", embodiments}, {"n_tasks", c.n_tasks},
              {"trajectories_per_task", c.trajectories_per_task}, {"duration_s", c.duration_s},
              {"sinusoids", c.sinusoids}, {"poly_order", c.poly_order},
              {"goal_dim", c.goal_dim}, {"goal_range", c.goal_range},
              {"amplitude", c.amplitude}, {"jitter", c.jitter}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  for (const auto& e : j.at("embodiments")) c.embodiments.push_back(embodiment_from_json(e));
  c.n_tasks = j.value("n_tasks", c.n_tasks);
  c.trajectories_per_task = j.value("trajectories_per_task", c.trajectories_per_task);
  c.duration_s = j.value("duration_s", c.duration_s);
  c.sinusoids = j.value("sinusoids", c.sinusoids);
  c.poly_order = j.value("poly_order", c.poly_order);
  c.goal_dim = j.value("goal_dim", c.goal_dim);
  c.goal_range = j.value("goal_range", c.goal_range);
  c.amplitude = j.value("amplitude", c.amplitude);
  c.jitter = j.value("jitter", c.jitter);
  c.validate();
  return c;
}

json stats_to_json(const StatsTable& stats) {
  json out = json::object();
  for (const auto& [name, s] : stats) out[name] = json{{"low", s.low}, {"high", s.high}};
  return out;
}

StatsTable stats_from_json(const json& j) {
  StatsTable table;
  for (const auto& [name, s] : j.items()) {
    DatasetStats st;
    st.low = s.at("low").get<std::vector<double>>();
    st.high = s.at("high").get<std::vector<double>>();
    if (st.low.size() != st.high.size()) throw std::invalid_argument("stats low/high size mismatch for " + name);
    table[name] = std::move(st);
  }
  return table;
}

void write_dataset_jsonl(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& t : trajectories) {
    os << "{\"embodiment\":" << json(t.embodiment).dump() << ",\"actions\":";
    write_matrix(os, t.actions);
    os << ",\"observation\":";
    write_matrix(os, t.observation);
    os << ",\"language_id\":" << t.language_id << ",\"task_id\":" << t.task_id << "}\n";
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Trajectory> read_dataset_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Trajectory t;
      t.embodiment = j.at("embodiment").get<std::string>();
      t.actions = matrix_from_json(j.at("actions"), "actions");
      t.observation = matrix_from_json(j.at("observation"), "observation");
      t.language_id = j.at("language_id").get<int>();
      t.task_id = j.at("task_id").get<int>();
      if (!t.actions.allFinite()) throw std::invalid_argument("non-finite actions");
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) { return json::parse(read_text(path)); }

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string checksum_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_checksum(const std::filesystem::path& path) { return checksum_hex(read_text(path)); }

}  // namespace actioncodec
