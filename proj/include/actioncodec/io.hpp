#pragma once

#include "actioncodec/data.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace actioncodec {

nlohmann::json to_json(const EmbodimentSpec& spec);
EmbodimentSpec embodiment_from_json(const nlohmann::json& j);

nlohmann::json registry_to_json(const EmbodimentRegistry& registry);
EmbodimentRegistry registry_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SynthConfig& config);
// Missing scalar keys keep their defaults; "embodiments" is required.
SynthConfig synth_config_from_json(const nlohmann::json& j);

nlohmann::json stats_to_json(const StatsTable& stats);
StatsTable stats_from_json(const nlohmann::json& j);

// One trajectory per line. Floats are written with 17 significant digits.
void write_dataset_jsonl(const std::filesystem::path& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_dataset_jsonl(const std::filesystem::path& path);

std::string format_float(double v);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// FNV-1a 64-bit, hex encoded.
std::string checksum_hex(const std::string& bytes);
std::string file_checksum(const std::filesystem::path& path);

}  // namespace actioncodec
