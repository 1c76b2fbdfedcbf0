#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddopt/linalg.hpp"
#include "ddopt/metrics.hpp"
#include "ddopt/model.hpp"

namespace ddopt::io {

inline constexpr const char* kVersion = "0.1.0";

/// Row-major array of rows, each entry an [re, im] pair.
nlohmann::json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::json& j);

/// {seed, n_spins, J, beta} plus, when requested, the unit-norm error and
/// bath shapes so the model can be rebuilt without regenerating the bath.
nlohmann::json system_to_json(const SystemModel& sys, bool include_matrices);
SystemModel system_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const DistanceReport& r);

std::string read_text_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Record written next to every command output. `config` is the fully
/// resolved command input, so replaying it needs nothing else.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;  // file names relative to the output directory
  double wall_clock_s = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

}  // namespace ddopt::io
