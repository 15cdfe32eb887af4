#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hammer {

inline constexpr const char* kToolkitVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Provenance record written next to every artifact as <artifact>.manifest.json.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
  std::string started_at, finished_at;                       // UTC, ISO 8601
  nlohmann::json extra = nlohmann::json::object();

  void add_input(const std::filesystem::path& p);
  void add_output(const std::filesystem::path& p);
  nlohmann::json to_json() const;
};

std::string utc_timestamp();
std::filesystem::path manifest_path(const std::filesystem::path& artifact);
/// Stamps finished_at and writes the manifest beside each output.
void write_manifests(RunManifest& m);

}  // namespace hammer
