#pragma once

// Provenance record written once into every CLI artifact directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/dataset_io.hpp"
#include "valmetric/error.hpp"
#include "valmetric/rating_service.hpp"

#ifndef VALMETRIC_VERSION
#define VALMETRIC_VERSION "0.0.0"
#endif

namespace valmetric {

inline constexpr const char* kToolVersion = VALMETRIC_VERSION;

struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["tool_version"] = kToolVersion;
    j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    return j;
  }
};

/// Manifests are never overwritten: an existing one means the directory already holds an artifact.
inline void claim_artifact_dir(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "manifest.json"))
    fail(ErrorKind::Config, dir.string() + " already contains a manifest; choose a fresh --out directory");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

/// Adds the run record under "run"; dataset directories keep their own fields at the top level.
inline void write_manifest(const std::filesystem::path& dir, RunManifest run,
                           nlohmann::ordered_json body = nlohmann::ordered_json::object()) {
  run.finished_at = utc_timestamp();
  body["run"] = run.to_json();
  write_json(dir / "manifest.json", body);
}

}  // namespace valmetric
