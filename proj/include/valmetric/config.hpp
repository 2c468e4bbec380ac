#pragma once

// One JSON document configures a CLI run:
//   {"universe": {...}, "pipeline": {...}, "metrics": {...}, "study": {"repeats": 50, "values": {...}}}
// Every section is optional; unknown keys are configuration errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/dataset_io.hpp"
#include "valmetric/error.hpp"
#include "valmetric/metrics.hpp"
#include "valmetric/studies.hpp"
#include "valmetric/universe.hpp"

namespace valmetric {

inline nlohmann::ordered_json metric_config_to_json(const MetricConfig& c) {
  auto opt = [](const std::optional<std::size_t>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  return {{"max_lag", opt(c.max_lag)},
          {"window", opt(c.window)},
          {"normalizer", c.normalizer == NrmseNormalizer::Range ? "range" : "mean"},
          {"eearth_weights", {c.eearth_weights.phase, c.eearth_weights.magnitude, c.eearth_weights.slope}},
          {"corridor", {{"inner", c.corridor.inner}, {"outer", c.corridor.outer}}}};
}

inline MetricConfig metric_config_from_json(const nlohmann::json& j, MetricConfig c) {
  if (!j.is_object()) fail(ErrorKind::Config, "metrics config must be an object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "max_lag") c.max_lag = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
      else if (k == "window") c.window = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
      else if (k == "normalizer") {
        const auto s = v.get<std::string>();
        if (s == "range") c.normalizer = NrmseNormalizer::Range;
        else if (s == "mean") c.normalizer = NrmseNormalizer::Mean;
        else fail(ErrorKind::Config, "normalizer must be 'range' or 'mean'");
      } else if (k == "eearth_weights") {
        auto w = v.get<std::array<double, 3>>();
        c.eearth_weights = {w[0], w[1], w[2]};
      } else if (k == "corridor") {
        c.corridor.inner = v.value("inner", c.corridor.inner);
        c.corridor.outer = v.value("outer", c.corridor.outer);
      } else {
        fail(ErrorKind::Config, "unknown metrics key '" + k + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("metrics config: ") + e.what());
  }
  if (!(c.corridor.inner > 0.0 && c.corridor.inner < c.corridor.outer))
    fail(ErrorKind::Config, "corridor needs 0 < inner < outer");
  return c;
}

inline MetricConfig metric_config_from_json(const nlohmann::json& j) { return metric_config_from_json(j, {}); }

struct RunConfig {
  UniverseConfig universe;
  PipelineConfig pipeline;
  std::size_t repeats = 50;
  std::map<std::string, std::vector<double>> sweep_values;  ///< parameter -> values

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["universe"] = universe.to_json();
    j["pipeline"] = pipeline.to_json();
    j["metrics"] = metric_config_to_json(pipeline.metrics);
    nlohmann::ordered_json values = nlohmann::ordered_json::object();
    for (const auto& [k, v] : sweep_values) values[k] = v;
    j["study"] = {{"repeats", repeats}, {"values", values}};
    return j;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
    RunConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      if (k == "universe") c.universe = UniverseConfig::from_json(it.value());
      else if (k == "pipeline") {
        auto metrics = c.pipeline.metrics;
        c.pipeline = PipelineConfig::from_json(it.value());
        c.pipeline.metrics = metrics;
      } else if (k == "metrics") c.pipeline.metrics = metric_config_from_json(it.value());
      else if (k == "study") {
        const auto& s = it.value();
        if (!s.is_object()) fail(ErrorKind::Config, "study config must be an object");
        try {
          for (auto st = s.begin(); st != s.end(); ++st) {
            if (st.key() == "repeats") c.repeats = st.value().get<std::size_t>();
            else if (st.key() == "values") {
              for (auto v = st.value().begin(); v != st.value().end(); ++v) {
                sweep_parameter_from_string(v.key());
                c.sweep_values[v.key()] = v.value().get<std::vector<double>>();
              }
            } else fail(ErrorKind::Config, "unknown study key '" + st.key() + "'");
          }
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorKind::Config, std::string("study config: ") + e.what());
        }
        if (c.repeats == 0) fail(ErrorKind::Config, "study repeats must be >= 1");
      } else {
        fail(ErrorKind::Config, "unknown config section '" + k + "'");
      }
    }
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::Config, "config file " + path.string() + " not found");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, path.string() + ": " + e.what());
    }
    return from_json(j);
  }
};

}  // namespace valmetric
