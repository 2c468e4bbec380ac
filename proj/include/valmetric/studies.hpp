#pragma once

// Sensitivity studies: repeated random pair-level splits, refits and test
// scores, swept over one universe or pipeline parameter.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/error.hpp"
#include "valmetric/features.hpp"
#include "valmetric/format.hpp"
#include "valmetric/parallel.hpp"
#include "valmetric/regress.hpp"
#include "valmetric/rng.hpp"
#include "valmetric/universe.hpp"

namespace valmetric {

struct PipelineConfig {
  double train_fraction = 0.8;
  double corr_threshold = 0.9;
  FitStrategy strategy = FitStrategy::Ols;
  std::optional<double> lambda;  ///< LASSO penalty; cross-validated when absent
  double alpha = 0.05;
  MetricConfig metrics;

  nlohmann::ordered_json to_json() const {
    return {{"train_fraction", train_fraction},
            {"corr_threshold", corr_threshold},
            {"strategy", to_string(strategy)},
            {"lambda", lambda ? nlohmann::ordered_json(*lambda) : nlohmann::ordered_json(nullptr)},
            {"alpha", alpha}};
  }

  static PipelineConfig from_json(const nlohmann::json& j) { return from_json(j, PipelineConfig()); }

  static PipelineConfig from_json(const nlohmann::json& j, PipelineConfig c) {
    if (!j.is_object()) fail(ErrorKind::Config, "pipeline config must be an object");
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "train_fraction") c.train_fraction = v.get<double>();
        else if (k == "corr_threshold") c.corr_threshold = v.get<double>();
        else if (k == "strategy") c.strategy = fit_strategy_from_string(v.get<std::string>());
        else if (k == "lambda") c.lambda = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        else if (k == "alpha") c.alpha = v.get<double>();
        else fail(ErrorKind::Config, "unknown pipeline key '" + k + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, std::string("pipeline config: ") + e.what());
    }
    return c;
  }
};

struct PipelineRun {
  FeatureMatrix train;
  FeatureMatrix test;
  CustomMetricModel model;
  double score = 0.0;
};

/// split -> drop correlated columns (decided on the training rows) -> fit -> test score
inline PipelineRun run_pipeline(const FeatureMatrix& fm, const PipelineConfig& cfg, std::uint64_t seed) {
  auto parts = split(fm, cfg.train_fraction, seed);
  PipelineRun run;
  run.train = drop_correlated(parts.train, cfg.corr_threshold);
  run.test = parts.test.select_columns(run.train.feature_names);
  if (cfg.strategy == FitStrategy::Ols)
    run.model = fit_ols(run.train);
  else if (cfg.lambda)
    run.model = fit_lasso(run.train, *cfg.lambda);
  else
    run.model = fit_lasso_cv(run.train, seed);
  run.model.seed = seed;
  run.score = score(run.model, run.test);
  return run;
}

struct ScoreStats {
  double mean = 0.0;
  double variance = 0.0;  ///< population variance over repeats
  std::vector<double> scores;
  std::vector<std::uint64_t> seeds;
};

inline ScoreStats summarize(std::vector<double> scores, std::vector<std::uint64_t> seeds) {
  ScoreStats s;
  const double n = static_cast<double>(scores.size());
  for (double v : scores) s.mean += v;
  s.mean /= n;
  for (double v : scores) s.variance += (v - s.mean) * (v - s.mean);
  s.variance /= n;
  s.scores = std::move(scores);
  s.seeds = std::move(seeds);
  return s;
}

inline ScoreStats repeated_score(const FeatureMatrix& fm, const PipelineConfig& cfg, std::size_t repeats,
                                 std::uint64_t seed, std::uint64_t stream = 0) {
  if (repeats == 0) fail(ErrorKind::InvalidArgument, "repeats must be >= 1");
  std::vector<double> scores(repeats);
  std::vector<std::uint64_t> seeds(repeats);
  for (std::size_t r = 0; r < repeats; ++r) seeds[r] = derive_seed(seed, {stream, r});
  parallel_for(repeats, [&](std::size_t r) {
    try {
      scores[r] = run_pipeline(fm, cfg, seeds[r]).score;
    } catch (const Error& e) {
      throw Error(e.kind(), "repeat " + std::to_string(r) + " (seed " + std::to_string(seeds[r]) + "): " + e.what());
    }
  });
  return summarize(std::move(scores), std::move(seeds));
}

inline ScoreStats repeated_score(const LabeledDataset& ds, const PipelineConfig& cfg, std::size_t repeats,
                                 std::uint64_t seed) {
  return repeated_score(compute_features(ds, cfg.metrics), cfg, repeats, seed);
}

enum class SweepParameter { MeasurementNoise, NSimulations, NExperts, SigmaExp, CorrThreshold };

inline std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::MeasurementNoise: return "measurement_noise";
    case SweepParameter::NSimulations: return "n_simulations";
    case SweepParameter::NExperts: return "n_experts";
    case SweepParameter::SigmaExp: return "sigma_exp";
    case SweepParameter::CorrThreshold: return "corr_threshold";
  }
  return "unknown";
}

inline SweepParameter sweep_parameter_from_string(const std::string& s) {
  for (auto p : {SweepParameter::MeasurementNoise, SweepParameter::NSimulations, SweepParameter::NExperts,
                 SweepParameter::SigmaExp, SweepParameter::CorrThreshold})
    if (to_string(p) == s) return p;
  fail(ErrorKind::Config, "unknown sweep parameter '" + s + "'");
}

/// Figure file stem for each swept parameter.
inline std::string figure_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::MeasurementNoise: return "fig7";
    case SweepParameter::NSimulations: return "fig8";
    case SweepParameter::NExperts: return "fig9";
    case SweepParameter::SigmaExp: return "fig10";
    case SweepParameter::CorrThreshold: return "fig11";
  }
  return "fig";
}

inline std::vector<double> default_sweep_values(SweepParameter p) {
  switch (p) {
    case SweepParameter::MeasurementNoise: return {0.0025, 0.005, 0.01, 0.02, 0.04};
    case SweepParameter::NSimulations: return {2, 3, 4, 5};
    case SweepParameter::NExperts: return {2, 5, 10, 15};
    case SweepParameter::SigmaExp: return {0.01, 0.05, 0.1, 0.2};
    case SweepParameter::CorrThreshold: return {0.8, 0.9, 0.99};
  }
  return {};
}

struct StudyPoint {
  double value = 0.0;
  ScoreStats stats;
};

struct StudyResult {
  std::string parameter;
  std::uint64_t seed = 0;
  std::size_t repeats = 0;
  std::vector<StudyPoint> points;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["parameter"] = parameter;
    j["seed"] = seed;
    j["repeats"] = repeats;
    j["points"] = nlohmann::ordered_json::array();
    for (const auto& p : points)
      j["points"].push_back({{"value", p.value},
                             {"mean_score", p.stats.mean},
                             {"score_variance", p.stats.variance},
                             {"repeat_count", p.stats.scores.size()},
                             {"scores", p.stats.scores},
                             {"seeds", p.stats.seeds}});
    return j;
  }

  /// Tidy form: parameter,value,repeat,score
  std::string to_csv() const {
    std::string out = "parameter,value,repeat,score\n";
    for (const auto& p : points)
      for (std::size_t r = 0; r < p.stats.scores.size(); ++r)
        out += parameter + ',' + format_double(p.value) + ',' + std::to_string(r) + ',' +
               format_double(p.stats.scores[r]) + '\n';
    return out;
  }
};

/// Universe configuration with one swept parameter replaced.
inline UniverseConfig apply_sweep_value(UniverseConfig c, SweepParameter p, double value) {
  auto as_count = [&](double v) {
    if (!(v >= 1.0) || v != std::floor(v)) fail(ErrorKind::InvalidArgument, "count must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  switch (p) {
    case SweepParameter::MeasurementNoise:
      if (value < 0.0) fail(ErrorKind::InvalidArgument, "measurement noise must be >= 0");
      c.sigma_measurement = value;
      break;
    case SweepParameter::NSimulations: {
      // grid points per parameter axis; g*g simulations per experiment
      const auto g = as_count(value);
      c.k_grid = equidistant(0.95, 1.15, g);
      c.d_grid = equidistant(0.95, 1.15, g);
      break;
    }
    case SweepParameter::NExperts:
      c.n_experts = as_count(value);
      break;
    case SweepParameter::SigmaExp:
      if (value < 0.0) fail(ErrorKind::InvalidArgument, "sigma_exp must be >= 0");
      c.sigma_exp = value;
      break;
    case SweepParameter::CorrThreshold:
      break;
  }
  return c;
}

inline StudyResult sweep(SweepParameter param, const std::vector<double>& values, const UniverseConfig& base,
                         const PipelineConfig& pipeline, std::size_t repeats, std::uint64_t seed) {
  if (values.empty()) fail(ErrorKind::InvalidArgument, "sweep needs at least one value");
  StudyResult res;
  res.parameter = to_string(param);
  res.seed = seed;
  res.repeats = repeats;

  std::optional<FeatureMatrix> shared;
  if (param == SweepParameter::CorrThreshold) {
    for (double v : values)
      if (!(v > 0.0 && v <= 1.0)) fail(ErrorKind::InvalidArgument, "correlation threshold must be in (0,1]");
    shared = compute_features(build_dataset(base).dataset, pipeline.metrics);
  }

  for (std::size_t i = 0; i < values.size(); ++i) {
    PipelineConfig cfg = pipeline;
    FeatureMatrix fm;
    if (param == SweepParameter::CorrThreshold) {
      cfg.corr_threshold = values[i];
      fm = *shared;
    } else {
      fm = compute_features(build_dataset(apply_sweep_value(base, param, values[i])).dataset, pipeline.metrics);
    }
    res.points.push_back({values[i], repeated_score(fm, cfg, repeats, seed, i)});
  }
  return res;
}

}  // namespace valmetric
