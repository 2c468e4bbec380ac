// valmetric: generate, rate, featurize, fit, predict, study, serve, export.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "valmetric/config.hpp"
#include "valmetric/dataset_io.hpp"
#include "valmetric/grade.hpp"
#include "valmetric/log.hpp"
#include "valmetric/metrics.hpp"
#include "valmetric/regress.hpp"
#include "valmetric/run_manifest.hpp"
#include "valmetric/studies.hpp"
#include "valmetric/universe.hpp"
#include "valmetric/rating_http.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
namespace vm = valmetric;

namespace {

constexpr int kExitUnknownCommand = 2;
constexpr int kExitConfig = 3;
constexpr int kExitData = 4;
constexpr int kExitNumerical = 5;

const std::set<std::string> kCommands{"generate", "metrics", "fit", "predict", "study", "serve", "export"};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

vm::RunConfig load_config(const Common& c) {
  return c.config_path.empty() ? vm::RunConfig{} : vm::RunConfig::load(c.config_path);
}

std::uint64_t require_seed(const Common& c, const std::string& cmd) {
  if (!c.seed) vm::fail(vm::ErrorKind::Config, "'" + cmd + "' needs --seed");
  return *c.seed;
}

vm::RunManifest start_run(const std::string& cmd, const Common& c) {
  vm::RunManifest m;
  m.command = cmd;
  m.seed = c.seed;
  m.started_at = vm::utc_timestamp();
  if (!c.config_path.empty()) m.inputs.push_back(c.config_path);
  return m;
}

nlohmann::ordered_json report_with_rmse(const vm::SeriesPair& p, const vm::MetricConfig& cfg) {
  return {{"rmse", vm::rmse(p)}, {"report", vm::full_report(p, cfg).to_json()}};
}

vm::SeriesPair load_pair(const std::string& x, const std::string& y) {
  return vm::align_pair(vm::load_series(x), vm::load_series(y));
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::optional<std::size_t> n_experts;
  std::optional<double> sigma_exp, sigma_measurement;
};

int cmd_generate(const Common& c, const GenerateArgs& a) {
  auto cfg = load_config(c);
  cfg.universe.seed = require_seed(c, "generate");
  if (a.n_experts) cfg.universe.n_experts = *a.n_experts;
  if (a.sigma_exp) cfg.universe.sigma_exp = *a.sigma_exp;
  if (a.sigma_measurement) cfg.universe.sigma_measurement = *a.sigma_measurement;
  cfg.universe.validate();
  const fs::path out = c.out.empty() ? "universe" : c.out;
  vm::claim_artifact_dir(out);

  auto run = start_run("generate", c);
  run.config = {{"universe", cfg.universe.to_json()}};
  const auto u = vm::build_dataset(cfg.universe);
  run.outputs = {(out / "manifest.json").string(), (out / "ratings.csv").string(), (out / "experiments").string(),
                 (out / "simulations").string()};
  run.finished_at = vm::utc_timestamp();
  vm::save_universe(out, u, cfg.universe, {{"run", run.to_json()}});
  std::cout << "wrote " << u.dataset.records.size() << " pairs, " << u.dataset.rating_count() << " ratings to "
            << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string x, y, dataset;
  std::optional<std::size_t> max_lag, window;
};

int cmd_metrics(const Common& c, const MetricsArgs& a) {
  auto cfg = load_config(c).pipeline.metrics;
  if (a.max_lag) cfg.max_lag = a.max_lag;
  if (a.window) cfg.window = a.window;
  if (a.dataset.empty() == (a.x.empty() || a.y.empty()))
    vm::fail(vm::ErrorKind::Config, "give either --x and --y or --dataset");

  nlohmann::ordered_json result;
  std::string csv;
  if (!a.dataset.empty()) {
    const auto loaded = vm::load_dataset(a.dataset);
    result["pairs"] = nlohmann::ordered_json::array();
    csv = vm::MetricReport::csv_header();
    for (const auto& r : loaded.dataset.records) {
      auto entry = report_with_rmse(*r.pair, cfg);
      csv += vm::full_report(*r.pair, cfg).csv_row(r.pair_id);
      entry = nlohmann::ordered_json{{"pair_id", r.pair_id}, {"rmse", entry["rmse"]}, {"report", entry["report"]}};
      result["pairs"].push_back(entry);
    }
  } else {
    result = report_with_rmse(load_pair(a.x, a.y), cfg);
  }

  if (c.out.empty()) {
    std::cout << result.dump(2) << "\n";
    return 0;
  }
  const fs::path out = c.out;
  vm::claim_artifact_dir(out);
  auto run = start_run("metrics", c);
  run.config = {{"metrics", vm::metric_config_to_json(cfg)}};
  run.inputs.push_back(a.dataset.empty() ? a.x : a.dataset);
  if (a.dataset.empty()) run.inputs.push_back(a.y);
  vm::write_json(out / "metrics.json", result);
  run.outputs.push_back((out / "metrics.json").string());
  if (!csv.empty()) {
    vm::write_file(out / "metrics.csv", csv);
    run.outputs.push_back((out / "metrics.csv").string());
  }
  vm::write_manifest(out, run);
  std::cout << "wrote " << (out / "metrics.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string dataset;
  std::optional<std::string> strategy;
  std::optional<double> lambda, train_fraction, corr_threshold;
};

int cmd_fit(const Common& c, const FitArgs& a) {
  auto cfg = load_config(c);
  const auto seed = require_seed(c, "fit");
  if (a.strategy) cfg.pipeline.strategy = vm::fit_strategy_from_string(*a.strategy);
  if (a.lambda) cfg.pipeline.lambda = a.lambda;
  if (a.train_fraction) cfg.pipeline.train_fraction = *a.train_fraction;
  if (a.corr_threshold) cfg.pipeline.corr_threshold = *a.corr_threshold;
  const fs::path out = c.out.empty() ? "model" : c.out;
  vm::claim_artifact_dir(out);

  auto run = start_run("fit", c);
  vm::LabeledDataset ds;
  if (a.dataset.empty()) {
    cfg.universe.seed = seed;
    ds = vm::build_dataset(cfg.universe).dataset;
    run.config["universe"] = cfg.universe.to_json();
  } else {
    ds = vm::load_dataset(a.dataset).dataset;
    run.inputs.push_back(a.dataset);
  }
  run.config["pipeline"] = cfg.pipeline.to_json();
  run.config["metrics"] = vm::metric_config_to_json(cfg.pipeline.metrics);

  const auto features = vm::compute_features_detailed(ds, cfg.pipeline.metrics);
  for (const auto& d : features.dropped) std::cout << "dropped " << d << "\n";
  const auto result = vm::run_pipeline(features.matrix, cfg.pipeline, seed);

  auto model_json = result.model.to_json();
  model_json["metric_config"] = vm::metric_config_to_json(cfg.pipeline.metrics);
  model_json["test_score"] = result.score;
  vm::write_json(out / "model.json", model_json);
  vm::write_file(out / "features.csv", features.matrix.to_csv());
  run.outputs = {(out / "model.json").string(), (out / "features.csv").string()};
  vm::write_manifest(out, run,
                     {{"test_score", result.score},
                      {"train_rows", result.train.rows()},
                      {"test_rows", result.test.rows()},
                      {"features", result.model.feature_names}});

  std::cout << "surviving features (" << result.model.feature_names.size() << "):";
  for (const auto& f : result.model.feature_names) std::cout << " " << f;
  std::cout << "\ntrain rows " << result.train.rows() << ", test rows " << result.test.rows() << "\n";
  std::cout << "test score m = " << vm::format_double(result.score) << "\n";
  std::cout << "model written to " << (out / "model.json").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model, x, y;
  double alpha = 0.05;
};

int cmd_predict(const Common& c, const PredictArgs& a) {
  nlohmann::json mj = vm::read_json(a.model);
  const auto model = vm::CustomMetricModel::from_json(mj);
  auto metric_cfg = mj.contains("metric_config") ? vm::metric_config_from_json(mj["metric_config"])
                                                 : load_config(c).pipeline.metrics;
  const auto pair = load_pair(a.x, a.y);
  const auto report = vm::full_report(pair, metric_cfg);
  const auto pi = vm::predict(model, vm::report_features(report), a.alpha);
  const auto g = vm::grade(std::clamp(pi.center, 0.0, 1.0));

  nlohmann::ordered_json out{{"center", pi.center},
                             {"alpha", pi.alpha},
                             {"simple_interval", {pi.simple_lo, pi.simple_hi}},
                             {"full_interval", {pi.full_lo, pi.full_hi}},
                             {"grade", g.label},
                             {"grade_rank", g.rank}};
  std::cout << out.dump(2) << "\n";
  if (!c.out.empty()) {
    const fs::path dir = c.out;
    vm::claim_artifact_dir(dir);
    auto run = start_run("predict", c);
    run.inputs = {a.model, a.x, a.y};
    run.config = {{"alpha", a.alpha}, {"metrics", vm::metric_config_to_json(metric_cfg)}};
    vm::write_json(dir / "prediction.json", out);
    run.outputs = {(dir / "prediction.json").string()};
    vm::write_manifest(dir, run);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct StudyArgs {
  std::vector<std::string> parameters;
  std::vector<double> values;
  std::optional<std::size_t> repeats;
};

int cmd_study(const Common& c, const StudyArgs& a) {
  auto cfg = load_config(c);
  const auto seed = require_seed(c, "study");
  if (a.repeats) cfg.repeats = *a.repeats;
  if (cfg.repeats == 0) vm::fail(vm::ErrorKind::Config, "--repeats must be >= 1");
  cfg.universe.seed = seed;

  std::vector<vm::SweepParameter> params;
  if (a.parameters.empty())
    params = {vm::SweepParameter::MeasurementNoise, vm::SweepParameter::NSimulations, vm::SweepParameter::NExperts,
              vm::SweepParameter::SigmaExp, vm::SweepParameter::CorrThreshold};
  for (const auto& p : a.parameters) params.push_back(vm::sweep_parameter_from_string(p));
  if (!a.values.empty()) {
    if (params.size() != 1) vm::fail(vm::ErrorKind::Config, "--values needs exactly one --parameter");
    cfg.sweep_values[vm::to_string(params[0])] = a.values;
  }

  const fs::path out = c.out.empty() ? "study" : c.out;
  vm::claim_artifact_dir(out);
  auto run = start_run("study", c);
  run.config = cfg.to_json();
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (auto p : params) {
    const auto name = vm::to_string(p);
    auto it = cfg.sweep_values.find(name);
    const auto values = it != cfg.sweep_values.end() ? it->second : vm::default_sweep_values(p);
    std::cout << name << ":" << std::flush;
    const auto res = vm::sweep(p, values, cfg.universe, cfg.pipeline, cfg.repeats, seed);
    const auto stem = vm::figure_name(p);
    vm::write_file(out / (stem + ".csv"), res.to_csv());
    vm::write_json(out / (stem + ".json"), res.to_json());
    run.outputs.push_back((out / (stem + ".csv")).string());
    run.outputs.push_back((out / (stem + ".json")).string());
    for (const auto& pt : res.points)
      std::cout << "  " << vm::format_double(pt.value) << " -> mean " << pt.stats.mean << " var " << pt.stats.variance;
    std::cout << "\n";
    summary[stem] = name;
  }
  vm::write_manifest(out, run, {{"figures", summary}});
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string store = "ratings";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui = "ui/dist";
};

httplib::Server* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
  vm::RatingService svc(a.store);
  httplib::Server srv;
  vm::install_routes(srv, svc, fs::path(a.ui));
  if (!fs::is_directory(a.ui)) vm::log::warn("no UI bundle at " + a.ui + "; serving the API only");
  g_server = &srv;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "rating service on http://" << a.host << ":" << a.port << " (store " << a.store << ")" << std::endl;
  if (!srv.listen(a.host, a.port)) vm::fail(vm::ErrorKind::Io, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string store = "ratings";
  std::string session;
  bool csv = false;
};

int cmd_export(const Common& c, const ExportArgs& a) {
  vm::RatingService svc(a.store);
  if (a.csv) {
    std::cout << svc.export_csv(a.session);
    return 0;
  }
  const fs::path out = c.out.empty() ? fs::path("export") / a.session : fs::path(c.out);
  vm::claim_artifact_dir(out);
  auto run = start_run("export", c);
  run.inputs = {(fs::path(a.store) / a.session).string()};
  run.outputs = {(out / "manifest.json").string(), (out / "ratings.csv").string(), (out / "series").string()};
  run.finished_at = vm::utc_timestamp();
  const auto ds = svc.export_labels(a.session);
  std::vector<vm::PairFiles> files;
  for (const auto& r : ds.records) files.push_back({"series/" + r.pair_id + ".x.csv", "series/" + r.pair_id + ".y.csv"});
  vm::save_dataset(out, ds, files, {{"session_id", a.session}, {"run", run.to_json()}});
  std::cout << "exported " << ds.records.size() << " pairs, " << ds.rating_count() << " ratings to " << out.string()
            << "\n";
  return 0;
}

int exit_code(vm::ErrorKind k) {
  switch (vm::category(k)) {
    case vm::ErrorCategory::Config: return kExitConfig;
    case vm::ErrorCategory::Numerical: return kExitNumerical;
    case vm::ErrorCategory::Data: return kExitData;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: valmetric <generate|metrics|fit|predict|study|serve|export> [options]\n";
    return kExitUnknownCommand;
  }
  const std::string first = argv[1];
  if (first != "-h" && first != "--help" && first != "--version" && !kCommands.count(first)) {
    std::cerr << "valmetric: unknown command '" << first << "'\n";
    return kExitUnknownCommand;
  }

  CLI::App app{"Validation-metric workbench: rate, featurize, fit and study time-series similarity metrics."};
  app.set_version_flag("--version", std::string(vm::kToolVersion));
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("--config", common.config_path, "JSON configuration file");
    if (with_seed) sub->add_option("--seed", common.seed, "master RNG seed");
    sub->add_option("--out", common.out, "output directory");
  };

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "build a synthetic universe dataset");
  add_common(generate, true);
  generate->add_option("--n-experts", gen.n_experts, "synthetic experts per pair");
  generate->add_option("--sigma-exp", gen.sigma_exp, "expert rating noise");
  generate->add_option("--sigma-measurement", gen.sigma_measurement, "measurement noise");

  MetricsArgs met;
  auto* metrics = app.add_subcommand("metrics", "metric reports for a pair or a dataset");
  add_common(metrics, false);
  metrics->add_option("--x", met.x, "simulation series (CSV or JSON)");
  metrics->add_option("--y", met.y, "measurement series (CSV or JSON)");
  metrics->add_option("--dataset", met.dataset, "dataset directory");
  metrics->add_option("--max-lag", met.max_lag, "cross-correlation lag bound");
  metrics->add_option("--window", met.window, "DTW band half-width");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "featurize, drop correlated features, split, fit, score");
  add_common(fit, true);
  fit->add_option("--dataset", fa.dataset, "dataset directory (default: synthetic universe)");
  fit->add_option("--strategy", fa.strategy, "ols or lasso")->check(CLI::IsMember({"ols", "lasso"}));
  fit->add_option("--lambda", fa.lambda, "LASSO penalty (cross-validated when omitted)");
  fit->add_option("--train-fraction", fa.train_fraction, "fraction of pairs used for training");
  fit->add_option("--corr-threshold", fa.corr_threshold, "absolute correlation above which features are dropped");

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "rate a pair with a fitted model");
  add_common(predict, false);
  predict->add_option("--model", pa.model, "model.json from fit")->required();
  predict->add_option("--x", pa.x, "simulation series")->required();
  predict->add_option("--y", pa.y, "measurement series")->required();
  predict->add_option("--alpha", pa.alpha, "interval miscoverage level")->check(CLI::Range(1e-9, 1.0 - 1e-9));

  StudyArgs sa;
  auto* study = app.add_subcommand("study", "sensitivity sweeps (fig7..fig11 CSVs)");
  add_common(study, true);
  study->add_option("--parameter", sa.parameters,
                    "measurement_noise, n_simulations, n_experts, sigma_exp or corr_threshold (default: all)");
  study->add_option("--values", sa.values, "sweep values for a single parameter");
  study->add_option("--repeats", sa.repeats, "random splits per value");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "rating service and UI");
  serve->add_option("--store", sv.store, "session store directory");
  serve->add_option("--host", sv.host, "bind address");
  serve->add_option("--port", sv.port, "port")->check(CLI::Range(0, 65535));
  serve->add_option("--ui", sv.ui, "static UI directory");

  ExportArgs ea;
  auto* exp = app.add_subcommand("export", "write a rating session as a dataset directory");
  add_common(exp, false);
  exp->add_option("--store", ea.store, "session store directory");
  exp->add_option("--session", ea.session, "session id")->required();
  exp->add_flag("--csv", ea.csv, "print the ratings CSV instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*generate) return cmd_generate(common, gen);
    if (*metrics) return cmd_metrics(common, met);
    if (*fit) return cmd_fit(common, fa);
    if (*predict) return cmd_predict(common, pa);
    if (*study) return cmd_study(common, sa);
    if (*serve) return cmd_serve(sv);
    if (*exp) return cmd_export(common, ea);
  } catch (const vm::Error& e) {
    std::cerr << "valmetric: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "valmetric: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUnknownCommand;
}
