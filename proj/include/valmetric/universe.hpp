#pragma once

// Manufactured universe: PT2 step responses as synthetic "experiments" and
// "simulations", plus synthetic expert ratings driven by the parameter mismatch.

#include <array>
#include <cmath>
#include <cstdint>
#include <algorithm>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/error.hpp"
#include "valmetric/features.hpp"
#include "valmetric/parallel.hpp"
#include "valmetric/rng.hpp"
#include "valmetric/series.hpp"

namespace valmetric {

/// count points evenly spaced over [lo, hi]; a single point sits at lo.
inline std::vector<double> equidistant(double lo, double hi, std::size_t count) {
  std::vector<double> v;
  for (std::size_t i = 0; i < count; ++i)
    v.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return v;
}

struct UniverseConfig {
  double k0 = 1.0;
  double d0 = 0.5;
  double t0 = 0.07;
  double sigma_measurement = 0.01;
  std::vector<double> p0_values{0.0, 1.5, 3.0};     ///< 1/s
  std::vector<double> t_delay_ms_values{0.0, 0.5, 1.0};
  std::vector<double> k_grid = equidistant(0.95, 1.15, 5);  ///< relative to k0
  std::vector<double> d_grid = equidistant(0.95, 1.15, 5);  ///< relative to d0
  double w_k = 0.7;
  double w_d = 0.7;
  double sigma_exp = 0.05;
  std::size_t n_experts = 10;
  double dt = 1e-3;
  double t_end = 1.0;
  double step_time = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& m) { fail(ErrorKind::Config, "universe: " + m); };
    if (sigma_measurement < 0.0 || sigma_exp < 0.0) bad("sigmas must be >= 0");
    if (p0_values.empty() || t_delay_ms_values.empty() || k_grid.empty() || d_grid.empty()) bad("grids must be non-empty");
    for (double p : p0_values)
      if (p < 0.0) bad("p0 values must be >= 0");
    for (double f : k_grid)
      if (!(f > 0.0)) bad("k grid factors must be > 0");
    for (double f : d_grid)
      if (!(f > 0.0)) bad("d grid factors must be > 0");
    if (!(dt > 0.0)) bad("dt must be > 0");
    if (!(t_end > step_time)) bad("t_end must exceed the step time");
    if (!(t0 > 0.0 && d0 > 0.0 && k0 > 0.0)) bad("reference parameters must be > 0");
    if (n_experts == 0) bad("n_experts must be >= 1");
  }

  nlohmann::ordered_json to_json() const {
    return {{"k0", k0},
            {"d0", d0},
            {"t0", t0},
            {"sigma_measurement", sigma_measurement},
            {"p0_values", p0_values},
            {"t_delay_ms_values", t_delay_ms_values},
            {"k_grid", k_grid},
            {"d_grid", d_grid},
            {"w_k", w_k},
            {"w_d", w_d},
            {"sigma_exp", sigma_exp},
            {"n_experts", n_experts},
            {"dt", dt},
            {"t_end", t_end},
            {"step_time", step_time},
            {"seed", seed}};
  }

  /// Missing keys keep their defaults; unknown keys are rejected.
  static UniverseConfig from_json(const nlohmann::json& j) { return from_json(j, UniverseConfig()); }

  static UniverseConfig from_json(const nlohmann::json& j, UniverseConfig c) {
    if (!j.is_object()) fail(ErrorKind::Config, "universe config must be an object");
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "k0") c.k0 = v.get<double>();
        else if (k == "d0") c.d0 = v.get<double>();
        else if (k == "t0") c.t0 = v.get<double>();
        else if (k == "sigma_measurement") c.sigma_measurement = v.get<double>();
        else if (k == "p0_values") c.p0_values = v.get<std::vector<double>>();
        else if (k == "t_delay_ms_values") c.t_delay_ms_values = v.get<std::vector<double>>();
        else if (k == "k_grid") c.k_grid = v.get<std::vector<double>>();
        else if (k == "d_grid") c.d_grid = v.get<std::vector<double>>();
        else if (k == "w_k") c.w_k = v.get<double>();
        else if (k == "w_d") c.w_d = v.get<double>();
        else if (k == "sigma_exp") c.sigma_exp = v.get<double>();
        else if (k == "n_experts") c.n_experts = v.get<std::size_t>();
        else if (k == "dt") c.dt = v.get<double>();
        else if (k == "t_end") c.t_end = v.get<double>();
        else if (k == "step_time") c.step_time = v.get<double>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else fail(ErrorKind::Config, "unknown universe key '" + k + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, std::string("universe config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

struct Pt2Params {
  double k = 1.0;
  double d = 0.5;
  double t = 0.07;
  double process_noise = 0.0;  ///< 1/s, top-left entry of the system matrix
  double t_delay = 0.0;        ///< s
  double step_time = 0.1;      ///< s, before the delay
};

/// RK4 step response of x1' = P x1 + x2, x2' = -x1/T^2 - 2D x2/T + K u/T^2,
/// x(0) = 0, u = 1 from step_time + t_delay on. Returns x1 on i*dt.
inline TimeSeries simulate_pt2(const Pt2Params& p, double dt, double t_end, std::string name = "pt2") {
  if (!(p.t > 0.0) || !(p.d > 0.0)) fail(ErrorKind::InvalidArgument, "PT2 needs t > 0 and d > 0");
  if (!(dt > 0.0) || dt > p.t / 20.0)
    fail(ErrorKind::InvalidArgument, "dt must satisfy 0 < dt <= T/20 for PT2 resolution");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  const double t_on = p.step_time + p.t_delay;
  const double a21 = -1.0 / (p.t * p.t), a22 = -2.0 * p.d / p.t, b2 = p.k / (p.t * p.t);
  auto rhs = [&](const std::array<double, 2>& x, double u) {
    return std::array<double, 2>{p.process_noise * x[0] + x[1], a21 * x[0] + a22 * x[1] + b2 * u};
  };
  // The input is constant within each RK4 stage set; a step that straddles t_on is split there.
  auto rk4 = [&](std::array<double, 2>& x, double h, double u) {
    const auto k1 = rhs(x, u);
    const auto k2 = rhs({x[0] + h / 2 * k1[0], x[1] + h / 2 * k1[1]}, u);
    const auto k3 = rhs({x[0] + h / 2 * k2[0], x[1] + h / 2 * k2[1]}, u);
    const auto k4 = rhs({x[0] + h * k3[0], x[1] + h * k3[1]}, u);
    for (int s = 0; s < 2; ++s) x[s] += h / 6.0 * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
  };
  // Guard against t_on landing an ulp off a grid point.
  const double eps = 1e-9 * dt;

  std::vector<double> ts(steps + 1), vs(steps + 1);
  std::array<double, 2> x{0.0, 0.0};
  ts[0] = 0.0;
  vs[0] = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    const double t_next = static_cast<double>(i + 1) * dt;
    if (t_on > t + eps && t_on < t_next - eps) {
      rk4(x, t_on - t, 0.0);
      rk4(x, t_next - t_on, 1.0);
    } else {
      rk4(x, t_next - t, t >= t_on - eps ? 1.0 : 0.0);
    }
    ts[i + 1] = t_next;
    vs[i + 1] = x[0];
  }
  return TimeSeries(std::move(ts), std::move(vs), std::move(name));
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Reference plant with one uniform process-noise draw per realization plus
/// i.i.d. Gaussian measurement noise.
inline TimeSeries make_experiment(const UniverseConfig& c, double p0, double t_delay_ms, Rng& rng,
                                  std::string name = "experiment") {
  const double process_noise = -p0 + 2.0 * p0 * uniform01(rng);
  Pt2Params p{c.k0, c.d0, c.t0, process_noise, t_delay_ms * 1e-3, c.step_time};
  auto clean = simulate_pt2(p, c.dt, c.t_end, name);
  if (c.sigma_measurement == 0.0) return clean;
  std::normal_distribution<double> noise(0.0, c.sigma_measurement);
  std::vector<double> v(clean.v().begin(), clean.v().end());
  for (double& e : v) e += noise(rng);
  return TimeSeries({clean.t().begin(), clean.t().end()}, std::move(v), std::move(name));
}

/// Noise-free part of the synthetic rating.
inline double rating_mean(double k, double d, const UniverseConfig& c) {
  return 1.0 - (c.w_k * std::abs(2.0 * (k - c.k0) / (c.k0 + k)) + c.w_d * std::abs(2.0 * (d - c.d0) / (c.d0 + d)));
}

inline double synth_rating(double k, double d, const UniverseConfig& c, Rng& rng) {
  if (!(k > 0.0 && d > 0.0)) fail(ErrorKind::InvalidArgument, "k and d must be > 0");
  double r = rating_mean(k, d, c);
  if (c.sigma_exp > 0.0) r += std::normal_distribution<double>(0.0, c.sigma_exp)(rng);
  return std::clamp(r, 0.0, 1.0);
}

struct UniversePair {
  std::string pair_id;
  std::size_t experiment = 0;
  std::size_t simulation = 0;
  double k_factor = 1.0;
  double d_factor = 1.0;
  double p0 = 0.0;
  double t_delay_ms = 0.0;
};

struct UniverseData {
  LabeledDataset dataset;
  std::vector<TimeSeries> experiments;
  std::vector<TimeSeries> simulations;
  std::vector<UniversePair> pairs;  ///< parallel to dataset.records
};

inline std::string experiment_name(std::size_t e) { return "exp_" + std::to_string(e); }
inline std::string simulation_name(std::size_t s) { return (s < 10 ? "sim_0" : "sim_") + std::to_string(s); }

/// Full factorial: experiments over (p0, t_delay), noise-free zero-delay
/// simulations over (k, d), every experiment paired with every simulation.
inline UniverseData build_dataset(const UniverseConfig& c) {
  c.validate();
  UniverseData out;
  out.dataset.provenance = Provenance::Synthetic;

  const std::size_t n_exp = c.p0_values.size() * c.t_delay_ms_values.size();
  const std::size_t n_sim = c.k_grid.size() * c.d_grid.size();

  std::vector<std::optional<TimeSeries>> exps(n_exp), sims(n_sim);
  parallel_for(n_exp, [&](std::size_t e) {
    const double p0 = c.p0_values[e / c.t_delay_ms_values.size()];
    const double delay = c.t_delay_ms_values[e % c.t_delay_ms_values.size()];
    Rng rng = make_rng(c.seed, {1, e});
    exps[e] = make_experiment(c, p0, delay, rng, experiment_name(e));
  });
  parallel_for(n_sim, [&](std::size_t s) {
    const double kf = c.k_grid[s / c.d_grid.size()];
    const double df = c.d_grid[s % c.d_grid.size()];
    sims[s] = simulate_pt2({c.k0 * kf, c.d0 * df, c.t0, 0.0, 0.0, c.step_time}, c.dt, c.t_end, simulation_name(s));
  });
  for (auto& e : exps) out.experiments.push_back(std::move(*e));
  for (auto& s : sims) out.simulations.push_back(std::move(*s));

  for (std::size_t e = 0; e < n_exp; ++e) {
    for (std::size_t s = 0; s < n_sim; ++s) {
      UniversePair up;
      up.pair_id = "e" + std::to_string(e) + "_s" + (s < 10 ? "0" : "") + std::to_string(s);
      up.experiment = e;
      up.simulation = s;
      up.k_factor = c.k_grid[s / c.d_grid.size()];
      up.d_factor = c.d_grid[s % c.d_grid.size()];
      up.p0 = c.p0_values[e / c.t_delay_ms_values.size()];
      up.t_delay_ms = c.t_delay_ms_values[e % c.t_delay_ms_values.size()];

      LabeledRecord rec;
      rec.pair_id = up.pair_id;
      rec.pair = std::make_shared<const SeriesPair>(out.simulations[s], out.experiments[e]);
      Rng rng = make_rng(c.seed, {2, e, s});
      for (std::size_t x = 0; x < c.n_experts; ++x) {
        const double r = synth_rating(c.k0 * up.k_factor, c.d0 * up.d_factor, c, rng);
        rec.ratings.push_back({"expert_" + std::string(x < 10 ? "0" : "") + std::to_string(x), r});
      }
      out.dataset.records.push_back(std::move(rec));
      out.pairs.push_back(up);
    }
  }
  return out;
}

}  // namespace valmetric
