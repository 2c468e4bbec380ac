// Acceptance run: one PASS/FAIL line per criterion, non-zero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "valmetric/dataset_io.hpp"
#include "valmetric/dtw.hpp"
#include "valmetric/grade.hpp"
#include "valmetric/metrics.hpp"
#include "valmetric/regress.hpp"
#include "valmetric/studies.hpp"
#include "valmetric/universe.hpp"
#include "valmetric/rating_http.hpp"

namespace vm = valmetric;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr std::size_t kStudyRepeats = 50;

struct Outcome {
  bool ok = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.ok && in_time;
  if (!pass) ++g_failures;
  std::ostringstream line;
  line << (pass ? "PASS" : "FAIL") << "  " << name << "  [" << o.detail << "; " << std::fixed;
  line.precision(2);
  line << secs << " s";
  if (!in_time) line << " exceeds " << budget_s << " s budget";
  line << "]";
  std::printf("%s\n", line.str().c_str());
  std::fflush(stdout);
}

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

std::vector<double> sine(std::size_t n, double cycles, double phase = 0.0, double amp = 1.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = amp * std::sin(2.0 * std::numbers::pi * cycles * static_cast<double>(i) / static_cast<double>(n) + phase);
  return v;
}

std::vector<double> scaled(std::vector<double> v, double k) {
  for (auto& e : v) e *= k;
  return v;
}

// ---------------------------------------------------------------------------

Outcome closed_forms() {
  const auto y = sine(400, 3.0, 0.4);
  double worst = 0.0;
  auto dev = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  const auto same = vm::sprague_geers(y, y);
  dev(same.m, 0), dev(same.p, 0), dev(same.c, 0);
  const auto dbl = vm::sprague_geers(scaled(y, 2.0), y);
  dev(dbl.m, 1), dev(dbl.p, 0), dev(dbl.c, 1);
  const auto neg = vm::sprague_geers(scaled(y, -1.0), y);
  dev(neg.m, 0), dev(neg.p, 1), dev(neg.c, 1);
  dev(vm::russell_magnitude(scaled(y, 2.0), y), std::log10(2.5));
  dev(vm::russell_magnitude(scaled(y, 0.5), y), -std::log10(2.5));
  dev(vm::nise(scaled(y, 2.0), y, 40).c, 0.2);
  return {worst <= 1e-9, "max deviation " + num(worst, 3)};
}

Outcome nise_telescoping() {
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 16 + rng() % 240;
    std::vector<double> x(n), y(n);
    for (auto& e : x) e = u(rng);
    for (auto& e : y) e = u(rng);
    const auto d = vm::nise(x, y, rng() % (n / 2));
    worst = std::max(worst, std::abs(d.p + d.m + d.s - d.c));
  }
  return {worst <= 1e-12, "1000 pairs, max |P+M+S-C| " + num(worst, 3)};
}

Outcome dtw_brute_force() {
  std::mt19937_64 rng(kSeed);
  std::size_t mismatches = 0, count = 0;
  for (int code = 0; code < 4096; ++code) {
    std::vector<double> x(6), y(6);
    int c = code;
    for (auto& e : x) e = c % 4, c /= 4;
    for (auto& e : y) e = static_cast<double>(rng() % 4);
    const std::size_t w = rng() % 7;
    const double fast = vm::dtw_align(x, y, w).cost;
    if (fast != oracle::dtw_brute_force(x, y, w)) ++mismatches;
    ++count;
  }
  return {mismatches == 0, std::to_string(count) + " pairs, " + std::to_string(mismatches) + " mismatches"};
}

Outcome rmse_pathology() {
  const std::size_t n = 1000;
  const auto y = sine(n, 5.0);
  const auto phase = sine(n, 5.0, 0.3);
  const double target = vm::rmse(phase, y);
  const double k = 1.0 + target / std::sqrt(vm::psi_stats(y, y).psi_yy);
  const auto amp = scaled(y, k);
  const double gap = std::abs(vm::rmse(amp, y) - target);
  const auto sp = vm::sprague_geers(phase, y), sa = vm::sprague_geers(amp, y);
  const double phase_ratio = sp.p / std::abs(sp.m), amp_ratio = std::abs(sa.m) / sa.p;
  const bool ok = gap <= 1e-9 && phase_ratio > 10.0 && amp_ratio > 10.0;
  return {ok, "RMSE " + num(target) + " (gap " + num(gap, 2) + "), phase pair P/M " + num(phase_ratio) +
                  ", amplitude pair M/P " + (std::isinf(amp_ratio) ? std::string("inf") : num(amp_ratio))};
}

Outcome grade_table() {
  const bool ok = vm::grade(0.94).label == "Good" && vm::grade(0.9400001).label == "Excellent" &&
                  vm::grade(0.8).label == "Fair" && vm::grade(0.58).label == "Poor";
  return {ok, "0.94 " + vm::grade(0.94).label + ", 0.9400001 " + vm::grade(0.9400001).label + ", 0.8 " +
                  vm::grade(0.8).label + ", 0.58 " + vm::grade(0.58).label};
}

vm::FeatureMatrix linear_rows(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  vm::FeatureMatrix fm;
  fm.feature_names = {"f1", "f2"};
  fm.features.resize(static_cast<Eigen::Index>(n), 2);
  fm.labels.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < fm.features.rows(); ++r) {
    fm.features(r, 0) = u(rng);
    fm.features(r, 1) = u(rng);
    fm.labels(r) = 0.3 * fm.features(r, 0) + 0.2 * fm.features(r, 1) + noise(rng);
    fm.pair_ids.push_back("p" + std::to_string(r));
    fm.expert_ids.push_back("e");
  }
  return fm;
}

Outcome ols_recovery() {
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  const auto first = vm::fit_ols(linear_rows(rng, 500)).raw();
  const double z1 = std::abs(first.weights[0] - 0.3) / first.standard_errors[0];
  const double z2 = std::abs(first.weights[1] - 0.2) / first.standard_errors[1];

  // each refit is scored on fresh draws from the same law
  constexpr int kRefits = 200, kProbes = 50;
  int covered = 0;
  for (int t = 0; t < kRefits; ++t) {
    const auto m = vm::fit_ols(linear_rows(rng, 500));
    for (int p = 0; p < kProbes; ++p) {
      const double a = u(rng), b = u(rng);
      const double y = 0.3 * a + 0.2 * b + noise(rng);
      const auto pi = vm::predict(m, {{"f1", a}, {"f2", b}}, 0.05);
      if (y >= pi.full_lo && y <= pi.full_hi) ++covered;
    }
  }
  const double coverage = static_cast<double>(covered) / (kRefits * kProbes);
  const bool ok = z1 < 3.0 && z2 < 3.0 && std::abs(coverage - 0.95) <= 0.03;
  return {ok, "|w-w*|/SE = " + num(z1, 3) + ", " + num(z2, 3) + "; coverage " + num(100.0 * coverage, 4) + "% over " +
                  std::to_string(kRefits) + " refits"};
}

struct UniverseRun {
  vm::FeatureMatrix features;
  vm::PipelineRun run;
};

const UniverseRun& universe_run() {
  static const UniverseRun r = [] {
    vm::UniverseConfig c;
    c.seed = kSeed;
    UniverseRun out;
    const auto ds = vm::build_dataset(c).dataset;
    out.features = vm::compute_features(ds);
    out.run = vm::run_pipeline(out.features, vm::PipelineConfig{}, kSeed);
    return out;
  }();
  return r;
}

Outcome universe_end_to_end() {
  const auto& u = universe_run();
  const double m = u.run.score;
  std::string feats;
  for (const auto& f : u.run.model.feature_names) feats += (feats.empty() ? "" : ",") + f;
  return {m >= 0.7, std::to_string(u.features.rows()) + " rows, features {" + feats + "}, test score m = " + num(m) +
                        " (threshold 0.7)"};
}

Outcome interval_dominance() {
  const auto& u = universe_run();
  std::size_t bad = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < u.run.test.rows(); ++r) {
    const auto pi = vm::predict(u.run.model, vm::row_features(u.run.test, r));
    const double gap = pi.full_half_width() - pi.simple_half_width();
    min_gap = std::min(min_gap, gap);
    if (gap < 0.0) ++bad;
  }
  return {bad == 0, std::to_string(u.run.test.rows()) + " test rows, " + std::to_string(bad) +
                        " violations, min(full - simple) half-width " + num(min_gap, 3)};
}

// --- studies ----------------------------------------------------------------

vm::StudyResult study(vm::SweepParameter p) {
  vm::UniverseConfig c;
  c.seed = kSeed;
  return vm::sweep(p, vm::default_sweep_values(p), c, vm::PipelineConfig{}, kStudyRepeats, kSeed);
}

std::string means(const vm::StudyResult& r, bool with_var = false) {
  std::string s;
  for (const auto& pt : r.points) {
    s += (s.empty() ? "" : ", ") + num(pt.value, 4) + ":" + num(pt.stats.mean, 3);
    if (with_var) s += "/var " + num(pt.stats.variance, 3);
  }
  return s;
}

Outcome fig7() {
  const auto r = study(vm::SweepParameter::MeasurementNoise);
  const double lo = r.points.front().stats.mean, hi = r.points.back().stats.mean;
  return {std::abs(hi - lo) < 0.1, "mean by sigma_measurement {" + means(r) + "}, |diff| " + num(std::abs(hi - lo), 3)};
}

Outcome fig8() {
  const auto r = study(vm::SweepParameter::NSimulations);
  const double small = r.points.front().stats.variance, full = r.points.back().stats.variance;
  return {small >= full, "grid per axis {" + means(r, true) + "}"};
}

Outcome fig9() {
  const auto r = study(vm::SweepParameter::NExperts);
  const double d = std::abs(r.points.front().stats.mean - r.points.back().stats.mean);
  return {d < 0.1, "mean by experts {" + means(r) + "}, |m(2) - m(15)| " + num(d, 3)};
}

Outcome fig10() {
  const auto r = study(vm::SweepParameter::SigmaExp);
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < r.points.size(); ++i)
    worst_rise = std::max(worst_rise, r.points[i].stats.mean - r.points[i - 1].stats.mean);
  return {worst_rise <= 0.02, "mean by sigma_exp {" + means(r) + "}, largest step increase " + num(worst_rise, 3)};
}

Outcome fig11() {
  const auto r = study(vm::SweepParameter::CorrThreshold);
  double lo = 1e300, hi = -1e300;
  for (const auto& pt : r.points) lo = std::min(lo, pt.stats.mean), hi = std::max(hi, pt.stats.mean);
  return {hi - lo < 0.1, "mean by threshold {" + means(r) + "}, spread " + num(hi - lo, 3)};
}

// --- service ----------------------------------------------------------------

nlohmann::json inline_series(double gain, double shift) {
  std::vector<double> t, v;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.01 * i);
    v.push_back(gain * (1.0 - std::exp(-(0.01 * i) / 0.2)) + shift);
  }
  return {{"t", t}, {"v", v}};
}

Outcome service_round_trip() {
  TempDir dir;
  vm::RatingService svc(dir / "store");
  httplib::Server srv;
  vm::install_routes(srv, svc);
  const int port = srv.bind_to_any_port("127.0.0.1");
  if (port <= 0) return {false, "cannot bind"};
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  struct Stop {
    httplib::Server& s;
    std::thread& t;
    ~Stop() {
      s.stop();
      t.join();
    }
  } stop{srv, th};

  httplib::Client cli("127.0.0.1", port);
  nlohmann::json body{{"session_id", "acceptance"}, {"pairs", nlohmann::json::array()}};
  for (int p = 0; p < 5; ++p)
    body["pairs"].push_back({{"pair_id", "pair_" + std::to_string(p)},
                             {"x", inline_series(1.0, 0.0)},
                             {"y", inline_series(1.0 + 0.1 * p, 0.01 * p)}});
  auto created = cli.Post("/api/sessions", body.dump(), "application/json");
  if (!created || created->status != 201) return {false, "session creation failed"};

  int accepted = 0;
  for (int p = 0; p < 5; ++p)
    for (int e = 0; e < 14; ++e) {
      nlohmann::json r{{"expert_id", "expert_" + std::to_string(e)}, {"rating", 0.5 + 0.03 * e - 0.05 * p}};
      auto res = cli.Post("/api/pairs/pair_" + std::to_string(p) + "/ratings", r.dump(), "application/json");
      if (res && res->status == 201) ++accepted;
    }
  auto rejected = cli.Post("/api/pairs/pair_0/ratings", R"({"expert_id":"expert_0","rating":1.5})", "application/json");
  const int reject_status = rejected ? rejected->status : -1;

  auto exported = cli.Get("/api/sessions/acceptance/export");
  if (!exported || exported->status != 200) return {false, "export failed"};
  const auto rows = vm::parse_ratings_csv(exported->body).size();
  const auto ds = svc.export_labels("acceptance");
  const bool ok = accepted == 70 && rows == 70 && ds.rating_count() == 70 && reject_status == 422;
  return {ok, std::to_string(accepted) + " ratings accepted, export " + std::to_string(rows) + " CSV rows, dataset " +
                  std::to_string(ds.rating_count()) + " rows, out-of-range -> " + std::to_string(reject_status)};
}

}  // namespace

int main() {
  vm::log::threshold() = vm::log::Level::Error;
  const auto t0 = std::chrono::steady_clock::now();

  criterion("closed-form metric suite (SG, Russell, NISE) within 1e-9", 1.0, closed_forms);
  criterion("NISE telescoping P+M+S = C to 1e-12", 5.0, nise_telescoping);
  criterion("DTW equals brute-force path enumeration on 4^6 length-6 pairs", 30.0, dtw_brute_force);
  criterion("equal-RMSE pathology: SG ratios > 10 in opposite directions", 1.0, rmse_pathology);
  criterion("grade boundaries 0.94/0.9400001/0.8/0.58", 1.0, grade_table);
  criterion("OLS recovery within 3 SE and 95% interval coverage 95 +- 3%", 60.0, ols_recovery);
  criterion("universe end-to-end test score m >= 0.7", 120.0, universe_end_to_end);
  criterion("full interval >= simple interval on every universe test row", 120.0, interval_dominance);

  const auto s0 = std::chrono::steady_clock::now();
  criterion("measurement noise sweep: mean(0.04) within 0.1 of mean(0.0025)", 900.0, fig7);
  criterion("simulation grid sweep: variance(smallest) >= variance(full)", 900.0, fig8);
  criterion("expert count sweep: |mean(2) - mean(15)| < 0.1", 900.0, fig9);
  criterion("expert noise sweep: mean non-increasing (0.02/step tolerance)", 900.0, fig10);
  criterion("correlation threshold sweep: mean spread < 0.1", 900.0, fig11);
  const double study_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
  criterion("all sweeps at 50 repeats finish within 15 min", 1e9,
            [&] { return Outcome{study_secs < 900.0, "sweeps took " + num(study_secs, 4) + " s"}; });

  criterion("service round trip: 70 ratings over HTTP, export 70 rows, 422 on out-of-range", 30.0,
            service_round_trip);

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d criteria failed; total %.1f s\n", g_failures, total);
  return g_failures == 0 ? 0 : 1;
}
