#pragma once

// Time-series validation metrics between a test signal x (simulation) and a
// reference y (measurement). Span-based cores with SeriesPair overloads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/dtw.hpp"
#include "valmetric/error.hpp"
#include "valmetric/format.hpp"
#include "valmetric/series.hpp"

namespace valmetric {

using Signal = std::span<const double>;

namespace detail {

inline void require_same_size(Signal x, Signal y) {
  if (x.size() != y.size()) fail(ErrorKind::LengthMismatch, "signals differ in length");
  if (x.empty()) fail(ErrorKind::TooShort, "empty signals");
}

inline double mean(Signal s) {
  double acc = 0.0;
  for (double v : s) acc += v;
  return acc / static_cast<double>(s.size());
}

inline double sum_sq_dev(Signal s, double mu) {
  double acc = 0.0;
  for (double v : s) acc += (v - mu) * (v - mu);
  return acc;
}

inline std::vector<double> abs_errors(Signal x, Signal y) {
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::abs(x[i] - y[i]);
  return e;
}

inline std::vector<double> diff(Signal s) {
  std::vector<double> d(s.size() > 0 ? s.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) d[i] = s[i + 1] - s[i];
  return d;
}

inline void require_variance(Signal y) {
  if (sum_sq_dev(y, mean(y)) == 0.0) fail(ErrorKind::ZeroVariance, "reference signal is constant");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mean-square and cross terms

struct PsiStats {
  double psi_xx = 0.0;
  double psi_yy = 0.0;
  double psi_xy = 0.0;
};

inline PsiStats psi_stats(Signal x, Signal y) {
  detail::require_same_size(x, y);
  PsiStats s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.psi_xx += x[i] * x[i];
    s.psi_yy += y[i] * y[i];
    s.psi_xy += x[i] * y[i];
  }
  const double n = static_cast<double>(x.size());
  s.psi_xx /= n;
  s.psi_yy /= n;
  s.psi_xy /= n;
  return s;
}

inline PsiStats psi_stats(const SeriesPair& p) { return psi_stats(p.x().v(), p.y().v()); }

inline void require_energy(const PsiStats& s) {
  if (!(s.psi_xx > 0.0) || !(s.psi_yy > 0.0))
    fail(ErrorKind::ZeroEnergy, "a signal is identically zero");
}

// ---------------------------------------------------------------------------
// Pointwise error measures

inline double mse(Signal x, Signal y) {
  detail::require_same_size(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return acc / static_cast<double>(x.size());
}

inline double rmse(Signal x, Signal y) { return std::sqrt(mse(x, y)); }
inline double rmse(const SeriesPair& p) { return rmse(p.x().v(), p.y().v()); }

enum class NrmseNormalizer { Range, Mean };

inline double nrmse(Signal x, Signal y, NrmseNormalizer norm = NrmseNormalizer::Range) {
  const double r = rmse(x, y);
  if (norm == NrmseNormalizer::Range) {
    auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (!(*hi > *lo)) fail(ErrorKind::ZeroRange, "reference range is zero");
    return r / (*hi - *lo);
  }
  const double mu = detail::mean(y);
  if (mu == 0.0) fail(ErrorKind::ZeroMean, "reference mean is zero");
  return r / mu;
}

inline double nrmse(const SeriesPair& p, NrmseNormalizer norm = NrmseNormalizer::Range) {
  return nrmse(p.x().v(), p.y().v(), norm);
}

inline double mae(Signal x, Signal y) {
  detail::require_same_size(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return acc / static_cast<double>(x.size());
}

inline double medae(Signal x, Signal y) {
  detail::require_same_size(x, y);
  auto e = detail::abs_errors(x, y);
  std::sort(e.begin(), e.end());
  const std::size_t n = e.size();
  return n % 2 ? e[n / 2] : 0.5 * (e[n / 2 - 1] + e[n / 2]);
}

inline double maxae(Signal x, Signal y) {
  detail::require_same_size(x, y);
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

/// 1 - SS_res / SS_tot with y as the observed signal.
inline double r2(Signal x, Signal y) {
  detail::require_same_size(x, y);
  detail::require_variance(y);
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ss_res += (y[i] - x[i]) * (y[i] - x[i]);
  return 1.0 - ss_res / detail::sum_sq_dev(y, detail::mean(y));
}

inline double frac_explained_abs(Signal x, Signal y) {
  detail::require_same_size(x, y);
  const double mu = detail::mean(y);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += std::abs(y[i] - x[i]);
    den += std::abs(y[i] - mu);
  }
  if (den == 0.0) fail(ErrorKind::ZeroVariance, "reference signal is constant");
  return 1.0 - num / den;
}

inline double explained_variance(Signal x, Signal y) {
  detail::require_same_size(x, y);
  detail::require_variance(y);
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = y[i] - x[i];
  const double var_r = detail::sum_sq_dev(r, detail::mean(r));
  return 1.0 - var_r / detail::sum_sq_dev(y, detail::mean(y));
}

inline double pearson(Signal x, Signal y) {
  detail::require_same_size(x, y);
  const double mx = detail::mean(x), my = detail::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::ZeroVariance, "a signal is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct BasicErrors {
  double mae, mse, medae, maxae, r2, frac_explained_abs, explained_variance, pearson;
};

inline BasicErrors basic_errors(Signal x, Signal y) {
  return {valmetric::mae(x, y),
          valmetric::mse(x, y),
          valmetric::medae(x, y),
          valmetric::maxae(x, y),
          valmetric::r2(x, y),
          valmetric::frac_explained_abs(x, y),
          valmetric::explained_variance(x, y),
          valmetric::pearson(x, y)};
}

inline BasicErrors basic_errors(const SeriesPair& p) { return basic_errors(p.x().v(), p.y().v()); }

// ---------------------------------------------------------------------------
// Shifted cross-correlation

/// Normalized cross-correlation over integer lags. A positive lag n pairs
/// x[i] with y[i + n], i.e. y trailing x by n samples.
struct ShiftScan {
  std::vector<int> lags;
  std::vector<double> rho;
  std::vector<double> psi_xy;  ///< unnormalized-by-energy cross term per lag, divided by N
  int n_star = 0;
  std::size_t star_index = 0;

  double rho_star() const { return rho[star_index]; }
  double psi_xy_star() const { return psi_xy[star_index]; }
};

inline std::size_t default_max_lag(std::size_t n) { return n / 10; }

inline ShiftScan cross_correlation(Signal x, Signal y, std::size_t max_lag, const PsiStats& psi) {
  detail::require_same_size(x, y);
  const std::size_t n = x.size();
  if (max_lag >= n)
    fail(ErrorKind::OutOfRange, "max_lag " + std::to_string(max_lag) + " must be < n = " + std::to_string(n));
  require_energy(psi);
  const double norm = std::sqrt(psi.psi_xx * psi.psi_yy);
  const int L = static_cast<int>(max_lag);

  ShiftScan scan;
  scan.lags.reserve(2 * max_lag + 1);
  for (int lag = -L; lag <= L; ++lag) {
    double acc = 0.0;
    // zero padding outside the overlap
    const std::size_t i0 = lag < 0 ? static_cast<std::size_t>(-lag) : 0;
    const std::size_t i1 = lag > 0 ? n - static_cast<std::size_t>(lag) : n;
    for (std::size_t i = i0; i < i1; ++i) acc += x[i] * y[i + lag];
    const double pxy = acc / static_cast<double>(n);
    scan.lags.push_back(lag);
    scan.psi_xy.push_back(pxy);
    scan.rho.push_back(pxy / norm);
  }

  // Visit 0, +1, -1, +2, -2, ... so ties resolve toward the smallest |lag|.
  std::size_t best = static_cast<std::size_t>(L);
  for (int k = 1; k <= L; ++k) {
    for (int lag : {k, -k}) {
      const std::size_t idx = static_cast<std::size_t>(lag + L);
      if (scan.rho[idx] > scan.rho[best]) best = idx;
    }
  }
  scan.star_index = best;
  scan.n_star = scan.lags[best];
  return scan;
}

inline ShiftScan cross_correlation(Signal x, Signal y, std::size_t max_lag) {
  return cross_correlation(x, y, max_lag, psi_stats(x, y));
}

inline ShiftScan cross_correlation(const SeriesPair& p, std::size_t max_lag) {
  return cross_correlation(p.x().v(), p.y().v(), max_lag);
}

// ---------------------------------------------------------------------------
// Sprague-Geers, Russell

struct SpragueGeers {
  double m = 0.0;
  double p = 0.0;
  double c = 0.0;
};

/// The phase term arccos(psi_xy / sqrt(psi_xx psi_yy)) / pi is evaluated as the
/// angle between x and y with the atan2 form, which stays accurate near 0 and pi
/// where arccos loses half the significant digits.
inline SpragueGeers sprague_geers(Signal x, Signal y, const PsiStats& psi) {
  require_energy(psi);
  const double nx = std::sqrt(psi.psi_xx), ny = std::sqrt(psi.psi_yy);
  double diff_sq = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = x[i] / nx, v = y[i] / ny;
    diff_sq += (u - v) * (u - v);
    sum_sq += (u + v) * (u + v);
  }
  const double angle = 2.0 * std::atan2(std::sqrt(diff_sq), std::sqrt(sum_sq));
  SpragueGeers sg;
  sg.m = std::sqrt(psi.psi_xx / psi.psi_yy) - 1.0;
  sg.p = std::clamp(angle / std::numbers::pi, 0.0, 1.0);
  sg.c = std::sqrt(sg.m * sg.m + sg.p * sg.p);
  return sg;
}

inline SpragueGeers sprague_geers(Signal x, Signal y) { return sprague_geers(x, y, psi_stats(x, y)); }
inline SpragueGeers sprague_geers(const SeriesPair& p) { return sprague_geers(p.x().v(), p.y().v()); }

inline double russell_magnitude(const PsiStats& psi) {
  require_energy(psi);
  const double d = psi.psi_xx - psi.psi_yy;
  const double mag = std::log10(1.0 + std::abs(d) / std::sqrt(psi.psi_xx * psi.psi_yy));
  return d > 0.0 ? mag : (d < 0.0 ? -mag : 0.0);
}

inline double russell_magnitude(Signal x, Signal y) { return russell_magnitude(psi_stats(x, y)); }
inline double russell_magnitude(const SeriesPair& p) { return russell_magnitude(psi_stats(p)); }

// ---------------------------------------------------------------------------
// NISE

struct NiseDecomposition {
  double p = 0.0;
  double m = 0.0;
  double s = 0.0;
  double c = 0.0;
};

inline NiseDecomposition nise(const PsiStats& psi, const ShiftScan& scan) {
  require_energy(psi);
  const double energy = psi.psi_xx + psi.psi_yy;
  const double rho_star = scan.rho_star();
  const double cross_star = scan.psi_xy_star();
  NiseDecomposition d;
  d.p = (2.0 * cross_star - 2.0 * psi.psi_xy) / energy;
  d.m = rho_star - 2.0 * cross_star / energy;
  d.s = 1.0 - rho_star;
  d.c = 1.0 - 2.0 * psi.psi_xy / energy;
  return d;
}

inline NiseDecomposition nise(Signal x, Signal y, std::size_t max_lag) {
  const auto psi = psi_stats(x, y);
  return nise(psi, cross_correlation(x, y, max_lag, psi));
}

inline NiseDecomposition nise(const SeriesPair& p, std::size_t max_lag) {
  return nise(p.x().v(), p.y().v(), max_lag);
}

// ---------------------------------------------------------------------------
// Shift + warp compensated errors shared by EEARTH and the ISO-style rating

inline std::size_t default_window(std::size_t n) { return n / 10; }

/// Relative L1 errors after removing the global shift n* and warping locally.
struct WarpedErrors {
  double magnitude = 0.0;  ///< sum |x~ - y~| / sum |y~| on the warped signals
  double slope = 0.0;      ///< same on first differences
};

namespace detail {

inline double warped_relative_l1(Signal xs, Signal ys, std::size_t window) {
  const auto d = dtw_align(xs, ys, window);
  double den = 0.0;
  for (auto [i, j] : d.path) den += std::abs(ys[j]);
  if (den == 0.0) return d.cost == 0.0 ? 0.0 : 1.0;
  return d.cost / den;
}

}  // namespace detail

inline WarpedErrors warped_errors(Signal x, Signal y, int n_star, std::size_t window) {
  detail::require_same_size(x, y);
  const std::size_t shift = static_cast<std::size_t>(std::abs(n_star));
  if (shift >= x.size()) fail(ErrorKind::OutOfRange, "shift exceeds signal length");
  const std::size_t len = x.size() - shift;
  Signal xs = n_star >= 0 ? x.subspan(0, len) : x.subspan(shift, len);
  Signal ys = n_star >= 0 ? y.subspan(shift, len) : y.subspan(0, len);
  WarpedErrors e;
  e.magnitude = detail::warped_relative_l1(xs, ys, window);
  if (len >= 2) {
    auto dx = detail::diff(xs);
    auto dy = detail::diff(ys);
    e.slope = detail::warped_relative_l1(dx, dy, window);
  }
  return e;
}

// ---------------------------------------------------------------------------
// EEARTH

struct EearthWeights {
  double phase = 0.4;
  double magnitude = 0.4;
  double slope = 0.2;
};

inline void validate(const EearthWeights& w) {
  if (w.phase < 0.0 || w.magnitude < 0.0 || w.slope < 0.0)
    fail(ErrorKind::InvalidArgument, "EEARTH weights must be non-negative");
  if (w.phase + w.magnitude + w.slope > 1.0 + 1e-12)
    fail(ErrorKind::InvalidArgument, "EEARTH weights must sum to at most 1");
}

/// Components are on [0, 10]; the score is 10 for a perfect match.
struct Eearth {
  double score = 10.0;
  double phase = 0.0;
  double magnitude = 0.0;
  double slope = 0.0;
};

inline double eearth_combine(double phase, double magnitude, double slope, const EearthWeights& w) {
  return 10.0 - (w.phase * phase + w.magnitude * magnitude + w.slope * slope);
}

inline Eearth eearth(const ShiftScan& scan, const WarpedErrors& warped, const EearthWeights& w) {
  validate(w);
  Eearth e;
  e.phase = 10.0 * (1.0 - scan.rho_star()) / 2.0;
  e.magnitude = 10.0 * std::min(1.0, warped.magnitude);
  e.slope = 10.0 * std::min(1.0, warped.slope);
  e.score = eearth_combine(e.phase, e.magnitude, e.slope, w);
  return e;
}

inline Eearth eearth(Signal x, Signal y, const EearthWeights& w, std::size_t max_lag, std::size_t window) {
  validate(w);
  const auto scan = cross_correlation(x, y, max_lag);
  return eearth(scan, warped_errors(x, y, scan.n_star, window), w);
}

inline Eearth eearth(const SeriesPair& p, const EearthWeights& w, std::size_t max_lag, std::size_t window) {
  return eearth(p.x().v(), p.y().v(), w, max_lag, window);
}

// ---------------------------------------------------------------------------
// Corridor and ISO 18571-style rating (simplified variant)

struct Corridor {
  double inner = 0.05;  ///< half-width as a fraction of max|y|
  double outer = 0.5;
};

inline double corridor_score(Signal x, Signal y, const Corridor& cor) {
  detail::require_same_size(x, y);
  if (!(cor.inner > 0.0 && cor.inner < cor.outer))
    fail(ErrorKind::InvalidArgument, "corridor requires 0 < inner < outer");
  double amp = 0.0;
  for (double v : y) amp = std::max(amp, std::abs(v));
  if (amp == 0.0) fail(ErrorKind::DegenerateCorridor, "reference amplitude is zero");
  const double in = cor.inner * amp, out = cor.outer * amp;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = std::abs(x[i] - y[i]);
    if (d <= in)
      acc += 1.0;
    else if (d < out)
      acc += (out - d) / (out - in);
  }
  return acc / static_cast<double>(x.size());
}

inline double corridor_score(const SeriesPair& p, const Corridor& cor = {}) {
  return corridor_score(p.x().v(), p.y().v(), cor);
}

struct Iso18571Scores {
  double z = 1.0;  ///< corridor
  double p = 1.0;  ///< phase
  double m = 1.0;  ///< magnitude
  double s = 1.0;  ///< slope
  double r = 1.0;  ///< combined rating
};

inline double iso_combine(double z, double p, double m, double s) {
  return 0.4 * z + 0.2 * p + 0.2 * m + 0.2 * s;
}

inline Iso18571Scores iso18571_scores(double corridor, const ShiftScan& scan, std::size_t max_lag,
                                      const WarpedErrors& warped) {
  Iso18571Scores sc;
  sc.z = corridor;
  sc.p = max_lag == 0
             ? 1.0
             : 1.0 - std::min(1.0, static_cast<double>(std::abs(scan.n_star)) / static_cast<double>(max_lag));
  sc.m = 1.0 - std::min(1.0, warped.magnitude);
  sc.s = 1.0 - std::min(1.0, warped.slope);
  sc.r = iso_combine(sc.z, sc.p, sc.m, sc.s);
  return sc;
}

inline Iso18571Scores iso18571_scores(Signal x, Signal y, const Corridor& cor, std::size_t max_lag,
                                      std::size_t window) {
  const double z = corridor_score(x, y, cor);
  const auto scan = cross_correlation(x, y, max_lag);
  return iso18571_scores(z, scan, max_lag, warped_errors(x, y, scan.n_star, window));
}

inline Iso18571Scores iso18571_scores(const SeriesPair& p, const Corridor& cor, std::size_t max_lag,
                                      std::size_t window) {
  return iso18571_scores(p.x().v(), p.y().v(), cor, max_lag, window);
}

// ---------------------------------------------------------------------------
// Full report

inline constexpr std::array<std::string_view, 21> kReportMetricNames = {
    "cross_corr_max", "eearth",   "explained_variance", "frac_explained_abs",
    "iso_corridor",   "iso_r",    "mae",                "maxae",
    "medae",          "mse",      "nise_c",             "nise_m",
    "nise_p",         "nise_s",   "nrmse",              "pearson",
    "r2",             "russell_m", "sg_c",              "sg_m",
    "sg_p"};

struct MetricConfig {
  std::optional<std::size_t> max_lag;  ///< default 10% of n
  std::optional<std::size_t> window;   ///< default 10% of n
  NrmseNormalizer normalizer = NrmseNormalizer::Range;
  EearthWeights eearth_weights;
  Corridor corridor;

  std::size_t lag_for(std::size_t n) const { return max_lag.value_or(default_max_lag(n)); }
  std::size_t window_for(std::size_t n) const { return window.value_or(default_window(n)); }
};

struct MetricValue {
  std::optional<double> value;
  std::string missing_reason;
  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

/// Named metric values for one pair; iteration order is alphabetical.
class MetricReport {
 public:
  void set(std::string_view name, double v) {
    if (std::isfinite(v))
      entries_[std::string(name)] = {v, {}};
    else
      entries_[std::string(name)] = {std::nullopt, "non-finite value"};
  }
  void set_missing(std::string_view name, std::string reason) {
    entries_[std::string(name)] = {std::nullopt, std::move(reason)};
  }

  bool has(std::string_view name) const {
    auto it = entries_.find(std::string(name));
    return it != entries_.end() && it->second.value.has_value();
  }
  double at(std::string_view name) const {
    auto it = entries_.find(std::string(name));
    if (it == entries_.end() || !it->second.value)
      fail(ErrorKind::MissingFeature, "metric '" + std::string(name) + "' unavailable");
    return *it->second.value;
  }
  const std::map<std::string, MetricValue>& entries() const noexcept { return entries_; }

  /// Flat object; missing metrics are null.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : entries_) j[k] = v.value ? nlohmann::ordered_json(*v.value) : nlohmann::ordered_json(nullptr);
    return j;
  }

  static std::string csv_header() {
    std::string h = "pair_id";
    for (auto n : kReportMetricNames) (h += ',') += n;
    return h;
  }

  /// Missing entries are written as empty fields.
  std::string csv_row(std::string_view pair_id) const {
    std::string r(pair_id);
    for (auto n : kReportMetricNames) {
      r += ',';
      auto it = entries_.find(std::string(n));
      if (it != entries_.end() && it->second.value) r += format_double(*it->second.value);
    }
    return r;
  }

  friend bool operator==(const MetricReport&, const MetricReport&) = default;

 private:
  std::map<std::string, MetricValue> entries_;
};

inline MetricReport full_report(Signal x, Signal y, const MetricConfig& cfg = {}) {
  detail::require_same_size(x, y);
  MetricReport rep;
  auto record = [&rep](std::initializer_list<std::string_view> names, auto&& compute) {
    try {
      compute();
    } catch (const Error& e) {
      for (auto n : names) rep.set_missing(n, e.what());
    }
  };

  record({"mae"}, [&] { rep.set("mae", mae(x, y)); });
  record({"mse"}, [&] { rep.set("mse", mse(x, y)); });
  record({"medae"}, [&] { rep.set("medae", medae(x, y)); });
  record({"maxae"}, [&] { rep.set("maxae", maxae(x, y)); });
  record({"r2"}, [&] { rep.set("r2", r2(x, y)); });
  record({"frac_explained_abs"}, [&] { rep.set("frac_explained_abs", frac_explained_abs(x, y)); });
  record({"explained_variance"}, [&] { rep.set("explained_variance", explained_variance(x, y)); });
  record({"pearson"}, [&] { rep.set("pearson", pearson(x, y)); });
  record({"nrmse"}, [&] { rep.set("nrmse", nrmse(x, y, cfg.normalizer)); });

  const PsiStats psi = psi_stats(x, y);
  const std::size_t max_lag = cfg.lag_for(x.size());
  const std::size_t window = cfg.window_for(x.size());

  record({"sg_m", "sg_p", "sg_c"}, [&] {
    const auto sg = sprague_geers(x, y, psi);
    rep.set("sg_m", sg.m);
    rep.set("sg_p", sg.p);
    rep.set("sg_c", sg.c);
  });
  record({"russell_m"}, [&] { rep.set("russell_m", russell_magnitude(psi)); });

  std::optional<ShiftScan> scan;
  std::optional<WarpedErrors> warped;
  record({"cross_corr_max", "nise_p", "nise_m", "nise_s", "nise_c", "eearth", "iso_r"}, [&] {
    auto s = cross_correlation(x, y, max_lag, psi);
    warped = warped_errors(x, y, s.n_star, window);
    scan = std::move(s);
  });
  if (scan) {
    rep.set("cross_corr_max", scan->rho_star());
    record({"nise_p", "nise_m", "nise_s", "nise_c"}, [&] {
      const auto d = nise(psi, *scan);
      rep.set("nise_p", d.p);
      rep.set("nise_m", d.m);
      rep.set("nise_s", d.s);
      rep.set("nise_c", d.c);
    });
    record({"eearth"}, [&] { rep.set("eearth", eearth(*scan, *warped, cfg.eearth_weights).score / 10.0); });
  }

  std::optional<double> corridor;
  record({"iso_corridor", "iso_r"}, [&] {
    corridor = corridor_score(x, y, cfg.corridor);
    rep.set("iso_corridor", *corridor);
  });
  if (scan && corridor) rep.set("iso_r", iso18571_scores(*corridor, *scan, max_lag, *warped).r);

  return rep;
}

inline MetricReport full_report(const SeriesPair& p, const MetricConfig& cfg = {}) {
  return full_report(p.x().v(), p.y().v(), cfg);
}

}  // namespace valmetric
