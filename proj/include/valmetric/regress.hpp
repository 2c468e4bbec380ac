#pragma once

// Custom metric fitting: ordinary least squares and LASSO on standardized
// features, model scoring and prediction intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "valmetric/error.hpp"
#include "valmetric/features.hpp"
#include "valmetric/log.hpp"
#include "valmetric/rng.hpp"

namespace valmetric {

enum class FitStrategy { Ols, Lasso };

inline std::string to_string(FitStrategy s) { return s == FitStrategy::Ols ? "ols" : "lasso"; }

inline FitStrategy fit_strategy_from_string(const std::string& s) {
  if (s == "ols") return FitStrategy::Ols;
  if (s == "lasso") return FitStrategy::Lasso;
  fail(ErrorKind::Config, "unknown fit strategy '" + s + "'");
}

/// Per-feature affine map f -> (f - mean) / scale applied before fitting.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;
  friend bool operator==(const Standardization&, const Standardization&) = default;
};

/// Coefficients expressed in the original feature units.
struct RawCoefficients {
  double intercept = 0.0;
  std::vector<double> weights;
  std::vector<double> standard_errors;
};

struct CustomMetricModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;  ///< [intercept, w_1 .. w_p], standardized feature space
  double sigma_train = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
  Eigen::MatrixXd xtx_inv;  ///< (p+1)x(p+1) inverse Gram matrix of [1, standardized features]
  Standardization standardization;
  FitStrategy strategy = FitStrategy::Ols;
  std::optional<double> lambda;
  std::uint64_t seed = 0;
  bool rank_deficient = false;

  double intercept() const { return weights.front(); }

  /// Undo the standardization: w_raw = w / scale, intercept absorbs the means.
  RawCoefficients raw() const {
    RawCoefficients r;
    r.intercept = weights[0];
    for (std::size_t j = 0; j < p; ++j) {
      const double w = weights[j + 1] / standardization.scale[j];
      r.weights.push_back(w);
      r.intercept -= w * standardization.mean[j];
      const auto jj = static_cast<Eigen::Index>(j + 1);
      r.standard_errors.push_back(sigma_train * std::sqrt(std::max(0.0, xtx_inv(jj, jj))) /
                                  standardization.scale[j]);
    }
    return r;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["feature_names"] = feature_names;
    j["intercept"] = weights[0];
    j["weights"] = std::vector<double>(weights.begin() + 1, weights.end());
    j["sigma_train"] = sigma_train;
    j["n"] = n;
    j["p"] = p;
    std::vector<double> g(static_cast<std::size_t>(xtx_inv.size()));
    for (Eigen::Index r = 0; r < xtx_inv.rows(); ++r)
      for (Eigen::Index c = 0; c < xtx_inv.cols(); ++c)
        g[static_cast<std::size_t>(r * xtx_inv.cols() + c)] = xtx_inv(r, c);
    j["xtx_inv"] = g;
    j["standardization"] = {{"mean", standardization.mean}, {"scale", standardization.scale}};
    j["strategy"] = to_string(strategy);
    j["lambda"] = lambda ? nlohmann::ordered_json(*lambda) : nlohmann::ordered_json(nullptr);
    j["seed"] = seed;
    j["rank_deficient"] = rank_deficient;
    return j;
  }

  static CustomMetricModel from_json(const nlohmann::json& j) {
    try {
      CustomMetricModel m;
      m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      m.weights.push_back(j.at("intercept").get<double>());
      for (double w : j.at("weights").get<std::vector<double>>()) m.weights.push_back(w);
      m.sigma_train = j.at("sigma_train").get<double>();
      m.n = j.at("n").get<std::size_t>();
      m.p = j.at("p").get<std::size_t>();
      auto g = j.at("xtx_inv").get<std::vector<double>>();
      const auto dim = static_cast<Eigen::Index>(m.p + 1);
      if (g.size() != static_cast<std::size_t>(dim * dim)) fail(ErrorKind::Parse, "xtx_inv has wrong size");
      m.xtx_inv.resize(dim, dim);
      for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) m.xtx_inv(r, c) = g[static_cast<std::size_t>(r * dim + c)];
      m.standardization.mean = j.at("standardization").at("mean").get<std::vector<double>>();
      m.standardization.scale = j.at("standardization").at("scale").get<std::vector<double>>();
      m.strategy = fit_strategy_from_string(j.at("strategy").get<std::string>());
      if (j.contains("lambda") && !j["lambda"].is_null()) m.lambda = j["lambda"].get<double>();
      m.seed = j.value("seed", std::uint64_t{0});
      m.rank_deficient = j.value("rank_deficient", false);
      if (m.feature_names.size() != m.p || m.weights.size() != m.p + 1 || m.standardization.mean.size() != m.p ||
          m.standardization.scale.size() != m.p)
        fail(ErrorKind::Parse, "model dimensions are inconsistent");
      return m;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("model JSON: ") + e.what());
    }
  }

  friend bool operator==(const CustomMetricModel& a, const CustomMetricModel& b) {
    return a.feature_names == b.feature_names && a.weights == b.weights && a.sigma_train == b.sigma_train &&
           a.n == b.n && a.p == b.p && a.xtx_inv == b.xtx_inv && a.standardization == b.standardization &&
           a.strategy == b.strategy && a.lambda == b.lambda && a.seed == b.seed &&
           a.rank_deficient == b.rank_deficient;
  }
};

namespace detail {

inline Standardization standardize_params(const Eigen::MatrixXd& x) {
  Standardization s;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mu = x.col(c).mean();
    const double sd = std::sqrt((x.col(c).array() - mu).square().sum() / n);
    s.mean.push_back(mu);
    s.scale.push_back(sd > 0.0 ? sd : 1.0);
  }
  return s;
}

inline Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& x, const Standardization& s) {
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    z.col(c) = (x.col(c).array() - s.mean[static_cast<std::size_t>(c)]) / s.scale[static_cast<std::size_t>(c)];
  return z;
}

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd d(z.rows(), z.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(z.cols()) = z;
  return d;
}

struct LeastSquares {
  Eigen::VectorXd coef;
  Eigen::MatrixXd gram_inv;
  double rss = 0.0;
  bool rank_deficient = false;
};

inline LeastSquares least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  LeastSquares out;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  out.rank_deficient = cod.rank() < design.cols();
  const Eigen::MatrixXd gram = design.transpose() * design;
  if (out.rank_deficient) {
    out.coef = cod.solve(y);
    out.gram_inv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(gram).pseudoInverse();
  } else {
    out.coef = design.colPivHouseholderQr().solve(y);
    out.gram_inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
  }
  out.gram_inv = 0.5 * (out.gram_inv + out.gram_inv.transpose()).eval();
  out.rss = (y - design * out.coef).squaredNorm();
  return out;
}

}  // namespace detail

inline CustomMetricModel fit_ols(const FeatureMatrix& train) {
  const std::size_t n = train.rows(), p = train.cols();
  if (n <= p + 1)
    fail(ErrorKind::TooFewRows, std::to_string(n) + " rows for " + std::to_string(p) + " features");
  CustomMetricModel m;
  m.feature_names = train.feature_names;
  m.standardization = detail::standardize_params(train.features);
  const Eigen::MatrixXd design =
      detail::with_intercept(detail::apply_standardization(train.features, m.standardization));
  auto ls = detail::least_squares(design, train.labels);
  if (ls.rank_deficient) log::warn("fit_ols: rank-deficient design, using the pseudo-inverse");
  m.weights.assign(ls.coef.data(), ls.coef.data() + ls.coef.size());
  m.n = n;
  m.p = p;
  m.xtx_inv = ls.gram_inv;
  m.sigma_train = std::sqrt(ls.rss / static_cast<double>(n - p - 1));
  m.rank_deficient = ls.rank_deficient;
  m.strategy = FitStrategy::Ols;
  return m;
}

struct LassoOptions {
  std::size_t max_sweeps = 100000;
  double tolerance = 1e-12;  ///< max coefficient change per sweep, standardized units
};

/// Smallest penalty at which every coefficient is zero: max |z_j' (y - ybar)| / n.
inline double lasso_lambda_max(const FeatureMatrix& train) {
  const auto s = detail::standardize_params(train.features);
  const Eigen::MatrixXd z = detail::apply_standardization(train.features, s);
  const Eigen::VectorXd yc = train.labels.array() - train.labels.mean();
  return (z.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(train.rows());
}

namespace detail {

/// Cyclic coordinate descent for (1/2n)||yc - z w||^2 + lambda ||w||_1 with
/// unit-variance columns of z.
inline Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& z, const Eigen::VectorXd& yc, double lambda,
                                                const LassoOptions& opt) {
  const auto n = static_cast<double>(z.rows());
  const Eigen::Index p = z.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = yc;
  Eigen::VectorXd col_sq(p);
  for (Eigen::Index j = 0; j < p; ++j) col_sq(j) = z.col(j).squaredNorm() / n;
  for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double rho = z.col(j).dot(r) / n + col_sq(j) * w(j);
      // |rho| <= lambda up to round-off keeps the coefficient at exactly zero
      double next = 0.0;
      if (std::abs(rho) > lambda * (1.0 + 1e-12)) next = (rho > 0 ? rho - lambda : rho + lambda) / col_sq(j);
      const double delta = next - w(j);
      if (delta != 0.0) {
        r -= delta * z.col(j);
        w(j) = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < opt.tolerance) return w;
  }
  fail(ErrorKind::NonConvergence, "lasso did not converge after " + std::to_string(opt.max_sweeps) + " sweeps");
}

}  // namespace detail

inline CustomMetricModel fit_lasso(const FeatureMatrix& train, double lambda, const LassoOptions& opt = {}) {
  if (!(lambda >= 0.0)) fail(ErrorKind::InvalidArgument, "lambda must be >= 0");
  const std::size_t n = train.rows(), p = train.cols();
  if (n <= p + 1)
    fail(ErrorKind::TooFewRows, std::to_string(n) + " rows for " + std::to_string(p) + " features");
  const auto stdz = detail::standardize_params(train.features);
  const Eigen::MatrixXd z = detail::apply_standardization(train.features, stdz);
  const double ybar = train.labels.mean();
  const Eigen::VectorXd yc = train.labels.array() - ybar;
  const Eigen::VectorXd w = detail::lasso_coordinate_descent(z, yc, lambda, opt);

  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < w.size(); ++j)
    if (w(j) != 0.0) active.push_back(j);

  CustomMetricModel m;
  m.strategy = FitStrategy::Lasso;
  m.lambda = lambda;
  m.n = n;
  m.p = active.size();
  m.weights.push_back(ybar);
  Eigen::MatrixXd za(z.rows(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) {
    const auto j = active[k];
    m.feature_names.push_back(train.feature_names[static_cast<std::size_t>(j)]);
    m.weights.push_back(w(j));
    m.standardization.mean.push_back(stdz.mean[static_cast<std::size_t>(j)]);
    m.standardization.scale.push_back(stdz.scale[static_cast<std::size_t>(j)]);
    za.col(static_cast<Eigen::Index>(k)) = z.col(j);
  }
  // Residual scale and Gram inverse come from the OLS refit on the selected features.
  const auto refit = detail::least_squares(detail::with_intercept(za), train.labels);
  m.xtx_inv = refit.gram_inv;
  m.rank_deficient = refit.rank_deficient;
  m.sigma_train = std::sqrt(refit.rss / static_cast<double>(n - m.p - 1));
  return m;
}

struct LassoCvOptions {
  std::size_t folds = 5;
  std::size_t grid_size = 20;
  double min_ratio = 1e-3;  ///< smallest lambda relative to lambda_max
  LassoOptions solver;
};

/// Penalty chosen by K-fold cross-validation over a log grid; folds group rows by pair.
inline CustomMetricModel fit_lasso_cv(const FeatureMatrix& train, std::uint64_t seed, const LassoCvOptions& opt = {}) {
  const double lmax = lasso_lambda_max(train);
  std::vector<double> grid;
  for (std::size_t k = 0; k < opt.grid_size; ++k) {
    const double frac = opt.grid_size == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(opt.grid_size - 1);
    grid.push_back(lmax * std::pow(opt.min_ratio, frac));
  }

  std::vector<std::string> pairs;
  std::map<std::string, std::size_t> fold_of;
  for (const auto& pid : train.pair_ids)
    if (fold_of.emplace(pid, 0).second) pairs.push_back(pid);
  const std::size_t folds = std::min(opt.folds, pairs.size());
  if (folds < 2) fail(ErrorKind::TooFewPairs, "cross-validation needs at least 2 pairs");
  Rng rng = make_rng(seed, {0xC5});
  shuffle(pairs, rng);
  for (std::size_t i = 0; i < pairs.size(); ++i) fold_of[pairs[i]] = i % folds;

  std::vector<double> cv_mse(grid.size(), 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> tr, te;
    for (std::size_t r = 0; r < train.rows(); ++r) (fold_of[train.pair_ids[r]] == f ? te : tr).push_back(r);
    const auto fold_train = train.select_rows(tr);
    const auto fold_test = train.select_rows(te);
    if (fold_train.rows() <= fold_train.cols() + 1) fail(ErrorKind::TooFewRows, "cross-validation fold too small");
    const auto stdz = detail::standardize_params(fold_train.features);
    const Eigen::MatrixXd z = detail::apply_standardization(fold_train.features, stdz);
    const Eigen::MatrixXd zt = detail::apply_standardization(fold_test.features, stdz);
    const double ybar = fold_train.labels.mean();
    const Eigen::VectorXd yc = fold_train.labels.array() - ybar;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Eigen::VectorXd w = detail::lasso_coordinate_descent(z, yc, grid[g], opt.solver);
      const Eigen::VectorXd pred = (zt * w).array() + ybar;
      cv_mse[g] += (fold_test.labels - pred).squaredNorm() / static_cast<double>(train.rows());
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(cv_mse.begin(), cv_mse.end()) - cv_mse.begin());
  auto m = fit_lasso(train, grid[best], opt.solver);
  m.seed = seed;
  return m;
}

// ---------------------------------------------------------------------------
// Prediction

struct PredictionInterval {
  double center = 0.0;
  double simple_lo = 0.0, simple_hi = 0.0;
  double full_lo = 0.0, full_hi = 0.0;
  double alpha = 0.05;

  double simple_half_width() const { return 0.5 * (simple_hi - simple_lo); }
  double full_half_width() const { return 0.5 * (full_hi - full_lo); }
};

/// Two-sided quantile q(1 - alpha/2) of Student's t with dof degrees of freedom.
inline double t_quantile(double alpha, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), 1.0 - alpha / 2.0);
}

inline double normal_quantile(double alpha) {
  return boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
}

/// Sample sizes above this use the normal quantile in the simple interval.
inline constexpr std::size_t kNormalApproxThreshold = 30;

inline Eigen::VectorXd standardized_row(const CustomMetricModel& m, const std::map<std::string, double>& features) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(m.p + 1));
  x(0) = 1.0;
  for (std::size_t j = 0; j < m.p; ++j) {
    auto it = features.find(m.feature_names[j]);
    if (it == features.end()) fail(ErrorKind::MissingFeature, "feature '" + m.feature_names[j] + "' not provided");
    x(static_cast<Eigen::Index>(j + 1)) = (it->second - m.standardization.mean[j]) / m.standardization.scale[j];
  }
  return x;
}

inline double predict_center(const CustomMetricModel& m, const Eigen::VectorXd& xrow) {
  double c = 0.0;
  for (std::size_t j = 0; j <= m.p; ++j) c += m.weights[j] * xrow(static_cast<Eigen::Index>(j));
  return c;
}

inline PredictionInterval predict(const CustomMetricModel& m, const std::map<std::string, double>& features,
                                  double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::OutOfRange, "alpha must be in (0,1)");
  const Eigen::VectorXd x = standardized_row(m, features);
  PredictionInterval pi;
  pi.alpha = alpha;
  pi.center = predict_center(m, x);

  if (m.n < 3) fail(ErrorKind::TooFewRows, "interval needs n >= 3");
  const double q_simple =
      m.n > kNormalApproxThreshold ? normal_quantile(alpha) : t_quantile(alpha, static_cast<double>(m.n - 2));
  const double h_simple = m.sigma_train * q_simple;

  const double leverage = std::max(0.0, x.dot(m.xtx_inv * x));
  const double h_full = std::sqrt(m.sigma_train * m.sigma_train * (1.0 + leverage)) *
                        t_quantile(alpha, static_cast<double>(m.n - m.p - 1));

  pi.simple_lo = pi.center - h_simple;
  pi.simple_hi = pi.center + h_simple;
  pi.full_lo = pi.center - h_full;
  pi.full_hi = pi.center + h_full;
  return pi;
}

inline std::map<std::string, double> row_features(const FeatureMatrix& fm, std::size_t row) {
  std::map<std::string, double> f;
  for (std::size_t c = 0; c < fm.cols(); ++c)
    f[fm.feature_names[c]] = fm.features(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c));
  return f;
}

inline std::map<std::string, double> report_features(const MetricReport& rep) {
  std::map<std::string, double> f;
  for (const auto& [k, v] : rep.entries())
    if (v.value) f[k] = *v.value;
  return f;
}

inline Eigen::VectorXd predict_centers(const CustomMetricModel& m, const FeatureMatrix& fm) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(fm.rows()));
  for (std::size_t r = 0; r < fm.rows(); ++r)
    out(static_cast<Eigen::Index>(r)) = predict_center(m, standardized_row(m, row_features(fm, r)));
  return out;
}

/// Coefficient of determination of the model on held-out rows.
inline double score(const CustomMetricModel& m, const FeatureMatrix& test) {
  if (test.rows() == 0) fail(ErrorKind::InvalidArgument, "test set is empty");
  const Eigen::VectorXd pred = predict_centers(m, test);
  const double ybar = test.labels.mean();
  const double ss_tot = (test.labels.array() - ybar).square().sum();
  if (ss_tot == 0.0) fail(ErrorKind::ZeroVariance, "test labels are constant");
  return 1.0 - (test.labels - pred).squaredNorm() / ss_tot;
}

}  // namespace valmetric
