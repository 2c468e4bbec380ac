#pragma once

// Labeled datasets and the regression-ready feature matrix built from them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "valmetric/error.hpp"
#include "valmetric/format.hpp"
#include "valmetric/log.hpp"
#include "valmetric/metrics.hpp"
#include "valmetric/parallel.hpp"
#include "valmetric/rng.hpp"
#include "valmetric/series.hpp"

namespace valmetric {

enum class Provenance { Synthetic, Collected };

inline std::string to_string(Provenance p) { return p == Provenance::Synthetic ? "synthetic" : "collected"; }

struct ExpertRating {
  std::string expert_id;
  double rating = 0.0;
  friend bool operator==(const ExpertRating&, const ExpertRating&) = default;
};

struct LabeledRecord {
  std::string pair_id;
  std::shared_ptr<const SeriesPair> pair;
  std::vector<ExpertRating> ratings;
};

struct LabeledDataset {
  std::vector<LabeledRecord> records;
  Provenance provenance = Provenance::Collected;

  std::size_t rating_count() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.ratings.size();
    return n;
  }

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
      if (!r.pair) fail(ErrorKind::InvalidArgument, "record '" + r.pair_id + "' has no series");
      if (!seen.insert(r.pair_id).second) fail(ErrorKind::DuplicatePair, r.pair_id);
      if (r.ratings.empty()) fail(ErrorKind::InvalidArgument, "pair '" + r.pair_id + "' has no ratings");
      for (const auto& e : r.ratings)
        if (!(e.rating >= 0.0 && e.rating <= 1.0))
          fail(ErrorKind::OutOfRange, "rating of pair '" + r.pair_id + "' outside [0,1]");
    }
  }
};

/// One row per (pair, rating) observation; columns sorted by name.
struct FeatureMatrix {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd features;
  Eigen::VectorXd labels;
  std::vector<std::string> pair_ids;
  std::vector<std::string> expert_ids;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t cols() const { return feature_names.size(); }

  std::ptrdiff_t column_index(const std::string& name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    return it == feature_names.end() ? -1 : it - feature_names.begin();
  }

  FeatureMatrix select_rows(const std::vector<std::size_t>& idx) const {
    FeatureMatrix out;
    out.feature_names = feature_names;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    out.labels.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto src = static_cast<Eigen::Index>(idx[r]);
      out.features.row(static_cast<Eigen::Index>(r)) = features.row(src);
      out.labels(static_cast<Eigen::Index>(r)) = labels(src);
      out.pair_ids.push_back(pair_ids[idx[r]]);
      out.expert_ids.push_back(expert_ids[idx[r]]);
    }
    return out;
  }

  FeatureMatrix select_columns(const std::vector<std::string>& names) const {
    FeatureMatrix out;
    out.feature_names = names;
    out.features.resize(features.rows(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t c = 0; c < names.size(); ++c) {
      auto src = column_index(names[c]);
      if (src < 0) fail(ErrorKind::MissingFeature, names[c]);
      out.features.col(static_cast<Eigen::Index>(c)) = features.col(src);
    }
    out.labels = labels;
    out.pair_ids = pair_ids;
    out.expert_ids = expert_ids;
    return out;
  }

  /// Header: feature columns, then pair_id, expert_id, rating.
  std::string to_csv() const {
    std::string out;
    for (const auto& n : feature_names) (out += n) += ',';
    out += "pair_id,expert_id,rating\n";
    for (std::size_t r = 0; r < rows(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      for (std::size_t c = 0; c < cols(); ++c) (out += format_double(features(ri, static_cast<Eigen::Index>(c)))) += ',';
      out += pair_ids[r] + ',' + expert_ids[r] + ',' + format_double(labels(ri)) + '\n';
    }
    return out;
  }

  static FeatureMatrix from_csv(std::string_view text) {
    auto split_line = [](std::string_view line) {
      std::vector<std::string_view> out;
      std::size_t start = 0;
      while (true) {
        auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
      }
      return out;
    };
    std::vector<std::string_view> lines;
    while (!text.empty()) {
      auto nl = text.find('\n');
      auto line = trim(text.substr(0, nl));
      if (!line.empty()) lines.push_back(line);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    }
    if (lines.empty()) fail(ErrorKind::Parse, "feature CSV is empty");
    auto header = split_line(lines[0]);
    if (header.size() < 3 || header[header.size() - 3] != "pair_id" || header[header.size() - 2] != "expert_id" ||
        header.back() != "rating")
      fail(ErrorKind::Parse, "feature CSV header must end with pair_id,expert_id,rating");
    FeatureMatrix fm;
    const std::size_t nf = header.size() - 3;
    for (std::size_t c = 0; c < nf; ++c) fm.feature_names.emplace_back(header[c]);
    const auto nrows = static_cast<Eigen::Index>(lines.size() - 1);
    fm.features.resize(nrows, static_cast<Eigen::Index>(nf));
    fm.labels.resize(nrows);
    for (std::size_t r = 1; r < lines.size(); ++r) {
      auto f = split_line(lines[r]);
      if (f.size() != header.size()) fail(ErrorKind::Parse, "feature CSV row " + std::to_string(r) + " width");
      const auto ri = static_cast<Eigen::Index>(r - 1);
      for (std::size_t c = 0; c < nf; ++c) {
        auto v = parse_double(f[c]);
        if (!v || !std::isfinite(*v)) fail(ErrorKind::Parse, "feature CSV row " + std::to_string(r));
        fm.features(ri, static_cast<Eigen::Index>(c)) = *v;
      }
      fm.pair_ids.emplace_back(f[nf]);
      fm.expert_ids.emplace_back(f[nf + 1]);
      auto lab = parse_double(f[nf + 2]);
      if (!lab || !(*lab >= 0.0 && *lab <= 1.0)) fail(ErrorKind::Parse, "bad rating on row " + std::to_string(r));
      fm.labels(ri) = *lab;
    }
    return fm;
  }
};

struct FeatureOutput {
  FeatureMatrix matrix;
  std::vector<MetricReport> reports;  ///< one per dataset record
  std::vector<std::string> dropped;   ///< "name: reason"
};

/// Metric reports for every pair, expanded to one row per rating. Metrics
/// missing on any pair are dropped for all rows.
inline FeatureOutput compute_features_detailed(const LabeledDataset& ds, const MetricConfig& cfg = {}) {
  if (ds.records.empty()) fail(ErrorKind::InvalidArgument, "dataset is empty");
  ds.validate();

  FeatureOutput out;
  out.reports.resize(ds.records.size());
  parallel_for(ds.records.size(), [&](std::size_t i) { out.reports[i] = full_report(*ds.records[i].pair, cfg); });

  std::vector<std::string> kept;
  for (auto name : kReportMetricNames) {
    std::string reason;
    for (std::size_t i = 0; i < out.reports.size() && reason.empty(); ++i) {
      const auto& e = out.reports[i].entries().at(std::string(name));
      if (!e.value) reason = "missing on pair '" + ds.records[i].pair_id + "' (" + e.missing_reason + ")";
    }
    if (reason.empty()) {
      kept.emplace_back(name);
    } else {
      log::info("dropping feature " + std::string(name) + ": " + reason);
      out.dropped.push_back(std::string(name) + ": " + reason);
    }
  }
  if (kept.empty()) fail(ErrorKind::AllFeaturesMissing, "no metric is available on every pair");

  FeatureMatrix& fm = out.matrix;
  fm.feature_names = kept;
  const auto nrows = static_cast<Eigen::Index>(ds.rating_count());
  fm.features.resize(nrows, static_cast<Eigen::Index>(kept.size()));
  fm.labels.resize(nrows);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    for (const auto& er : rec.ratings) {
      for (std::size_t c = 0; c < kept.size(); ++c)
        fm.features(row, static_cast<Eigen::Index>(c)) = out.reports[i].at(kept[c]);
      fm.labels(row) = er.rating;
      fm.pair_ids.push_back(rec.pair_id);
      fm.expert_ids.push_back(er.expert_id);
      ++row;
    }
  }
  return out;
}

inline FeatureMatrix compute_features(const LabeledDataset& ds, const MetricConfig& cfg = {}) {
  return compute_features_detailed(ds, cfg).matrix;
}

inline double column_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return den == 0.0 ? 0.0 : ca.dot(cb) / den;
}

/// Keep-first filter in column order: constant columns go first, then any
/// column whose |correlation| with an already kept column exceeds threshold.
inline FeatureMatrix drop_correlated(const FeatureMatrix& fm, double threshold = 0.9) {
  if (!(threshold > 0.0 && threshold <= 1.0)) fail(ErrorKind::InvalidArgument, "threshold must be in (0,1]");
  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < fm.cols(); ++c) {
    const auto col = fm.features.col(static_cast<Eigen::Index>(c));
    if (col.size() > 0 && (col.array() != col(0)).any())
      candidates.push_back(c);
    else
      log::debug("drop_correlated: constant column " + fm.feature_names[c]);
  }
  std::vector<std::size_t> kept;
  for (auto c : candidates) {
    const Eigen::VectorXd col = fm.features.col(static_cast<Eigen::Index>(c));
    bool keep = true;
    for (auto k : kept) {
      if (std::abs(column_correlation(col, fm.features.col(static_cast<Eigen::Index>(k)))) > threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(c);
  }
  std::vector<std::string> names;
  for (auto k : kept) names.push_back(fm.feature_names[k]);
  return fm.select_columns(names);
}

struct TrainTestSplit {
  FeatureMatrix train;
  FeatureMatrix test;
};

/// Pair-level split: all ratings of a pair land on the same side.
inline TrainTestSplit split(const FeatureMatrix& fm, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorKind::InvalidArgument, "train_fraction must be in (0,1)");
  std::vector<std::string> pairs;
  std::unordered_set<std::string> seen;
  for (const auto& p : fm.pair_ids)
    if (seen.insert(p).second) pairs.push_back(p);
  if (pairs.size() < 2) fail(ErrorKind::TooFewPairs, "need at least 2 distinct pairs to split");

  Rng rng = make_rng(seed, {0x5917});
  shuffle(pairs, rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(pairs.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, pairs.size() - 1);
  std::unordered_set<std::string> train_pairs(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t r = 0; r < fm.rows(); ++r)
    (train_pairs.count(fm.pair_ids[r]) ? train_idx : test_idx).push_back(r);
  return {fm.select_rows(train_idx), fm.select_rows(test_idx)};
}

}  // namespace valmetric
