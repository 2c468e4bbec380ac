#pragma once

// Time series containers, file loading and grid alignment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/error.hpp"
#include "valmetric/format.hpp"

namespace valmetric {

/// Maximum per-sample timestamp difference for two grids to count as identical.
inline constexpr double kGridTolerance = 1e-9;

/// Shortest pair accepted by align_pair.
inline constexpr std::size_t kMinPairLength = 8;

/// Strictly increasing, finite samples of one signal. Immutable once built.
class TimeSeries {
 public:
  TimeSeries(std::vector<double> t, std::vector<double> v, std::string name = {})
      : t_(std::move(t)), v_(std::move(v)), name_(std::move(name)) {
    if (t_.size() != v_.size())
      fail(ErrorKind::LengthMismatch, "series '" + name_ + "': t and v lengths differ");
    if (t_.size() < 2) fail(ErrorKind::TooShort, "series '" + name_ + "' needs at least 2 samples");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || !std::isfinite(v_[i]))
        fail(ErrorKind::NonFiniteValue, "series '" + name_ + "' sample " + std::to_string(i));
      if (i > 0 && !(t_[i] > t_[i - 1]))
        fail(ErrorKind::NonMonotoneTime, "series '" + name_ + "' at sample " + std::to_string(i));
    }
  }

  std::span<const double> t() const noexcept { return t_; }
  std::span<const double> v() const noexcept { return v_; }
  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return t_.size(); }
  double front_time() const noexcept { return t_.front(); }
  double back_time() const noexcept { return t_.back(); }

  /// Linear interpolation; exact at source timestamps, clamped outside the range.
  double at(double time) const {
    if (time <= t_.front()) return v_.front();
    if (time >= t_.back()) return v_.back();
    auto it = std::lower_bound(t_.begin(), t_.end(), time);
    std::size_t hi = static_cast<std::size_t>(it - t_.begin());
    if (t_[hi] == time) return v_[hi];
    std::size_t lo = hi - 1;
    double w = (time - t_[lo]) / (t_[hi] - t_[lo]);
    return v_[lo] + w * (v_[hi] - v_[lo]);
  }

  bool same_grid(const TimeSeries& other) const noexcept {
    if (size() != other.size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (std::abs(t_[i] - other.t_[i]) >= kGridTolerance) return false;
    return true;
  }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<double> t_;
  std::vector<double> v_;
  std::string name_;
};

/// Test signal x (simulation) and reference y (measurement) on one grid.
class SeriesPair {
 public:
  SeriesPair(TimeSeries x, TimeSeries y) : x_(std::move(x)), y_(std::move(y)) {
    if (!x_.same_grid(y_))
      fail(ErrorKind::GridMismatch, "pair '" + x_.name() + "'/'" + y_.name() + "' grids differ");
  }

  /// Convenience for signals on a unit-step grid 0, 1, ..., n-1.
  static SeriesPair from_values(std::vector<double> x, std::vector<double> y) {
    std::vector<double> t(x.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    return SeriesPair(TimeSeries(t, std::move(x), "x"), TimeSeries(t, std::move(y), "y"));
  }

  const TimeSeries& x() const noexcept { return x_; }
  const TimeSeries& y() const noexcept { return y_; }
  std::size_t n() const noexcept { return x_.size(); }

  friend bool operator==(const SeriesPair&, const SeriesPair&) = default;

 private:
  TimeSeries x_;
  TimeSeries y_;
};

enum class AlignPolicy { Intersect, Error };

/// Puts x onto y's grid restricted to the common time range.
inline SeriesPair align_pair(const TimeSeries& x, const TimeSeries& y,
                             AlignPolicy policy = AlignPolicy::Intersect) {
  if (x.same_grid(y)) {
    if (x.size() < kMinPairLength)
      fail(ErrorKind::TooShort, "aligned pair has " + std::to_string(x.size()) + " samples");
    // Stored grids must be bitwise identical downstream.
    std::vector<double> grid(y.t().begin(), y.t().end());
    return SeriesPair(TimeSeries(grid, {x.v().begin(), x.v().end()}, x.name()), y);
  }
  if (policy == AlignPolicy::Error)
    fail(ErrorKind::GridMismatch, "grids of '" + x.name() + "' and '" + y.name() + "' differ");

  const double lo = std::max(x.front_time(), y.front_time());
  const double hi = std::min(x.back_time(), y.back_time());
  if (!(lo <= hi)) fail(ErrorKind::EmptyOverlap, "'" + x.name() + "' and '" + y.name() + "'");

  std::vector<double> t, xv, yv;
  auto yt = y.t();
  auto yvals = y.v();
  for (std::size_t i = 0; i < yt.size(); ++i) {
    if (yt[i] < lo - kGridTolerance || yt[i] > hi + kGridTolerance) continue;
    t.push_back(yt[i]);
    xv.push_back(x.at(yt[i]));
    yv.push_back(yvals[i]);
  }
  if (t.size() < kMinPairLength)
    fail(ErrorKind::TooShort, "overlap of '" + x.name() + "' and '" + y.name() + "' has " +
                                  std::to_string(t.size()) + " samples");
  return SeriesPair(TimeSeries(t, std::move(xv), x.name()), TimeSeries(t, std::move(yv), y.name()));
}

enum class SeriesFormat { Csv, Json };

inline SeriesFormat format_from_path(const std::filesystem::path& p) {
  return p.extension() == ".json" ? SeriesFormat::Json : SeriesFormat::Csv;
}

inline TimeSeries parse_series_csv(std::string_view text, std::string name) {
  std::vector<double> t, v;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (trim(line) != "t,v") fail(ErrorKind::Parse, name + ": expected header 't,v'");
      header_seen = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string_view::npos)
      fail(ErrorKind::Parse, name + ": line " + std::to_string(line_no) + " lacks a comma");
    auto tv = parse_double(line.substr(0, comma));
    auto vv = parse_double(line.substr(comma + 1));
    if (!tv || !vv) fail(ErrorKind::Parse, name + ": bad number on line " + std::to_string(line_no));
    if (!std::isfinite(*tv) || !std::isfinite(*vv))
      fail(ErrorKind::NonFiniteValue, name + ": line " + std::to_string(line_no));
    t.push_back(*tv);
    v.push_back(*vv);
  }
  if (!header_seen) fail(ErrorKind::Parse, name + ": empty file");
  return TimeSeries(std::move(t), std::move(v), std::move(name));
}

inline TimeSeries parse_series_json(std::string_view text, std::string name) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, name + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("t") || !j.contains("v"))
    fail(ErrorKind::Parse, name + ": expected object with 't' and 'v'");
  auto read = [&](const nlohmann::json& arr) {
    if (!arr.is_array()) fail(ErrorKind::Parse, name + ": 't'/'v' must be arrays");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& e : arr) {
      // NaN/Inf are not JSON numbers; accept them spelled as strings so they map to NonFiniteValue.
      if (e.is_number()) {
        out.push_back(e.get<double>());
      } else if (e.is_string()) {
        auto d = parse_double(e.get<std::string>());
        if (!d) fail(ErrorKind::Parse, name + ": non-numeric entry");
        out.push_back(*d);
      } else if (e.is_null()) {
        fail(ErrorKind::NonFiniteValue, name + ": null entry");
      } else {
        fail(ErrorKind::Parse, name + ": non-numeric entry");
      }
    }
    return out;
  };
  auto t = read(j["t"]);
  auto v = read(j["v"]);
  for (std::size_t i = 0; i < std::min(t.size(), v.size()); ++i)
    if (!std::isfinite(t[i]) || !std::isfinite(v[i]))
      fail(ErrorKind::NonFiniteValue, name + ": sample " + std::to_string(i));
  if (j.contains("name") && j["name"].is_string()) name = j["name"].get<std::string>();
  return TimeSeries(std::move(t), std::move(v), std::move(name));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline TimeSeries load_series(const std::filesystem::path& path, SeriesFormat format) {
  std::string text = read_file(path);
  std::string name = path.stem().string();
  return format == SeriesFormat::Json ? parse_series_json(text, name) : parse_series_csv(text, name);
}

inline TimeSeries load_series(const std::filesystem::path& path) {
  return load_series(path, format_from_path(path));
}

inline std::string to_csv(const TimeSeries& s) {
  std::string out = "t,v\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += format_double(s.t()[i]);
    out += ',';
    out += format_double(s.v()[i]);
    out += '\n';
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline void save_series_csv(const std::filesystem::path& path, const TimeSeries& s) {
  write_file(path, to_csv(s));
}

}  // namespace valmetric
