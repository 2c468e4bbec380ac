#pragma once

// Rating sessions on disk:
//   <root>/<session_id>/session.json     manifest, grade table, created_at
//   <root>/<session_id>/series/*.csv     copies of the pair series
//   <root>/<session_id>/ratings.jsonl    append-only submission log
// The in-memory index is rebuilt from these files on construction.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/dataset_io.hpp"
#include "valmetric/error.hpp"
#include "valmetric/features.hpp"
#include "valmetric/grade.hpp"
#include "valmetric/log.hpp"
#include "valmetric/series.hpp"

namespace valmetric {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Identifiers end up in file names and CSV cells.
inline bool valid_identifier(std::string_view s) {
  if (s.empty() || s.size() > 128 || s.front() == '.') return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

inline nlohmann::ordered_json legend_json(const GradeTable& g) {
  const auto& t = g.thresholds;
  auto row = [](const std::string& label, double lo, double hi, bool lo_open, const std::string& text) {
    return nlohmann::ordered_json{{"label", label}, {"lower", lo}, {"upper", hi}, {"lower_exclusive", lo_open},
                                  {"description", text}};
  };
  return nlohmann::ordered_json::array(
      {row(g.labels[0], t[2], 1.0, true, "R > " + format_double(t[2])),
       row(g.labels[1], t[1], t[2], true, format_double(t[1]) + " < R <= " + format_double(t[2])),
       row(g.labels[2], t[0], t[1], true, format_double(t[0]) + " < R <= " + format_double(t[1])),
       row(g.labels[3], 0.0, t[0], false, "R <= " + format_double(t[0]))});
}

/// Series come from the inline values when present, otherwise from the files.
struct PairSource {
  std::string pair_id;
  std::filesystem::path x;  ///< simulation
  std::filesystem::path y;  ///< measurement
  std::optional<TimeSeries> x_series;
  std::optional<TimeSeries> y_series;
};

struct SessionPairEntry {
  std::string pair_id;
  std::string x;  ///< relative to the session directory
  std::string y;
};

struct RatingSession {
  std::string session_id;
  std::vector<SessionPairEntry> pairs;
  GradeTable grades;
  std::string created_at;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["session_id"] = session_id;
    j["created_at"] = created_at;
    j["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : pairs) j["pairs"].push_back({{"pair_id", p.pair_id}, {"x", p.x}, {"y", p.y}});
    j["thresholds"] = grades.thresholds;
    j["labels"] = grades.labels;
    return j;
  }

  static RatingSession from_json(const nlohmann::json& j) {
    try {
      RatingSession s;
      s.session_id = j.at("session_id").get<std::string>();
      s.created_at = j.value("created_at", std::string());
      for (const auto& p : j.at("pairs"))
        s.pairs.push_back({p.at("pair_id").get<std::string>(), p.at("x").get<std::string>(), p.at("y").get<std::string>()});
      if (j.contains("thresholds")) s.grades.thresholds = j["thresholds"].get<std::array<double, 3>>();
      if (j.contains("labels")) s.grades.labels = j["labels"].get<std::array<std::string, 4>>();
      if (!s.grades.valid()) fail(ErrorKind::Parse, "session thresholds must increase strictly inside (0,1)");
      return s;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("session.json: ") + e.what());
    }
  }
};

struct RatingRecord {
  std::string record_id;
  std::string session_id;
  std::string pair_id;
  std::string expert_id;
  double rating = 0.0;
  std::string submitted_at;
  std::optional<std::string> annotation;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"record_id", record_id}, {"session_id", session_id}, {"pair_id", pair_id},
                             {"expert_id", expert_id}, {"rating", rating},         {"submitted_at", submitted_at}};
    if (annotation) j["annotation"] = *annotation;
    return j;
  }

  static RatingRecord from_json(const nlohmann::json& j) {
    RatingRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.pair_id = j.at("pair_id").get<std::string>();
    r.expert_id = j.at("expert_id").get<std::string>();
    r.rating = j.at("rating").get<double>();
    r.submitted_at = j.value("submitted_at", std::string());
    if (j.contains("annotation") && j["annotation"].is_string()) r.annotation = j["annotation"].get<std::string>();
    return r;
  }
};

struct SessionSummary {
  std::string session_id;
  std::string created_at;
  std::size_t pair_count = 0;
  std::size_t rated_pairs = 0;
  std::size_t submissions = 0;
};

struct PairData {
  std::string session_id;
  std::string pair_id;
  std::vector<double> t;
  std::vector<double> measurement;
  std::vector<double> simulation;
  std::size_t original_length = 0;
};

/// At most max_points evenly spaced samples, always keeping both ends.
inline std::vector<std::size_t> decimation_indices(std::size_t n, std::size_t max_points) {
  max_points = std::max<std::size_t>(max_points, 2);
  std::vector<std::size_t> idx;
  if (n <= max_points) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t k = 0; k < max_points; ++k)
    idx.push_back(static_cast<std::size_t>((static_cast<unsigned long long>(k) * (n - 1) + (max_points - 1) / 2) /
                                           (max_points - 1)));
  return idx;
}

class RatingService {
 public:
  explicit RatingService(std::filesystem::path root, GradeTable grades = {}) : root_(std::move(root)), grades_(grades) {
    if (!grades_.valid()) fail(ErrorKind::Config, "grade thresholds must increase strictly inside (0,1)");
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + root_.string() + ": " + ec.message());
    rebuild_index();
  }

  const std::filesystem::path& root() const { return root_; }
  const GradeTable& grades() const { return grades_; }

  RatingSession create_session(const std::vector<PairSource>& sources, std::optional<std::string> session_id = {}) {
    if (sources.empty()) fail(ErrorKind::EmptySession, "a session needs at least one pair");
    std::map<std::string, int> seen;
    for (const auto& s : sources) {
      if (!valid_identifier(s.pair_id)) fail(ErrorKind::InvalidArgument, "invalid pair id '" + s.pair_id + "'");
      if (seen[s.pair_id]++) fail(ErrorKind::DuplicatePair, s.pair_id);
    }
    // Load everything before touching the store so a bad file leaves no partial session.
    std::vector<std::pair<TimeSeries, TimeSeries>> loaded;
    for (const auto& s : sources) {
      auto x = s.x_series ? *s.x_series : load_series(s.x);
      auto y = s.y_series ? *s.y_series : load_series(s.y);
      align_pair(x, y);
      loaded.emplace_back(std::move(x), std::move(y));
    }

    std::unique_lock lock(mutex_);
    std::string id = session_id.value_or("");
    if (id.empty()) {
      std::size_t k = sessions_.size() + 1;
      do id = "session-" + std::to_string(k++);
      while (sessions_.count(id) || std::filesystem::exists(root_ / id));
    }
    if (!valid_identifier(id)) fail(ErrorKind::InvalidArgument, "invalid session id '" + id + "'");
    if (sessions_.count(id) || std::filesystem::exists(root_ / id))
      fail(ErrorKind::DuplicateSession, "session '" + id + "' already exists");

    RatingSession s;
    s.session_id = id;
    s.grades = grades_;
    s.created_at = utc_timestamp();
    const auto dir = root_ / id;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      SessionPairEntry e{sources[i].pair_id, "series/" + sources[i].pair_id + ".x.csv",
                         "series/" + sources[i].pair_id + ".y.csv"};
      save_series_csv(dir / e.x, loaded[i].first);
      save_series_csv(dir / e.y, loaded[i].second);
      s.pairs.push_back(std::move(e));
    }
    write_json(dir / "session.json", s.to_json());
    write_file(dir / "ratings.jsonl", "");
    auto& st = sessions_[id];
    st.session = s;
    log::info("created session " + id + " with " + std::to_string(s.pairs.size()) + " pairs");
    return s;
  }

  std::vector<SessionSummary> sessions() const {
    std::shared_lock lock(mutex_);
    std::vector<SessionSummary> out;
    for (const auto& [id, st] : sessions_) {
      std::size_t rated = 0;
      for (const auto& p : st.session.pairs)
        if (st.latest.count(p.pair_id)) ++rated;
      out.push_back({id, st.session.created_at, st.session.pairs.size(), rated, st.history.size()});
    }
    return out;
  }

  RatingSession session(const std::string& id) const {
    std::shared_lock lock(mutex_);
    return state(id).session;
  }

  /// Sessions whose manifest contains pair_id, in id order.
  std::vector<std::string> sessions_with_pair(const std::string& pair_id) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, st] : sessions_)
      for (const auto& p : st.session.pairs)
        if (p.pair_id == pair_id) {
          out.push_back(id);
          break;
        }
    return out;
  }

  /// Resolve the session for a pair: explicit id, or the unique session holding the pair.
  std::string resolve_session(const std::string& pair_id, const std::optional<std::string>& session_id) const {
    if (session_id && !session_id->empty()) {
      std::shared_lock lock(mutex_);
      find_pair(state(*session_id), pair_id);
      return *session_id;
    }
    auto hits = sessions_with_pair(pair_id);
    if (hits.empty()) fail(ErrorKind::UnknownPair, "pair '" + pair_id + "' is in no session");
    if (hits.size() > 1)
      fail(ErrorKind::AmbiguousPair, "pair '" + pair_id + "' is in " + std::to_string(hits.size()) +
                                         " sessions; pass session_id");
    return hits.front();
  }

  RatingRecord record_rating(const std::string& session_id, const std::string& pair_id, const std::string& expert_id,
                             double rating, std::optional<std::string> annotation = {}) {
    if (!(rating >= 0.0 && rating <= 1.0)) fail(ErrorKind::OutOfRange, "rating must be in [0,1]");
    if (!valid_identifier(expert_id)) fail(ErrorKind::InvalidArgument, "invalid expert id '" + expert_id + "'");
    std::unique_lock lock(mutex_);
    auto& st = state(session_id);
    find_pair(st, pair_id);
    RatingRecord r;
    r.record_id = session_id + "-" + std::to_string(st.history.size() + 1);
    r.session_id = session_id;
    r.pair_id = pair_id;
    r.expert_id = expert_id;
    r.rating = rating;
    r.submitted_at = utc_timestamp();
    r.annotation = std::move(annotation);

    std::ofstream log_file(root_ / session_id / "ratings.jsonl", std::ios::app | std::ios::binary);
    if (!log_file) fail(ErrorKind::Io, "cannot append to the rating log of " + session_id);
    log_file << r.to_json().dump() << '\n';
    log_file.flush();
    if (!log_file) fail(ErrorKind::Io, "write to the rating log of " + session_id + " failed");
    apply(st, r);
    return r;
  }

  std::vector<RatingRecord> history(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    return state(session_id).history;
  }

  /// Latest rating per (pair, expert): manifest order, experts sorted by id.
  std::vector<RatingRow> latest_ratings(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    const auto& st = state(session_id);
    std::vector<RatingRow> rows;
    for (const auto& p : st.session.pairs) {
      auto it = st.latest.find(p.pair_id);
      if (it == st.latest.end()) continue;
      for (const auto& [expert, idx] : it->second) rows.push_back({p.pair_id, expert, st.history[idx].rating});
    }
    return rows;
  }

  /// Unrated pairs are left out with a warning.
  LabeledDataset export_labels(const std::string& session_id) const {
    const auto s = session(session_id);
    const auto rows = latest_ratings(session_id);
    std::map<std::string, std::vector<ExpertRating>> by_pair;
    for (const auto& r : rows) by_pair[r.pair_id].push_back({r.expert_id, r.rating});
    LabeledDataset ds;
    ds.provenance = Provenance::Collected;
    for (const auto& p : s.pairs) {
      auto it = by_pair.find(p.pair_id);
      if (it == by_pair.end()) {
        log::warn("export " + session_id + ": pair '" + p.pair_id + "' has no ratings, excluded");
        continue;
      }
      LabeledRecord rec;
      rec.pair_id = p.pair_id;
      rec.pair = std::make_shared<const SeriesPair>(load_pair(session_id, p));
      rec.ratings = it->second;
      ds.records.push_back(std::move(rec));
    }
    if (ds.records.empty()) fail(ErrorKind::NoRatedPairs, "session '" + session_id + "' has no ratings");
    return ds;
  }

  std::string export_csv(const std::string& session_id) const {
    const auto rows = latest_ratings(session_id);
    if (rows.empty()) fail(ErrorKind::NoRatedPairs, "session '" + session_id + "' has no ratings");
    std::string out = "pair_id,expert_id,rating\n";
    for (const auto& r : rows) out += r.pair_id + ',' + r.expert_id + ',' + format_double(r.rating) + '\n';
    return out;
  }

  /// Writes the exported labels as a dataset directory.
  void export_dataset(const std::string& session_id, const std::filesystem::path& dir) const {
    auto ds = export_labels(session_id);
    nlohmann::ordered_json extra{{"session_id", session_id}};
    save_dataset(dir, ds, extra);
  }

  PairData pair_data(const std::string& session_id, const std::string& pair_id, std::size_t max_points = 5000) const {
    const auto s = session(session_id);
    const auto& entry = find_pair_entry(s, pair_id);
    const auto pair = load_pair(session_id, entry);
    PairData d;
    d.session_id = session_id;
    d.pair_id = pair_id;
    d.original_length = pair.n();
    for (auto i : decimation_indices(pair.n(), max_points)) {
      d.t.push_back(pair.y().t()[i]);
      d.measurement.push_back(pair.y().v()[i]);
      d.simulation.push_back(pair.x().v()[i]);
    }
    return d;
  }

 private:
  struct SessionState {
    RatingSession session;
    std::vector<RatingRecord> history;
    std::map<std::string, std::map<std::string, std::size_t>> latest;  ///< pair -> expert -> history index
  };

  static void apply(SessionState& st, const RatingRecord& r) {
    st.history.push_back(r);
    st.latest[r.pair_id][r.expert_id] = st.history.size() - 1;
  }

  const SessionState& state(const std::string& id) const {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(ErrorKind::UnknownSession, "session '" + id + "' not found");
    return it->second;
  }
  SessionState& state(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) fail(ErrorKind::UnknownSession, "session '" + id + "' not found");
    return it->second;
  }

  static const SessionPairEntry& find_pair_entry(const RatingSession& s, const std::string& pair_id) {
    for (const auto& p : s.pairs)
      if (p.pair_id == pair_id) return p;
    fail(ErrorKind::UnknownPair, "pair '" + pair_id + "' not in session '" + s.session_id + "'");
  }
  static void find_pair(const SessionState& st, const std::string& pair_id) { find_pair_entry(st.session, pair_id); }

  SeriesPair load_pair(const std::string& session_id, const SessionPairEntry& e) const {
    const auto dir = root_ / session_id;
    return align_pair(load_series(dir / e.x), load_series(dir / e.y));
  }

  void rebuild_index() {
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
      if (!entry.is_directory() || !std::filesystem::exists(entry.path() / "session.json")) continue;
      SessionState st;
      st.session = RatingSession::from_json(read_json(entry.path() / "session.json"));
      const auto log_path = entry.path() / "ratings.jsonl";
      if (std::filesystem::exists(log_path)) {
        const auto text = read_file(log_path);
        std::size_t pos = 0, line_no = 0;
        while (pos < text.size()) {
          auto nl = text.find('\n', pos);
          const bool last = nl == std::string::npos;
          auto line = trim(std::string_view(text).substr(pos, last ? std::string::npos : nl - pos));
          pos = last ? text.size() : nl + 1;
          ++line_no;
          if (line.empty()) continue;
          try {
            apply(st, RatingRecord::from_json(nlohmann::json::parse(line)));
          } catch (const nlohmann::json::exception& e) {
            if (last) {
              log::warn(log_path.string() + ": ignoring truncated final line");
              break;
            }
            fail(ErrorKind::Parse, log_path.string() + " line " + std::to_string(line_no) + ": " + e.what());
          }
        }
      }
      const auto id = st.session.session_id;
      sessions_.emplace(id, std::move(st));
    }
    log::debug("rating index rebuilt: " + std::to_string(sessions_.size()) + " sessions");
  }

  std::filesystem::path root_;
  GradeTable grades_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, SessionState> sessions_;
};

}  // namespace valmetric
