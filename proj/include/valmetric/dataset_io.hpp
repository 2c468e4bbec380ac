#pragma once

// Labeled dataset directories:
//   manifest.json   provenance, seed, config, pairs [{pair_id, x, y}] (paths relative to the directory)
//   ratings.csv     pair_id,expert_id,rating
//   <series files>  t,v CSVs; universe datasets use experiments/ and simulations/

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valmetric/error.hpp"
#include "valmetric/features.hpp"
#include "valmetric/format.hpp"
#include "valmetric/log.hpp"
#include "valmetric/series.hpp"
#include "valmetric/universe.hpp"

namespace valmetric {

struct PairFiles {
  std::string x;  ///< simulation / model output
  std::string y;  ///< measurement / reference
};

inline std::string ratings_csv(const LabeledDataset& ds) {
  std::string out = "pair_id,expert_id,rating\n";
  for (const auto& r : ds.records)
    for (const auto& e : r.ratings) out += r.pair_id + ',' + e.expert_id + ',' + format_double(e.rating) + '\n';
  return out;
}

struct RatingRow {
  std::string pair_id;
  std::string expert_id;
  double rating = 0.0;
};

inline std::vector<RatingRow> parse_ratings_csv(std::string_view text) {
  std::vector<RatingRow> rows;
  bool header = true;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      if (line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != "pair_id,expert_id,rating") fail(ErrorKind::Parse, "ratings header must be pair_id,expert_id,rating");
      header = false;
      continue;
    }
    auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string_view::npos || c1 == c2) fail(ErrorKind::Parse, "ratings line " + std::to_string(line_no));
    RatingRow row{std::string(trim(line.substr(0, c1))), std::string(trim(line.substr(c1 + 1, c2 - c1 - 1))), 0.0};
    auto v = parse_double(trim(line.substr(c2 + 1)));
    if (!v) fail(ErrorKind::Parse, "ratings line " + std::to_string(line_no) + ": bad number");
    if (!(*v >= 0.0 && *v <= 1.0))
      fail(ErrorKind::OutOfRange, "ratings line " + std::to_string(line_no) + ": rating outside [0,1]");
    row.rating = *v;
    rows.push_back(std::move(row));
  }
  if (header) fail(ErrorKind::Parse, "ratings file is empty");
  return rows;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_file(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

/// Writes series files (once per distinct path), ratings.csv and manifest.json.
inline void save_dataset(const std::filesystem::path& dir, const LabeledDataset& ds, const std::vector<PairFiles>& files,
                         nlohmann::ordered_json extra = nlohmann::ordered_json::object()) {
  if (files.size() != ds.records.size()) fail(ErrorKind::InvalidArgument, "one PairFiles entry per record");
  std::map<std::string, const TimeSeries*> written;
  auto put = [&](const std::string& rel, const TimeSeries& s) {
    auto [it, fresh] = written.emplace(rel, &s);
    if (fresh)
      save_series_csv(dir / rel, s);
    else if (!(*it->second == s))
      fail(ErrorKind::InvalidArgument, "two different series map to " + rel);
  };
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    put(files[i].x, r.pair->x());
    put(files[i].y, r.pair->y());
    pairs.push_back({{"pair_id", r.pair_id}, {"x", files[i].x}, {"y", files[i].y}});
  }
  write_file(dir / "ratings.csv", ratings_csv(ds));
  nlohmann::ordered_json m;
  m["provenance"] = to_string(ds.provenance);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  m["pairs"] = std::move(pairs);
  write_json(dir / "manifest.json", m);
}

/// Default per-pair layout: series/<pair_id>.x.csv and series/<pair_id>.y.csv.
inline void save_dataset(const std::filesystem::path& dir, const LabeledDataset& ds,
                         nlohmann::ordered_json extra = nlohmann::ordered_json::object()) {
  std::vector<PairFiles> files;
  for (const auto& r : ds.records) files.push_back({"series/" + r.pair_id + ".x.csv", "series/" + r.pair_id + ".y.csv"});
  save_dataset(dir, ds, files, std::move(extra));
}

inline void save_universe(const std::filesystem::path& dir, const UniverseData& u, const UniverseConfig& c,
                          nlohmann::ordered_json extra = nlohmann::ordered_json::object()) {
  std::vector<PairFiles> files;
  for (const auto& p : u.pairs)
    files.push_back({"simulations/" + simulation_name(p.simulation) + ".csv",
                     "experiments/" + experiment_name(p.experiment) + ".csv"});
  extra["seed"] = c.seed;
  extra["config"] = c.to_json();
  save_dataset(dir, u.dataset, files, std::move(extra));
}

struct LoadedDataset {
  LabeledDataset dataset;
  nlohmann::json manifest;
  std::vector<PairFiles> files;  ///< parallel to dataset.records
};

/// Pairs without any rating are skipped with a warning; ratings for unknown pairs are an error.
inline LoadedDataset load_dataset(const std::filesystem::path& dir, AlignPolicy policy = AlignPolicy::Intersect) {
  LoadedDataset out;
  out.manifest = read_json(dir / "manifest.json");
  const auto& m = out.manifest;
  if (!m.is_object() || !m.contains("pairs") || !m["pairs"].is_array())
    fail(ErrorKind::Parse, "manifest.json needs a pairs array");
  const auto prov = m.value("provenance", std::string("collected"));
  out.dataset.provenance = prov == "synthetic" ? Provenance::Synthetic : Provenance::Collected;

  std::map<std::string, std::shared_ptr<const TimeSeries>> cache;
  auto get = [&](const std::string& rel) {
    auto it = cache.find(rel);
    if (it == cache.end()) it = cache.emplace(rel, std::make_shared<const TimeSeries>(load_series(dir / rel))).first;
    return it->second;
  };

  std::map<std::string, std::vector<ExpertRating>> by_pair;
  for (auto& row : parse_ratings_csv(read_file(dir / "ratings.csv")))
    by_pair[row.pair_id].push_back({row.expert_id, row.rating});

  std::map<std::string, bool> known;
  for (const auto& p : m["pairs"]) {
    PairFiles f;
    std::string id;
    try {
      id = p.at("pair_id").get<std::string>();
      f = {p.at("x").get<std::string>(), p.at("y").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("manifest pair entry: ") + e.what());
    }
    if (!known.emplace(id, true).second) fail(ErrorKind::DuplicatePair, id);
    auto rit = by_pair.find(id);
    if (rit == by_pair.end()) {
      log::warn("pair '" + id + "' has no ratings, skipped");
      continue;
    }
    auto x = get(f.x), y = get(f.y);
    LabeledRecord rec;
    rec.pair_id = id;
    rec.pair = std::make_shared<const SeriesPair>(align_pair(*x, *y, policy));
    rec.ratings = rit->second;
    out.dataset.records.push_back(std::move(rec));
    out.files.push_back(std::move(f));
  }
  for (const auto& [id, _] : by_pair)
    if (!known.count(id)) fail(ErrorKind::UnknownPair, "ratings.csv references '" + id + "' absent from the manifest");
  if (out.dataset.records.empty()) fail(ErrorKind::NoRatedPairs, dir.string());
  out.dataset.validate();
  return out;
}

}  // namespace valmetric
