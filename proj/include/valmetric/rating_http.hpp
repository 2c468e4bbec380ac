#pragma once

// HTTP/JSON front end of the rating service (cpp-httplib).
//
//   GET  /api/sessions                     summaries
//   POST /api/sessions                     {session_id?, pairs: [{pair_id, x, y}]}; x/y are paths or {t, v}
//   GET  /api/sessions/{id}                manifest, legend, thresholds
//   GET  /api/sessions/{id}/export         ratings CSV
//   GET  /api/pairs/{id}/data[?session=]   {t, measurement, simulation}, at most 5000 points
//   POST /api/pairs/{id}/ratings           {expert_id, rating, annotation?, session_id?} -> 201

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "valmetric/error.hpp"
#include "valmetric/log.hpp"
#include "valmetric/rating_service.hpp"

// keep below Eigen: <resolv.h> defines _res
#include <httplib.h>

namespace valmetric {

inline constexpr std::size_t kMaxPlotPoints = 5000;

inline int http_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::OutOfRange: return 422;
    case ErrorKind::UnknownSession:
    case ErrorKind::UnknownPair: return 404;
    case ErrorKind::AmbiguousPair:
    case ErrorKind::DuplicateSession:
    case ErrorKind::NoRatedPairs: return 409;
    case ErrorKind::Io: return 500;
    default: return 400;
  }
}

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, ErrorKind kind, const std::string& message) {
  send_json(res, status, {{"error", to_string(kind)}, {"message", message}});
}

/// Runs fn and turns library errors into JSON error responses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, http_status(e.kind()), e.kind(), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, ErrorKind::Parse, e.what());
  } catch (const std::exception& e) {
    log::error(std::string("http handler: ") + e.what());
    send_error(res, 500, ErrorKind::Io, e.what());
  }
}

inline nlohmann::ordered_json session_detail_json(const RatingService& svc, const RatingSession& s) {
  nlohmann::ordered_json j;
  j["session_id"] = s.session_id;
  j["created_at"] = s.created_at;
  std::map<std::string, std::vector<std::string>> raters;
  for (const auto& r : svc.latest_ratings(s.session_id)) raters[r.pair_id].push_back(r.expert_id);
  j["pairs"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.pairs.size(); ++i)
    j["pairs"].push_back({{"index", i}, {"pair_id", s.pairs[i].pair_id}, {"rated_by", raters[s.pairs[i].pair_id]}});
  j["legend"] = legend_json(s.grades);
  j["thresholds"] = s.grades.thresholds;
  return j;
}

inline PairSource pair_source_from_json(const nlohmann::json& p) {
  PairSource src;
  src.pair_id = p.at("pair_id").get<std::string>();
  auto side = [&](const char* key, std::filesystem::path& path, std::optional<TimeSeries>& inline_series) {
    const auto& v = p.at(key);
    if (v.is_string())
      path = v.get<std::string>();
    else if (v.is_object())
      inline_series = parse_series_json(v.dump(), src.pair_id + "." + key);
    else
      fail(ErrorKind::Parse, std::string("pair field '") + key + "' must be a path or a {t, v} object");
  };
  side("x", src.x, src.x_series);
  side("y", src.y, src.y_series);
  return src;
}

/// Registers the API routes; static files are served from ui_dir when it exists.
inline void install_routes(httplib::Server& srv, RatingService& svc,
                           const std::optional<std::filesystem::path>& ui_dir = std::nullopt) {
  srv.Get("/api/sessions", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      auto out = nlohmann::ordered_json::array();
      for (const auto& s : svc.sessions())
        out.push_back({{"session_id", s.session_id},
                       {"created_at", s.created_at},
                       {"pair_count", s.pair_count},
                       {"rated_pairs", s.rated_pairs},
                       {"submissions", s.submissions}});
      send_json(res, 200, out);
    });
  });

  srv.Post("/api/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = nlohmann::json::parse(req.body);
      std::vector<PairSource> sources;
      for (const auto& p : body.at("pairs")) sources.push_back(pair_source_from_json(p));
      std::optional<std::string> id;
      if (body.contains("session_id") && body["session_id"].is_string()) id = body["session_id"].get<std::string>();
      const auto s = svc.create_session(sources, id);
      send_json(res, 201, session_detail_json(svc, s));
    });
  });

  srv.Get("/api/sessions/:id", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, session_detail_json(svc, svc.session(req.path_params.at("id")))); });
  });

  srv.Get("/api/sessions/:id/export", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(svc.export_csv(req.path_params.at("id")), "text/csv");
    });
  });

  srv.Get("/api/pairs/:id/data", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto pair_id = req.path_params.at("id");
      std::optional<std::string> sid;
      if (req.has_param("session")) sid = req.get_param_value("session");
      const auto d = svc.pair_data(svc.resolve_session(pair_id, sid), pair_id, kMaxPlotPoints);
      send_json(res, 200,
                {{"session_id", d.session_id},
                 {"pair_id", d.pair_id},
                 {"original_length", d.original_length},
                 {"t", d.t},
                 {"measurement", d.measurement},
                 {"simulation", d.simulation}});
    });
  });

  srv.Post("/api/pairs/:id/ratings", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto pair_id = req.path_params.at("id");
      const auto body = nlohmann::json::parse(req.body);
      if (!body.is_object()) fail(ErrorKind::Parse, "body must be a JSON object");
      if (!body.contains("expert_id") || !body["expert_id"].is_string())
        fail(ErrorKind::InvalidArgument, "expert_id is required");
      if (!body.contains("rating") || !body["rating"].is_number())
        fail(ErrorKind::OutOfRange, "rating must be a number in [0,1]");
      std::optional<std::string> sid, note;
      if (body.contains("session_id") && body["session_id"].is_string()) sid = body["session_id"].get<std::string>();
      if (body.contains("annotation") && body["annotation"].is_string()) note = body["annotation"].get<std::string>();
      const double rating = body["rating"].get<double>();
      if (!(rating >= 0.0 && rating <= 1.0)) fail(ErrorKind::OutOfRange, "rating must be in [0,1]");
      const auto r =
          svc.record_rating(svc.resolve_session(pair_id, sid), pair_id, body["expert_id"].get<std::string>(), rating, note);
      send_json(res, 201, r.to_json());
    });
  });

  if (ui_dir && std::filesystem::is_directory(*ui_dir)) {
    if (!srv.set_mount_point("/", ui_dir->string())) log::warn("cannot serve static files from " + ui_dir->string());
  }
}

}  // namespace valmetric
