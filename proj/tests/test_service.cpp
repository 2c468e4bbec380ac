#include <gtest/gtest.h>

#include <thread>

#include "support/temp_dir.hpp"
#include "valmetric/rating_http.hpp"

namespace vm = valmetric;

namespace {

std::vector<vm::PairSource> write_pairs(const TempDir& dir, std::size_t count, std::size_t n = 50) {
  std::vector<vm::PairSource> out;
  for (std::size_t p = 0; p < count; ++p) {
    std::vector<double> t(n), x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = 0.01 * static_cast<double>(i);
      y[i] = std::sin(t[i] * 5.0);
      x[i] = (1.0 + 0.1 * static_cast<double>(p)) * y[i];
    }
    const auto id = "pair_" + std::to_string(p);
    vm::save_series_csv(dir / ("in/" + id + "_x.csv"), vm::TimeSeries(t, x));
    vm::save_series_csv(dir / ("in/" + id + "_y.csv"), vm::TimeSeries(t, y));
    out.push_back({id, dir / ("in/" + id + "_x.csv"), dir / ("in/" + id + "_y.csv"), {}, {}});
  }
  return out;
}

vm::ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const vm::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return vm::ErrorKind::Io;
}

}  // namespace

TEST(RatingService, CreateSession) {
  TempDir dir;
  vm::RatingService svc(dir / "store");
  auto s = svc.create_session(write_pairs(dir, 5), "s1");
  EXPECT_EQ(s.pairs.size(), 5u);
  EXPECT_EQ(s.pairs[3].pair_id, "pair_3");
  EXPECT_EQ(svc.sessions().size(), 1u);
  EXPECT_EQ(kind_of([&] { svc.create_session({}); }), vm::ErrorKind::EmptySession);
  auto dup = write_pairs(dir, 2);
  dup[1].pair_id = dup[0].pair_id;
  EXPECT_EQ(kind_of([&] { svc.create_session(dup); }), vm::ErrorKind::DuplicatePair);
  EXPECT_EQ(kind_of([&] { svc.create_session(write_pairs(dir, 1), "s1"); }), vm::ErrorKind::DuplicateSession);
  auto missing = write_pairs(dir, 1);
  missing[0].x = dir / "nope.csv";
  EXPECT_EQ(kind_of([&] { svc.create_session(missing, "s2"); }), vm::ErrorKind::Io);
  EXPECT_FALSE(std::filesystem::exists(dir / "store/s2"));
}

TEST(RatingService, RecordRatingContract) {
  TempDir dir;
  vm::RatingService svc(dir / "store");
  svc.create_session(write_pairs(dir, 2), "s");
  auto r = svc.record_rating("s", "pair_0", "alice", 0.7);
  EXPECT_EQ(r.record_id, "s-1");
  EXPECT_EQ(kind_of([&] { svc.record_rating("s", "pair_0", "alice", 1.2); }), vm::ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([&] { svc.record_rating("s", "pair_0", "alice", -0.1); }), vm::ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([&] { svc.record_rating("zz", "pair_0", "alice", 0.5); }), vm::ErrorKind::UnknownSession);
  EXPECT_EQ(kind_of([&] { svc.record_rating("s", "pair_9", "alice", 0.5); }), vm::ErrorKind::UnknownPair);
  EXPECT_EQ(svc.export_csv("s"), "pair_id,expert_id,rating\npair_0,alice,0.7\n");
}

TEST(RatingService, LatestWinsHistoryRetained) {
  TempDir dir;
  vm::RatingService svc(dir / "store");
  svc.create_session(write_pairs(dir, 1), "s");
  svc.record_rating("s", "pair_0", "bob", 0.6);
  svc.record_rating("s", "pair_0", "bob", 0.8, "second look");
  EXPECT_EQ(svc.export_csv("s"), "pair_id,expert_id,rating\npair_0,bob,0.8\n");
  auto h = svc.history("s");
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].rating, 0.6);
  EXPECT_EQ(h[1].annotation.value_or(""), "second look");
  const auto log = vm::read_file(dir / "store/s/ratings.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
}

TEST(RatingService, ReplayReconstructsState) {
  TempDir dir;
  std::string before;
  {
    vm::RatingService svc(dir / "store");
    svc.create_session(write_pairs(dir, 3), "s");
    svc.record_rating("s", "pair_0", "a", 0.1);
    svc.record_rating("s", "pair_2", "b", 0.9);
    svc.record_rating("s", "pair_0", "a", 0.3);
    before = svc.export_csv("s");
  }
  vm::RatingService again(dir / "store");
  EXPECT_EQ(again.export_csv("s"), before);
  EXPECT_EQ(again.history("s").size(), 3u);
  EXPECT_EQ(again.record_rating("s", "pair_1", "c", 0.5).record_id, "s-4");
}

TEST(RatingService, TruncatedFinalLogLineIgnored) {
  TempDir dir;
  {
    vm::RatingService svc(dir / "store");
    svc.create_session(write_pairs(dir, 1), "s");
    svc.record_rating("s", "pair_0", "a", 0.4);
  }
  std::ofstream(dir / "store/s/ratings.jsonl", std::ios::app) << "{\"record_id\":\"s-2\",\"sess";
  vm::RatingService again(dir / "store");
  EXPECT_EQ(again.history("s").size(), 1u);
}

TEST(RatingService, ExportLabels) {
  TempDir dir;
  vm::RatingService svc(dir / "store");
  svc.create_session(write_pairs(dir, 3), "s");
  EXPECT_EQ(kind_of([&] { svc.export_labels("s"); }), vm::ErrorKind::NoRatedPairs);
  svc.record_rating("s", "pair_0", "a", 0.4);
  svc.record_rating("s", "pair_2", "a", 0.6);
  svc.record_rating("s", "pair_2", "b", 0.5);
  auto ds = svc.export_labels("s");
  ASSERT_EQ(ds.records.size(), 2u);
  EXPECT_EQ(ds.records[1].pair_id, "pair_2");
  EXPECT_EQ(ds.rating_count(), 3u);
  EXPECT_EQ(ds.provenance, vm::Provenance::Collected);
  EXPECT_NO_THROW(ds.validate());
  EXPECT_EQ(svc.export_csv("s"), svc.export_csv("s"));

  svc.export_dataset("s", dir / "exported");
  auto back = vm::load_dataset(dir / "exported");
  EXPECT_EQ(back.dataset.rating_count(), 3u);
  EXPECT_EQ(back.dataset.records[0].pair->x(), ds.records[0].pair->x());
}

TEST(RatingService, PairDataDecimated) {
  TempDir dir;
  vm::RatingService svc(dir / "store");
  svc.create_session(write_pairs(dir, 1, 12001), "s");
  auto d = svc.pair_data("s", "pair_0", 5000);
  EXPECT_EQ(d.t.size(), 5000u);
  EXPECT_EQ(d.original_length, 12001u);
  EXPECT_EQ(d.t.front(), 0.0);
  EXPECT_DOUBLE_EQ(d.t.back(), 120.0);
  EXPECT_TRUE(std::is_sorted(d.t.begin(), d.t.end()));
  auto small = svc.pair_data("s", "pair_0", 20000);
  EXPECT_EQ(small.t.size(), 12001u);
}

TEST(Decimation, Indices) {
  EXPECT_EQ(vm::decimation_indices(3, 5), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(vm::decimation_indices(5, 3), (std::vector<std::size_t>{0, 2, 4}));
  auto idx = vm::decimation_indices(100000, 5000);
  EXPECT_EQ(idx.size(), 5000u);
  EXPECT_EQ(idx.back(), 99999u);
  EXPECT_TRUE(std::adjacent_find(idx.begin(), idx.end(), std::greater_equal<>()) == idx.end());
}

TEST(Legend, MatchesGradeTable) {
  auto j = vm::legend_json({});
  ASSERT_EQ(j.size(), 4u);
  EXPECT_EQ(j[0]["label"], "Excellent");
  EXPECT_EQ(j[0]["lower"], 0.94);
  EXPECT_EQ(j[3]["label"], "Poor");
  EXPECT_EQ(j[3]["upper"], 0.58);
}

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    svc_ = std::make_unique<vm::RatingService>(dir_ / "store");
    vm::install_routes(srv_, *svc_);
    port_ = srv_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    srv_.wait_until_ready();
    cli_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    srv_.stop();
    thread_.join();
  }

  httplib::Result post(const std::string& path, const nlohmann::json& body) {
    return cli_->Post(path, body.dump(), "application/json");
  }

  TempDir dir_;
  std::unique_ptr<vm::RatingService> svc_;
  httplib::Server srv_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> cli_;
};

TEST_F(HttpApi, SessionLifecycle) {
  auto sources = write_pairs(dir_, 2);
  nlohmann::json body{{"session_id", "web"}, {"pairs", nlohmann::json::array()}};
  for (const auto& s : sources) body["pairs"].push_back({{"pair_id", s.pair_id}, {"x", s.x.string()}, {"y", s.y.string()}});
  auto r = post("/api/sessions", body);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);

  auto list = cli_->Get("/api/sessions");
  ASSERT_TRUE(list);
  auto lj = nlohmann::json::parse(list->body);
  ASSERT_EQ(lj.size(), 1u);
  EXPECT_EQ(lj[0]["pair_count"], 2);

  auto detail = cli_->Get("/api/sessions/web");
  ASSERT_TRUE(detail);
  auto dj = nlohmann::json::parse(detail->body);
  EXPECT_EQ(dj["thresholds"], nlohmann::json({0.58, 0.8, 0.94}));
  EXPECT_EQ(dj["legend"].size(), 4u);
  EXPECT_EQ(dj["pairs"][1]["pair_id"], "pair_1");

  auto data = cli_->Get("/api/pairs/pair_1/data");
  ASSERT_TRUE(data);
  EXPECT_EQ(data->status, 200);
  auto pj = nlohmann::json::parse(data->body);
  EXPECT_EQ(pj["t"].size(), 50u);
  EXPECT_EQ(pj["measurement"].size(), pj["simulation"].size());

  auto ok = post("/api/pairs/pair_1/ratings", {{"expert_id", "e1"}, {"rating", 0.7}, {"annotation", "late peak"}});
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 201);
  EXPECT_EQ(nlohmann::json::parse(ok->body)["record_id"], "web-1");

  auto bad = post("/api/pairs/pair_1/ratings", {{"expert_id", "e1"}, {"rating", 1.2}});
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);
  auto nan_rating = post("/api/pairs/pair_1/ratings", {{"expert_id", "e1"}, {"rating", "high"}});
  EXPECT_EQ(nan_rating->status, 422);
  auto no_expert = post("/api/pairs/pair_1/ratings", {{"rating", 0.5}});
  EXPECT_EQ(no_expert->status, 400);
  auto unknown = post("/api/pairs/ghost/ratings", {{"expert_id", "e1"}, {"rating", 0.5}});
  EXPECT_EQ(unknown->status, 404);
  auto garbage = cli_->Post("/api/pairs/pair_1/ratings", "{not json", "application/json");
  EXPECT_EQ(garbage->status, 400);

  auto exp = cli_->Get("/api/sessions/web/export");
  ASSERT_TRUE(exp);
  EXPECT_EQ(exp->status, 200);
  EXPECT_EQ(exp->body, "pair_id,expert_id,rating\npair_1,e1,0.7\n");
  EXPECT_EQ(cli_->Get("/api/sessions/nope")->status, 404);
}

TEST_F(HttpApi, AmbiguousPairNeedsSession) {
  auto sources = write_pairs(dir_, 1);
  svc_->create_session(sources, "a");
  svc_->create_session(sources, "b");
  auto r = post("/api/pairs/pair_0/ratings", {{"expert_id", "e"}, {"rating", 0.5}});
  EXPECT_EQ(r->status, 409);
  auto ok = post("/api/pairs/pair_0/ratings", {{"expert_id", "e"}, {"rating", 0.5}, {"session_id", "b"}});
  EXPECT_EQ(ok->status, 201);
  EXPECT_EQ(cli_->Get("/api/pairs/pair_0/data")->status, 409);
  EXPECT_EQ(cli_->Get("/api/pairs/pair_0/data?session=a")->status, 200);
  EXPECT_EQ(cli_->Get("/api/sessions/a/export")->status, 409);
}

TEST_F(HttpApi, InlineSeriesSession) {
  nlohmann::json series{{"t", {0, 1, 2, 3, 4, 5, 6, 7}}, {"v", {0, 1, 0, 1, 0, 1, 0, 1}}};
  auto r = post("/api/sessions", {{"pairs", {{{"pair_id", "inline"}, {"x", series}, {"y", series}}}}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);
  EXPECT_EQ(nlohmann::json::parse(r->body)["session_id"], "session-1");
  EXPECT_EQ(post("/api/sessions", {{"pairs", nlohmann::json::array()}})->status, 400);
}
