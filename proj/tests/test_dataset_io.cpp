#include <gtest/gtest.h>

#include "support/temp_dir.hpp"
#include "valmetric/dataset_io.hpp"

namespace vm = valmetric;

namespace {

vm::UniverseConfig tiny() {
  vm::UniverseConfig c;
  c.seed = 8;
  c.k_grid = {1.0, 1.1};
  c.d_grid = {1.0};
  c.p0_values = {0.0, 1.5};
  c.t_delay_ms_values = {0.0};
  c.n_experts = 3;
  c.t_end = 0.3;
  return c;
}

}  // namespace

TEST(RatingsCsv, ParseAndValidate) {
  auto rows = vm::parse_ratings_csv("pair_id,expert_id,rating\r\na,e1,0.5\nb,e2,1\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].pair_id, "b");
  EXPECT_EQ(rows[1].rating, 1.0);
  EXPECT_THROW(vm::parse_ratings_csv("pair,expert,rating\n"), vm::Error);
  EXPECT_THROW(vm::parse_ratings_csv("pair_id,expert_id,rating\na,e,1.2\n"), vm::Error);
  EXPECT_THROW(vm::parse_ratings_csv("pair_id,expert_id,rating\na,e,x\n"), vm::Error);
  EXPECT_THROW(vm::parse_ratings_csv(""), vm::Error);
}

TEST(DatasetIo, UniverseRoundTrip) {
  TempDir dir;
  auto c = tiny();
  auto u = vm::build_dataset(c);
  vm::save_universe(dir.path(), u, c);
  EXPECT_TRUE(std::filesystem::exists(dir / "experiments/exp_0.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "simulations/sim_01.csv"));
  auto back = vm::load_dataset(dir.path());
  EXPECT_EQ(back.manifest["provenance"], "synthetic");
  EXPECT_EQ(back.manifest["seed"], 8);
  EXPECT_EQ(vm::UniverseConfig::from_json(back.manifest["config"]).to_json(), c.to_json());
  ASSERT_EQ(back.dataset.records.size(), u.dataset.records.size());
  for (std::size_t i = 0; i < u.dataset.records.size(); ++i) {
    const auto& a = u.dataset.records[i];
    const auto& b = back.dataset.records[i];
    EXPECT_EQ(a.pair_id, b.pair_id);
    EXPECT_TRUE(std::equal(a.pair->x().v().begin(), a.pair->x().v().end(), b.pair->x().v().begin()));
    EXPECT_TRUE(std::equal(a.pair->y().v().begin(), a.pair->y().v().end(), b.pair->y().v().begin()));
    ASSERT_EQ(a.ratings.size(), b.ratings.size());
    for (std::size_t e = 0; e < a.ratings.size(); ++e) {
      EXPECT_EQ(a.ratings[e].expert_id, b.ratings[e].expert_id);
      EXPECT_EQ(a.ratings[e].rating, b.ratings[e].rating);
    }
  }
}

TEST(DatasetIo, SaveIsByteStable) {
  TempDir a, b;
  auto c = tiny();
  vm::save_universe(a.path(), vm::build_dataset(c), c);
  vm::save_universe(b.path(), vm::build_dataset(c), c);
  for (auto rel : {"ratings.csv", "manifest.json", "experiments/exp_1.csv"})
    EXPECT_EQ(vm::read_file(a / rel), vm::read_file(b / rel)) << rel;
}

TEST(DatasetIo, UnratedPairSkippedUnknownPairRejected) {
  TempDir dir;
  auto c = tiny();
  vm::save_universe(dir.path(), vm::build_dataset(c), c);
  vm::write_file(dir / "ratings.csv", "pair_id,expert_id,rating\ne0_s00,a,0.4\n");
  auto back = vm::load_dataset(dir.path());
  EXPECT_EQ(back.dataset.records.size(), 1u);
  vm::write_file(dir / "ratings.csv", "pair_id,expert_id,rating\nzzz,a,0.4\n");
  EXPECT_THROW(vm::load_dataset(dir.path()), vm::Error);
  vm::write_file(dir / "ratings.csv", "pair_id,expert_id,rating\n");
  try {
    vm::load_dataset(dir.path());
    FAIL();
  } catch (const vm::Error& e) {
    EXPECT_EQ(e.kind(), vm::ErrorKind::NoRatedPairs);
  }
}

TEST(DatasetIo, MissingManifest) {
  TempDir dir;
  try {
    vm::load_dataset(dir.path());
    FAIL();
  } catch (const vm::Error& e) {
    EXPECT_EQ(e.kind(), vm::ErrorKind::Io);
  }
}
