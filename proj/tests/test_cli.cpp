// Drives the valmetric binary end to end: exit codes, artifact layout, generate -> fit -> predict.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "support/temp_dir.hpp"
#include "valmetric/dataset_io.hpp"

namespace vm = valmetric;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(VALMETRIC_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void write_sine(const std::filesystem::path& path, double gain) {
  std::string s = "t,v\n";
  for (int i = 0; i <= 200; ++i) {
    const double t = 0.01 * i;
    s += vm::format_double(t) + "," + vm::format_double(gain * std::sin(3.0 * t)) + "\n";
  }
  vm::write_file(path, s);
}

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("--version").code, 0);
  EXPECT_EQ(run("fit --no-such-flag").code, 3);
  EXPECT_EQ(run("fit --out /tmp/never").code, 3);  // missing seed
  EXPECT_EQ(run("predict --model /nonexistent/model.json --x a --y b").code, 4);
  EXPECT_EQ(run("fit --seed 1 --config /nonexistent/config.json").code, 3);
}

TEST(Cli, MetricsOnIdenticalSeries) {
  TempDir dir;
  write_sine(dir / "x.csv", 1.0);
  const auto r = run("metrics --x " + q(dir / "x.csv") + " --y " + q(dir / "x.csv"));
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j.at("rmse").get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j.at("report").at("iso_r").get<double>(), 1.0);
  EXPECT_FALSE(j.at("report").contains("rmse"));
}

TEST(Cli, GenerateFitPredict) {
  TempDir dir;
  const auto cfg = dir / "cfg.json";
  vm::write_file(cfg, R"({"universe": {"n_experts": 3, "t_end": 0.5}})");

  ASSERT_EQ(run("generate --seed 5 --config " + q(cfg) + " --out " + q(dir / "u")).code, 0);
  const auto manifest = vm::read_json(dir / "u" / "manifest.json");
  EXPECT_EQ(manifest.at("run").at("command"), "generate");
  EXPECT_EQ(manifest.at("run").at("seed"), 5);
  EXPECT_TRUE(std::filesystem::exists(dir / "u" / "ratings.csv"));
  // a second run may not overwrite the artifact
  EXPECT_EQ(run("generate --seed 5 --out " + q(dir / "u")).code, 3);

  ASSERT_EQ(run("fit --seed 5 --dataset " + q(dir / "u") + " --out " + q(dir / "m")).code, 0);
  const auto model = vm::read_json(dir / "m" / "model.json");
  EXPECT_TRUE(model.contains("metric_config"));
  EXPECT_TRUE(std::filesystem::exists(dir / "m" / "manifest.json"));

  write_sine(dir / "x.csv", 1.0);
  write_sine(dir / "y.csv", 0.9);
  const auto r = run("predict --model " + q(dir / "m" / "model.json") + " --x " + q(dir / "x.csv") + " --y " +
                     q(dir / "y.csv"));
  ASSERT_EQ(r.code, 0);
  const auto p = nlohmann::json::parse(r.out);
  const double c = p.at("center");
  EXPECT_LE(p.at("full_interval")[0].get<double>(), c);
  EXPECT_GE(p.at("full_interval")[1].get<double>(), c);
  EXPECT_TRUE(p.at("grade").is_string());
}

TEST(Cli, StudyWritesFigureFiles) {
  TempDir dir;
  const auto cfg = dir / "cfg.json";
  vm::write_file(cfg, R"({"universe": {"n_experts": 3, "t_end": 0.5}})");
  ASSERT_EQ(run("study --seed 2 --config " + q(cfg) + " --parameter n_experts --values 2 3 --repeats 2 --out " +
                q(dir / "s"))
                .code,
            0);
  const auto csv = vm::read_file(dir / "s" / "fig9.csv");
  EXPECT_EQ(csv.rfind("parameter,value,repeat,score\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  const auto j = vm::read_json(dir / "s" / "fig9.json");
  EXPECT_EQ(j.at("points").size(), 2u);
  EXPECT_EQ(run("study --seed 2 --parameter nope --out " + q(dir / "s2")).code, 3);
}
