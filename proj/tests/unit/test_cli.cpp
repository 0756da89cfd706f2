#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "mrsl/data.hpp"
#include "mrsl/multires.hpp"
#include "mrsl/stacking.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

Run mrsl_cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(MRSL_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fixture::read_file(err);
  return r;
}

// A small simulation so each CLI call stays fast.
fs::path small_sim_config(const fs::path& dir, const std::string& preset, int subjects) {
  const fs::path p = dir / ("sim-" + preset + ".json");
  std::ofstream(p) << json{{"simulation", {{"preset", preset}, {"subjects", subjects}, {"shape", {{"n_target", 200}, {"tolerance", 0.2}}}}}}.dump();
  return p;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fixture::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, HelpAndVersion) {
  EXPECT_EQ(mrsl_cli("--help", dir).code, 0);
  EXPECT_EQ(mrsl_cli("--version", dir).code, 0);
  EXPECT_EQ(mrsl_cli("frobnicate", dir).code, 2);
}

TEST_F(Cli, SimulateIsByteIdenticalForASeed) {
  const auto cfg = small_sim_config(dir, "strong-hetero-strong-spatial", 3);
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --seed 5 --out " + (dir / "a.csv").string(), dir).code, 0);
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --seed 5 --out " + (dir / "b.csv").string(), dir).code, 0);
  EXPECT_EQ(fixture::read_file(dir / "a.csv"), fixture::read_file(dir / "b.csv"));
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --seed 6 --out " + (dir / "c.csv").string(), dir).code, 0);
  EXPECT_NE(fixture::read_file(dir / "a.csv"), fixture::read_file(dir / "c.csv"));
  EXPECT_TRUE(fs::exists(dir / "a.csv.provenance.json"));
  const auto prov = json::parse(fixture::read_file(dir / "a.csv.provenance.json"));
  EXPECT_EQ(prov["seed"], 5);
  EXPECT_EQ(prov["command"], "simulate");
}

TEST_F(Cli, SimulateSubjectCount) {
  const auto cfg = small_sim_config(dir, "strong-hetero-moderate-spatial", 2);
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --subjects 4 --out " + (dir / "d.json").string(), dir).code, 0);
  EXPECT_EQ(mrsl::load_dataset(dir / "d.json").subjects.size(), 4u);
}

TEST_F(Cli, BadSmoothnessExitsTwoNamingField) {
  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"preset": "strong-hetero-strong-spatial", "matern": {"smoothness": -1}})";
  const auto r = mrsl_cli("simulate --config " + cfg.string() + " --out " + (dir / "x.csv").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("matern.smoothness"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingDataExitsOne) {
  EXPECT_EQ(mrsl_cli("train --data " + (dir / "none.csv").string() + " --out " + (dir / "m.json").string(), dir).code, 1);
}

TEST_F(Cli, TrainPredictEvaluate) {
  const auto cfg = small_sim_config(dir, "strong-hetero-strong-spatial", 5);
  const auto data = (dir / "train.csv").string();
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --seed 9 --out " + data, dir).code, 0);
  const std::string common = " --resolutions 3 --folds 3 --bandwidth-grid 0.05,0.2 --seed 4";
  ASSERT_EQ(mrsl_cli("train --data " + data + common + " --out " + (dir / "m1.json").string(), dir).code, 0);
  ASSERT_EQ(mrsl_cli("train --data " + data + common + " --jobs 2 --out " + (dir / "m2.json").string(), dir).code, 0);
  EXPECT_EQ(fixture::read_file(dir / "m1.json"), fixture::read_file(dir / "m2.json"));

  // The log lists one bandwidth per resolution.
  const auto log = fixture::read_file(dir / "m1.json.log");
  for (const char* k : {"k=1:", "k=2:", "k=3:"}) EXPECT_NE(log.find(k), std::string::npos) << log;

  ASSERT_EQ(mrsl_cli("evaluate --model " + (dir / "m1.json").string() + " --data " + data + " --out " +
                         (dir / "eval.json").string(),
                     dir)
                .code,
            0);
  const auto report = json::parse(fixture::read_file(dir / "eval.json"));
  EXPECT_GT(report["metrics"]["auc"].get<double>(), 0.5);
  EXPECT_EQ(report["per_subject_auc"].size(), 5u);
  EXPECT_TRUE(fs::exists(dir / "eval.json.txt"));

  ASSERT_EQ(mrsl_cli("predict --model " + (dir / "m1.json").string() + " --data " + data + " --out " +
                         (dir / "pred.csv").string(),
                     dir)
                .code,
            0);
  std::istringstream lines(fixture::read_file(dir / "pred.csv"));
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "subject,voxel,x,y,p0,p1,category");
  std::size_t rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  EXPECT_EQ(rows, mrsl::load_dataset(data).total_voxels());
}

TEST_F(Cli, BaselinePredictionsMatchLibrary) {
  const auto cfg = small_sim_config(dir, "strong-hetero-strong-spatial", 4);
  const auto data = (dir / "train.json").string();
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --seed 10 --out " + data, dir).code, 0);
  ASSERT_EQ(mrsl_cli("train --data " + data + " --mode Baseline --folds 2 --out " + (dir / "b.json").string(), dir).code, 0);
  ASSERT_EQ(mrsl_cli("predict --model " + (dir / "b.json").string() + " --data " + data + " --out " +
                         (dir / "pred.csv").string(),
                     dir)
                .code,
            0);
  const auto ds = mrsl::load_dataset(data);
  const auto base = mrsl::fit_multiresolution(ds, mrsl::LearnerSpec{}, 1, mrsl::Target::Binary);
  std::istringstream lines(fixture::read_file(dir / "pred.csv"));
  std::string line;
  std::getline(lines, line);
  for (const auto& s : ds.subjects) {
    const auto p = mrsl::predict_multiresolution(base, s)[0];
    for (std::size_t j = 0; j < s.size(); ++j) {
      ASSERT_TRUE(std::getline(lines, line));
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      ASSERT_EQ(cells.size(), 7u);
      EXPECT_EQ(cells[0], s.id);
      EXPECT_EQ(std::stod(cells[5]), p(static_cast<Eigen::Index>(j), 1));
    }
  }
}

TEST_F(Cli, OrdinalTrainAndEvaluate) {
  const auto cfg = small_sim_config(dir, "ordinal-strong-hetero-strong-spatial", 4);
  const auto data = (dir / "ord.csv").string();
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --seed 3 --out " + data, dir).code, 0);
  ASSERT_EQ(mrsl_cli("train --data " + data + " --weights W2 --resolutions 2 --folds 2 --out " + (dir / "o.json").string(),
                     dir)
                .code,
            0);
  ASSERT_EQ(mrsl_cli("evaluate --model " + (dir / "o.json").string() + " --data " + data + " --out " +
                         (dir / "o-eval.json").string(),
                     dir)
                .code,
            0);
  const auto report = json::parse(fixture::read_file(dir / "o-eval.json"));
  EXPECT_EQ(report["target"], "ordinal");
  EXPECT_EQ(report["rates"]["fpr"].size(), 3u);
}

TEST_F(Cli, ExperimentWritesSummary) {
  const fs::path cfg = dir / "exp.json";
  std::ofstream(cfg) << json{{"simulation", {{"preset", "strong-hetero-strong-spatial"}, {"subjects", 4}, {"shape", {{"n_target", 150}, {"tolerance", 0.2}}}}},
                             {"resolutions", 2},
                             {"folds", 2},
                             {"bandwidth_grid", {0.1}},
                             {"replicates", 1}}
                            .dump();
  ASSERT_EQ(mrsl_cli("experiment --config " + cfg.string() + " --out " + (dir / "out").string(), dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "replicates.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.txt"));
  const auto s = json::parse(fixture::read_file(dir / "out" / "summary.json"));
  EXPECT_EQ(s["rows"].size(), 3u);
}

TEST_F(Cli, BandwidthCommand) {
  const auto cfg = small_sim_config(dir, "strong-hetero-strong-spatial", 4);
  const auto data = (dir / "bw.csv").string();
  ASSERT_EQ(mrsl_cli("simulate --config " + cfg.string() + " --out " + data, dir).code, 0);
  ASSERT_EQ(mrsl_cli("bandwidth --data " + data + " --resolutions 2 --folds 2 --out " + (dir / "bw.json").string(), dir).code, 0);
  const auto j = json::parse(fixture::read_file(dir / "bw.json"));
  EXPECT_EQ(j[0]["bandwidths"]["h"].size(), 2u);
}
