#include "coxmix/serialize.hpp"

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(COXMIX_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("coxmix_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string read(const std::string& name) const { return coxmix::read_text_file(dir_ / name); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, VersionAndHelp) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("simulate"), 2);
  EXPECT_EQ(run("simulate --n 0 -o " + path("d.csv")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("fit " + path("missing.csv")), 2);
}

TEST_F(Cli, DataErrorsExitThree) {
  coxmix::write_text_file(dir_ / "bad.csv", "time,status,x1\n1.0,2,0.5\n2.0,1,0.1\n");
  EXPECT_EQ(run("fit " + path("bad.csv") + " -o " + path("m.json")), 3);
  coxmix::write_text_file(dir_ / "garbage.json", "{ not json");
  ASSERT_EQ(run("simulate --n 80 --seed 3 -o " + path("d.csv")), 0);
  EXPECT_EQ(run("predict --model " + path("garbage.json") + " --data " + path("d.csv") + " -o " + path("p.csv")), 3);
}

TEST_F(Cli, NumericalErrorsExitFour) {
  ASSERT_EQ(run("simulate --n 80 --seed 3 --censor 0 -o " + path("d.csv")), 0);
  ASSERT_EQ(run("fit " + path("d.csv") + " --k-init 1 --restarts 1 --level 0 -o " + path("m.json")), 0);
  // t beyond every observed time leaves no control mass
  EXPECT_EQ(run("roc --model " + path("m.json") + " --data " + path("d.csv") + " --times 1000 -o " + path("r.csv") +
                " --auc-output " + path("a.csv")),
            4);
}

TEST_F(Cli, PipelineIsByteReproducible) {
  for (const std::string tag : {"a", "b"}) {
    ASSERT_EQ(run("simulate --n 150 --seed 11 -o " + path("d" + tag + ".csv") + " --labels " + path("l" + tag + ".csv")), 0);
    ASSERT_EQ(run("fit " + path("d" + tag + ".csv") + " --penalty scad --level 0.1 --k-init 4 --restarts 2 --seed 5 -o " +
                  path("m" + tag + ".json")),
              0);
    ASSERT_EQ(run("predict --model " + path("m" + tag + ".json") + " --data " + path("d" + tag + ".csv") +
                  " --marker-mode mixture_event_prob --time 0.2 -o " + path("p" + tag + ".csv")),
              0);
    ASSERT_EQ(run("roc --model " + path("m" + tag + ".json") + " --data " + path("d" + tag + ".csv") +
                  " --times 0.1,0.2 -o " + path("r" + tag + ".csv") + " --auc-output " + path("a" + tag + ".csv")),
              0);
  }
  for (const std::string f : {"d%.csv", "l%.csv", "m%.json", "p%.csv", "r%.csv", "a%.csv", "m%.json.meta.json"}) {
    std::string fa = f, fb = f;
    fa.replace(fa.find('%'), 1, "a");
    fb.replace(fb.find('%'), 1, "b");
    std::string ta = read(fa), tb = read(fb);
    if (f.find("meta") != std::string::npos) {
      // sidecars name their own files; compare with paths normalized
      auto strip = [&](std::string s, const std::string& tag) {
        for (const std::string stem : {"d", "m"}) {
          const std::string from = path(stem + tag), to = path(stem + "X");
          for (std::size_t p; (p = s.find(from)) != std::string::npos;) s.replace(p, from.size(), to);
        }
        return s;
      };
      ta = strip(ta, "a");
      tb = strip(tb, "b");
    }
    EXPECT_EQ(ta, tb) << f;
  }
  const auto meta = nlohmann::json::parse(read("ma.json.meta.json"));
  EXPECT_EQ(meta["command"], "fit");
  EXPECT_EQ(meta["seed"].get<std::uint64_t>(), 5u);
  EXPECT_TRUE(meta.contains("options"));
  const auto auc = read("aa.csv");
  EXPECT_NE(auc.find("mixture_event_prob"), std::string::npos);
}

TEST_F(Cli, TuneAndExternalMarkers) {
  ASSERT_EQ(run("simulate --n 120 --seed 2 -o " + path("d.csv")), 0);
  ASSERT_EQ(run("tune " + path("d.csv") + " --c-grid 0.5,1.5 --k-init 3 --restarts 1 -o " + path("t.csv") +
                " --model-output " + path("best.json")),
            0);
  const std::string tuning = read("t.csv");
  EXPECT_EQ(std::count(tuning.begin(), tuning.end(), '\n'), 3);
  coxmix::FittedModel m = coxmix::model_from_json(read("best.json"));
  EXPECT_GE(m.params.K(), 1u);
  ASSERT_EQ(run("predict --model " + path("best.json") + " --data " + path("d.csv") + " --marker-mode mixture_posterior_lp -o " + path("p.csv")), 0);
  ASSERT_EQ(run("roc --data " + path("d.csv") + " --markers " + path("p.csv") + " --times 0.1 -o " + path("r.csv") +
                " --auc-output " + path("a.csv")),
            0);
  EXPECT_NE(read("a.csv").find("external"), std::string::npos);
}
