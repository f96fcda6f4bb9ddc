#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "crsim/cli.hpp"

using namespace crsim;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "crsim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

// small scenario so every command finishes quickly
const std::vector<std::string> kSmall{"--n", "4", "--set", "l_total=12", "--set", "pu_blocks=3,2", "--trials", "4"};

std::vector<std::string> with_small(std::vector<std::string> args) {
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  return args;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("crsim_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SweepIsByteIdenticalAcrossRuns) {
  const auto a = path("a.csv"), b = path("b.csv");
  ASSERT_EQ(run(with_small({"sweep", "--grid", "1e-4,1e-3", "--seed", "3", "--out", a})).code, 0);
  ASSERT_EQ(run(with_small({"sweep", "--grid", "1e-4,1e-3", "--seed", "3", "--out", b})).code, 0);
  const auto text = slurp(a);
  EXPECT_EQ(text, slurp(b));
  EXPECT_EQ(text.rfind("# crsim version=", 0), 0u);
  EXPECT_NE(text.find("\nscheme,sweep_axis,sweep_value,metric,mean,stderr,n\n"), std::string::npos);
  // 5 schemes x 2 points x 4 metrics
  std::istringstream lines(text);
  std::string line;
  int data = 0;
  while (std::getline(lines, line)) data += !line.empty() && line[0] != '#';
  EXPECT_EQ(data, 1 + 40);
}

TEST_F(Cli, SweepParallelMatchesSerial) {
  const auto a = path("a.csv"), b = path("b.csv");
  ASSERT_EQ(run(with_small({"sweep", "--grid", "1e-3", "--out", a})).code, 0);
  ASSERT_EQ(run(with_small({"sweep", "--grid", "1e-3", "--parallel", "2", "--out", b})).code, 0);
  // the banner omits the thread count, so the files match byte for byte
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(Cli, ValidateAcceptsSweepOutput) {
  const auto csv = path("s.csv"), json = path("s.json");
  ASSERT_EQ(run(with_small({"sweep", "--grid", "1e-4:1e-3:2", "--out", csv})).code, 0);
  ASSERT_EQ(run(with_small({"sweep", "--grid", "1e-4:1e-3:2", "--format", "json", "--out", json})).code, 0);
  auto v = run({"validate", csv});
  EXPECT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.out.find("valid sweep"), std::string::npos);
  v = run({"validate", json});
  EXPECT_EQ(v.code, 0) << v.err;
}

TEST_F(Cli, ValidateRejectsCorruptedSweep) {
  const auto csv = path("s.csv");
  ASSERT_EQ(run(with_small({"sweep", "--grid", "1e-3", "--scheme", "Proposed,WCR", "--out", csv})).code, 0);
  auto text = slurp(csv);
  const auto pos = text.find("Proposed,interference_limit,0.001,throughput,");
  ASSERT_NE(pos, std::string::npos);
  const auto line_end = text.find('\n', pos);
  auto line = text.substr(pos, line_end - pos);
  // mean,stderr,n: make the stderr negative
  const auto last = line.rfind(',');
  const auto prev = line.rfind(',', last - 1);
  line = line.substr(0, prev + 1) + "-1" + line.substr(last);
  spit(csv, text.substr(0, pos) + line + text.substr(line_end));
  const auto v = run({"validate", csv});
  EXPECT_EQ(v.code, kExitInvalid);
  EXPECT_NE(v.err.find("\"error\":\"invalid\""), std::string::npos);

  // a missing scheme block is also caught
  spit(csv, text.substr(0, text.find("WCR,")));
  EXPECT_EQ(run({"validate", csv}).code, kExitInvalid);
}

TEST_F(Cli, SolveRoundTripAndCorruptedPairing) {
  for (const char* fmt : {"csv", "json"}) {
    const auto f = path(std::string("alloc.") + fmt);
    const auto s = run(with_small({"solve", "--format", fmt, "--out", f}));
    ASSERT_EQ(s.code, 0) << s.err;
    const auto v = run({"validate", f});
    EXPECT_EQ(v.code, 0) << v.err;
    EXPECT_NE(v.out.find("valid allocation"), std::string::npos);
  }
  const auto f = path("alloc.csv");
  auto text = slurp(f);
  // flip the first unset pairing entry: its row now has two partners
  const auto pos = text.find(",0\n", text.find("\nq,"));
  ASSERT_NE(pos, std::string::npos);
  text[pos + 1] = '1';
  spit(f, text);
  const auto v = run({"validate", f});
  EXPECT_EQ(v.code, kExitInvalid);
  EXPECT_NE(v.err.find("pairing: q is not a permutation matrix"), std::string::npos);
}

TEST_F(Cli, SolvePrintsSummaryForEachScheme) {
  for (auto id : kAllSchemes) {
    const auto s = run(with_small({"solve", "--scheme", std::string(scheme_name(id))}));
    EXPECT_EQ(s.code, 0) << s.err;
    EXPECT_NE(s.out.find(std::string(scheme_name(id))), std::string::npos);
  }
  EXPECT_EQ(run(with_small({"solve", "--scheme", "Proposed,WCR"})).code, kExitUsage);
}

TEST_F(Cli, InfeasibleSolveExitsThree) {
  const auto s = run(with_small({"solve", "--interference-limit", "1e-15"}));
  EXPECT_EQ(s.code, kExitInfeasible);
  EXPECT_NE(s.err.find("\"error\":\"infeasible\""), std::string::npos);
}

TEST_F(Cli, DumpFactorsWritesFile) {
  const auto f = path("factors.csv");
  ASSERT_EQ(run(with_small({"solve", "--dump-factors", f})).code, 0);
  const auto text = slurp(f);
  EXPECT_EQ(text.rfind("# crsim", 0), 0u);
  for (const char* rec : {"\nj_ps,", "\nj_pr,", "\nphi_s,", "\nphi_r,", "\neff_s,", "\neff_r,"})
    EXPECT_NE(text.find(rec), std::string::npos) << rec;
}

TEST_F(Cli, OracleAgreesOnSmallInstances) {
  const auto o = run({"oracle", "--n", "3", "--seed", "7", "--trials", "5"});
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find(" PASS"), std::string::npos);
  EXPECT_EQ(run({"oracle", "--n", "6", "--trials", "1"}).code, kExitUsage);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run(with_small({"sweep", "--format", "xml"})).code, kExitUsage);
  EXPECT_EQ(run(with_small({"sweep", "--set", "bogus=1"})).code, kExitUsage);
  EXPECT_EQ(run(with_small({"sweep", "--set", "noequals"})).code, kExitUsage);
  EXPECT_EQ(run(with_small({"sweep", "--grid", "1e-3,1e-4"})).code, kExitUsage);
  EXPECT_EQ(run(with_small({"sweep", "--beta", "0.5"})).code, kExitUsage);
  EXPECT_EQ(run({"validate", path("missing.csv")}).code, kExitUsage);
  const auto u = run({"sweep", "--trials", "many"});
  EXPECT_EQ(u.code, kExitUsage);
  EXPECT_NE(u.err.find("\"error\":\"usage\""), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(Cli, ConfigEnvAndFlagPrecedence) {
  const auto cfg = path("run.toml");
  spit(cfg, "# comment\nn = 4\nl_total = 12\npu_blocks = \"3,2\"\ntrials = 2\ngrid = \"1e-3\"\nscheme = \"WCR\"\n");
  const auto banner_trials = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"sweep", "--config", cfg};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    const auto p = r.out.find("# trials=");
    return p == std::string::npos ? std::string{} : r.out.substr(p + 9, r.out.find('\n', p) - p - 9);
  };
  EXPECT_EQ(banner_trials({}), "2");
  ::setenv("CRSIM_TRIALS", "3", 1);
  EXPECT_EQ(banner_trials({}), "3");
  EXPECT_EQ(banner_trials({"--trials", "4"}), "4");
  EXPECT_EQ(banner_trials({"--set", "trials=5"}), "5");
  ::unsetenv("CRSIM_TRIALS");

  ::setenv("CRSIM_CONFIG", cfg.c_str(), 1);
  EXPECT_EQ(run({"sweep"}).code, 0);
  ::unsetenv("CRSIM_CONFIG");

  ::setenv("CRSIM_NOT_A_KEY", "1", 1);
  EXPECT_EQ(run({"sweep", "--config", cfg}).code, kExitUsage);
  ::unsetenv("CRSIM_NOT_A_KEY");

  spit(cfg, "unknown_key = 1\n");
  EXPECT_EQ(run({"sweep", "--config", cfg}).code, kExitUsage);
}
