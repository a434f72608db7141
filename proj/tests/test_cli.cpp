#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "evsynth/cli.hpp"
#include "evsynth/model_config.hpp"

namespace fs = std::filesystem;
using evsynth::cli::run_cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("evsynth_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kSmall =
    "[model]\nregions = Inner-London\ngroups = female.IDU-current, female.LR\nbias = off\n"
    "[populations]\nfemale.Inner-London = 100000\n"
    "[sources]\nsize = rho\nua = pi\nclinic = delta\n"
    "[data]\n"
    "size,female,IDU-current,Inner-London,binomial,200,10000\n"
    "ua,female,IDU-current,Inner-London,binomial,30,500\n"
    "ua,female,LR,Inner-London,binomial,2,1000\n"
    "clinic,female,IDU-current,Inner-London,binomial,20,30\n"
    "clinic,female,LR,Inner-London,binomial,1,2\n";

}  // namespace

TEST_F(CliTest, CheckFullConfig) {
  const auto cfg = write("full.ini", evsynth::prevalence::format_config(evsynth::prevalence::reference_config()));
  EXPECT_EQ(run({"check", cfg.string()}), 0);
  EXPECT_NE(out_.str().find("theta parameters: 111"), std::string::npos);
  EXPECT_NE(out_.str().find("groups: 13"), std::string::npos);
  EXPECT_NE(out_.str().find("regions: 3"), std::string::npos);
}

TEST_F(CliTest, CheckErrors) {
  std::string typo = kSmall;
  typo += "ua,female,LR,Inner-Londn,binomial,2,1000\n";
  EXPECT_EQ(run({"check", write("typo.ini", typo).string()}), 3);
  EXPECT_NE(err_.str().find("Inner-Londn"), std::string::npos);
  EXPECT_EQ(run({"check", write("bad.ini", "[model\n").string()}), 2);
  EXPECT_EQ(run({"check", (dir_ / "missing.ini").string()}), 1);
  EXPECT_EQ(run({"check", write("groups.ini", "[model]\ngroups = female.Pilots\n").string()}), 3);
}

TEST_F(CliTest, CheckPriorOnlyWarns) {
  const auto cfg = write("empty.ini", "[model]\nregions = Inner-London\n[data]\n");
  EXPECT_EQ(run({"check", cfg.string()}), 0);
  EXPECT_NE(err_.str().find("prior-only model"), std::string::npos);
}

TEST_F(CliTest, SimulateIsDeterministicAndRoundTrips) {
  const auto cfg = write("small.ini", kSmall);
  ASSERT_EQ(run({"simulate", cfg.string(), "--seed", "5", "-o", (dir_ / "a").string()}), 0);
  ASSERT_EQ(run({"simulate", cfg.string(), "--seed", "5", "-o", (dir_ / "b").string()}), 0);
  for (const char* f : {"truth.csv", "data.csv"}) EXPECT_EQ(read(dir_ / "a" / f), read(dir_ / "b" / f)) << f;
  EXPECT_TRUE(fs::exists(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(run({"check", cfg.string(), "--data", (dir_ / "a" / "data.csv").string()}), 0);
  ASSERT_EQ(run({"simulate", cfg.string(), "--seed", "6", "-o", (dir_ / "c").string()}), 0);
  EXPECT_NE(read(dir_ / "a" / "data.csv"), read(dir_ / "c" / "data.csv"));
}

TEST_F(CliTest, SimulateHugeDesignNearTruth) {
  const auto cfg = write("small.ini", kSmall);
  ASSERT_EQ(run({"simulate", cfg.string(), "--seed", "2", "--n", "1000000", "-o", dir_.string()}), 0);
  const auto records = evsynth::prevalence::parse_data_csv(read(dir_ / "data.csv"));
  std::map<std::string, double> truth;
  std::istringstream in(read(dir_ / "truth.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) truth[line.substr(0, line.find(','))] = std::stod(line.substr(line.find(',') + 1));
  // Three cells: rho, pi and delta of female IDU-current.
  const std::vector<std::pair<std::size_t, std::string>> spot{{0, "rho.female.IDU-current.Inner-London"},
                                                              {1, "pi.female.IDU-current.Inner-London"},
                                                              {3, "delta.female.IDU-current.Inner-London"}};
  for (const auto& [row, label] : spot) {
    ASSERT_TRUE(truth.count(label)) << label;
    const double p = truth[label];
    const double n = static_cast<double>(records[row].n);
    EXPECT_EQ(n, 1e6);
    EXPECT_NEAR(records[row].x / n, p, 3 * std::sqrt(p * (1 - p) / n) + 1e-12) << label;
  }
}

TEST_F(CliTest, FitWritesOutputsDeterministically) {
  const auto cfg = write("small.ini", kSmall);
  const std::vector<std::string> common{"--iterations", "3000", "--burnin", "1000", "--seed", "11"};
  auto args = [&](const std::string& out) {
    std::vector<std::string> a{"fit", cfg.string(), "-o", (dir_ / out).string(), "--strip", "pi.female.LR.Inner-London"};
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  const int code = run(args("a"));
  EXPECT_TRUE(code == 0 || code == 4) << err_.str();
  ASSERT_EQ(run(args("b")), code);
  for (const char* f : {"samples_chain1.csv", "samples_chain2.csv", "summary.csv", "diagnostics.csv",
                        "strip_pi.female.LR.Inner-London.csv"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(read(dir_ / "a" / f), read(dir_ / "b" / f)) << f;
  }
  EXPECT_TRUE(read(dir_ / "a" / "summary.csv").starts_with("quantity,median,mean,sd,q025,q975,rhat,ess\n"));
  const std::string manifest = read(dir_ / "a" / "manifest.json");
  EXPECT_NE(manifest.find("\"status\": \"complete\""), std::string::npos);
  EXPECT_NE(manifest.find("\"seed\": 11"), std::string::npos);
}

TEST_F(CliTest, ReplayReproducesSamples) {
  const auto cfg = write("small.ini", kSmall);
  const fs::path out = dir_ / "run";
  const int code = run({"fit", cfg.string(), "-o", out.string(), "--iterations", "2000", "--burnin", "1000"});
  ASSERT_TRUE(code == 0 || code == 4);
  const std::string before = read(out / "samples_chain1.csv");
  fs::remove(out / "samples_chain1.csv");
  fs::remove(out / "samples_chain2.csv");
  fs::copy_file(out / "manifest.json", dir_ / "manifest.json");
  EXPECT_EQ(run({"replay", (dir_ / "manifest.json").string()}), code);
  EXPECT_EQ(read(out / "samples_chain1.csv"), before);
  EXPECT_EQ(run({"replay", (dir_ / "manifest.json").string(), "-o", (dir_ / "elsewhere").string()}), code);
  EXPECT_EQ(read(dir_ / "elsewhere" / "samples_chain1.csv"), before);
}

TEST_F(CliTest, SingleChainMarksRhatUnavailable) {
  const auto cfg = write("small.ini", kSmall);
  EXPECT_EQ(run({"fit", cfg.string(), "-o", dir_.string(), "--chains", "1", "--iterations", "2000", "--burnin", "1000"}), 0);
  EXPECT_NE(err_.str().find("R-hat unavailable"), std::string::npos);
  const std::string diag = read(dir_ / "diagnostics.csv");
  EXPECT_NE(diag.find("unavailable"), std::string::npos);
  EXPECT_EQ(diag.find(",ok\n"), std::string::npos);
}

TEST_F(CliTest, FlagErrors) {
  const auto cfg = write("small.ini", kSmall);
  EXPECT_EQ(run({"fit", cfg.string(), "-o", dir_.string(), "--iterations", "100", "--burnin", "200"}), 2);
  EXPECT_EQ(run({"fit", cfg.string()}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("fit-joint"), std::string::npos);
}

TEST_F(CliTest, FitJoint) {
  const auto cfg = write("joint.ini", "[dynamics]\nyears = 4\n");
  ASSERT_EQ(run({"simulate", cfg.string(), "--seed", "3", "--n", "20000", "-o", (dir_ / "sim").string()}), 0);
  ASSERT_TRUE(fs::exists(dir_ / "sim" / "rates.csv"));
  const int code = run({"fit-joint", cfg.string(), "--prevalence-data", (dir_ / "sim" / "prevalence.csv").string(),
                        "--rate-data", (dir_ / "sim" / "rates.csv").string(), "-o", (dir_ / "fit").string(),
                        "--iterations", "2000", "--burnin", "1000"});
  EXPECT_TRUE(code == 0 || code == 4) << err_.str();
  for (const char* f : {"trajectory.csv", "strip_lambda_su.1.csv", "strip_lambda_ud.3.csv", "summary.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "fit" / f)) << f;
  }
  EXPECT_TRUE(read(dir_ / "fit" / "trajectory.csv").starts_with("t,e,s,u,d\n"));

  const auto short_cfg = write("t1.ini", "[dynamics]\nyears = 1\n");
  EXPECT_EQ(run({"fit-joint", short_cfg.string(), "-o", (dir_ / "t1").string()}), 3);
  EXPECT_NE(err_.str().find("joint model requires T >= 2"), std::string::npos);
}
