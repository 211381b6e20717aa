#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mig/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "migsel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mig::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("migsel-test-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  // 39 rows, 9 covariates, roughly 28 complete rows, two real effects.
  std::string wages_like(bool with_missing = true) {
    std::mt19937_64 eng(2024);
    std::normal_distribution<double> z;
    std::bernoulli_distribution miss(0.035);
    std::ostringstream s;
    s << "wage,edu,exper,age,union,hours,tenure,married,region,size\n";
    for (int i = 0; i < 39; ++i) {
      double x[9];
      for (double& v : x) v = z(eng);
      s << 10.0 + 2.0 * x[0] + 1.5 * x[1] + z(eng);
      for (int j = 0; j < 9; ++j) {
        s << ',';
        if (!(with_missing && i >= 4 && miss(eng))) s << x[j];
      }
      s << '\n';
    }
    return write(with_missing ? "wages.csv" : "wages_complete.csv", s.str());
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PrintConfigListsDefaults) {
  const CliRun r = run({"--print-config"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("seed=1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("alpha=0.05"), std::string::npos);
  EXPECT_NE(r.out.find("lasso-rule=\"1se\""), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"select", "--bogus"}).code, 2);
  EXPECT_EQ(run({"select", "--data", write("bad.csv", "y,a\n1,x\n"), "--out", (dir_ / "o").string()}).code, 2);
  const CliRun missing = run({"select", "--data", write("m.csv", "y,a\n1,2\n,3\n"), "--out", (dir_ / "o").string()});
  EXPECT_EQ(missing.code, 3);
  EXPECT_NE(missing.err.find("line 3"), std::string::npos);
  const CliRun unknown = run({"bench", "--method", "nope", "--out", (dir_ / "o").string()});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("mig-2"), std::string::npos);
  // 20 rows with 30 covariates: LDLS cannot run.
  std::ostringstream wide;
  wide << "y";
  for (int j = 0; j < 30; ++j) wide << ",x" << j;
  wide << '\n';
  for (int i = 0; i < 20; ++i) {
    wide << i;
    for (int j = 0; j < 30; ++j) wide << ',' << (i * 31 + j * 17) % 13;
    wide << '\n';
  }
  const CliRun infeasible = run({"select", "--method", "ldls", "--data", write("wide.csv", wide.str()), "--out", (dir_ / "o").string()});
  EXPECT_EQ(infeasible.code, 4);
}

TEST_F(CliTest, SelectOnWagesShapedData) {
  const fs::path out = dir_ / "sel";
  const CliRun r = run({"select", "--data", wages_like(), "--response", "wage", "--method", "mig", "--rule", "avg",
                     "--cv-folds", "4", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"selection.csv", "selection.txt", "trace.json", "config.ini"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto trace = nlohmann::json::parse(slurp(out / "trace.json"));
  EXPECT_EQ(trace["method"], "mig-2");
  EXPECT_LE(trace["selected"].size(), 3u);
  EXPECT_TRUE(trace["mig"].contains("steps"));
  EXPECT_NE(r.out.find("refit phi"), std::string::npos) << r.out;

  // The snapshot reproduces the run.
  const fs::path again = dir_ / "again";
  const CliRun r2 = run({"select", "--config", (out / "config.ini").string(), "--out", again.string()});
  ASSERT_EQ(r2.code, 0) << r2.err;
  EXPECT_EQ(slurp(out / "trace.json"), slurp(again / "trace.json"));
  EXPECT_EQ(slurp(out / "selection.csv"), slurp(again / "selection.csv"));
}

TEST_F(CliTest, LdlsAndMilsAgreeOnCompleteData) {
  const std::string data = wages_like(false);
  const CliRun a = run({"select", "--data", data, "--response", "wage", "--method", "ldls", "--out", (dir_ / "a").string()});
  const CliRun b = run({"select", "--data", data, "--response", "wage", "--method", "mils", "--out", (dir_ / "b").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto ja = nlohmann::json::parse(slurp(dir_ / "a" / "trace.json"));
  const auto jb = nlohmann::json::parse(slurp(dir_ / "b" / "trace.json"));
  EXPECT_EQ(ja["selected"].dump(), jb["selected"].dump());
}

TEST_F(CliTest, SimulateWritesFiles) {
  const fs::path out = dir_ / "sim";
  const CliRun r = run({"simulate", "--miss-pct", "0,0.01", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string none = slurp(out / "p35_rho0.20_miss0.000" / "train.csv");
  EXPECT_EQ(none.find(",,"), std::string::npos);
  EXPECT_EQ(none.find(",\n"), std::string::npos);
  const std::string some = slurp(out / "p35_rho0.20_miss0.010" / "train.csv");
  EXPECT_TRUE(some.find(",,") != std::string::npos || some.find(",\n") != std::string::npos);
  const fs::path out2 = dir_ / "sim2";
  ASSERT_EQ(run({"simulate", "--miss-pct", "0,0.01", "--out", out2.string()}).code, 0);
  EXPECT_EQ(some, slurp(out2 / "p35_rho0.20_miss0.010" / "train.csv"));
  // Written data reads back with the truth file alongside.
  std::ifstream in(out / "p35_rho0.20_miss0.010" / "train.csv");
  const mig::Dataset ds = mig::io::read_csv(in, "y");
  EXPECT_EQ(ds.p(), 35);
  EXPECT_GT(ds.missing_count(), 0);
  EXPECT_NE(slurp(out / "p35_rho0.20_miss0.010" / "truth.csv").find("X1,1"), std::string::npos);
}

TEST_F(CliTest, RefitRatios) {
  const std::string data = wages_like();
  const fs::path out = dir_ / "refit";
  const CliRun all = run({"refit", "--data", data, "--response", "wage", "--columns",
                       "edu,exper,age,union,hours,tenure,married,region,size", "--out", out.string()});
  ASSERT_EQ(all.code, 0) << all.err;
  EXPECT_NE(all.out.find("ratio: 1.000000"), std::string::npos) << all.out;
  const CliRun two = run({"refit", "--data", data, "--response", "wage", "--columns", "edu,exper", "--out", out.string()});
  ASSERT_EQ(two.code, 0) << two.err;
  EXPECT_EQ(two.out.find("nan"), std::string::npos);
  const CliRun none = run({"refit", "--data", wages_like(false), "--response", "wage", "--columns", "edu", "--out", out.string()});
  ASSERT_EQ(none.code, 0) << none.err;
  EXPECT_NE(none.out.find("phi: 0.000000"), std::string::npos);
  EXPECT_NE(none.out.find("ratio: NA"), std::string::npos);
  EXPECT_EQ(run({"refit", "--data", data, "--response", "wage", "--columns", "zzz", "--out", out.string()}).code, 2);
}

TEST_F(CliTest, BenchIsReproducibleAcrossJobs) {
  const std::vector<std::string> common{"bench", "--p", "12", "--n-train", "100", "--n-test", "50", "--replicates", "3",
                                        "--miss-pct", "0.03", "--method", "mils", "--method", "mig-2"};
  auto with = [&](const std::string& dir, const std::string& jobs) {
    auto a = common;
    a.insert(a.end(), {"--out", (dir_ / dir).string(), "--jobs", jobs});
    return run(a);
  };
  ASSERT_EQ(with("j1", "1").code, 0);
  ASSERT_EQ(with("j3", "3").code, 0);
  for (const char* f : {"report.csv", "report.txt", "complete_cases.csv"})
    EXPECT_EQ(slurp(dir_ / "j1" / f), slurp(dir_ / "j3" / f)) << f;
  const std::string csv = slurp(dir_ / "j1" / "report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("MCC_mean"), std::string::npos);
}
