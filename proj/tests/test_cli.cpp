#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using dyncred::cli::run;

namespace {

struct Result {
  int rc;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int rc = run(std::move(args), out, err);
  return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dyncred_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string sample(const std::string& name) { return std::string(DYNCRED_SAMPLES_DIR) + "/" + name; }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, FactorsCase2a) {
  const auto r = call({"factors", "-c", sample("factors_poisson_case2a.json"), "-o", path("f.json")});
  ASSERT_EQ(r.rc, 0) << r.err;
  for (const char* v : {"6.172", "13.578", "31.847", "75.594", "179.815"}) EXPECT_NE(r.out.find(v), std::string::npos) << v;
  EXPECT_NE(r.out.find("isotonic: yes"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("f.json")));
  EXPECT_TRUE(j["isotonic"].get<bool>());
  EXPECT_TRUE(j["warnings"].empty());
}

TEST_F(CliTest, FactorsRhoZero) {
  const auto r = call({"factors", "-c", sample("factors_rho0.json"), "-o", path("f.json")});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("f.json")));
  for (const auto& a : j["alpha_star"]) EXPECT_EQ(a.get<double>(), 0.0);
  EXPECT_TRUE(j["isotonic"].get<bool>());
}

TEST_F(CliTest, FactorsArmaNotRegular) {
  const auto r = call({"factors", "-c", sample("factors_arma.json"), "-o", path("f.json")});
  ASSERT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("regular: no"), std::string::npos);
  EXPECT_NE(r.err.find("warning: factors are not regular"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("f.json")));
  EXPECT_FALSE(j["warnings"].empty());
}

TEST_F(CliTest, FactorsConfigErrors) {
  const auto unknown = write("a.json", R"({"model": {"variant": "dynamic_ar1", "sigma2": 1, "rho": 0.5}, "T": 3, "bogus": 1})");
  EXPECT_EQ(call({"factors", "-c", unknown}).rc, 2);
  const auto variant = write("b.json", R"({"model": {"variant": "nope"}, "T": 3})");
  EXPECT_EQ(call({"factors", "-c", variant}).rc, 2);
  const auto rho = write("c.json", R"({"model": {"variant": "dynamic_ar1", "sigma2": 1, "rho": 1.5}, "T": 3})");
  const auto bad_rho = call({"factors", "-c", rho});
  EXPECT_EQ(bad_rho.rc, 2);
  EXPECT_NE(bad_rho.err.find("model.rho"), std::string::npos);
  const auto bad_json = write("d.json", "{");
  EXPECT_EQ(call({"factors", "-c", bad_json}).rc, 2);
  EXPECT_EQ(call({"factors", "-c", path("missing.json")}).rc, 3);
  EXPECT_EQ(call({"factors"}).rc, 2);
  EXPECT_EQ(call({}).rc, 2);
}

TEST_F(CliTest, Tables) {
  const auto r = call({"tables", "poisson-std", "arma-remark", "-d", path("tables")});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_NE(slurp(path("tables/poisson-std.csv")).find("45.860,32.102,8.530,1.658,0.291"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("tables/arma-remark.csv")));
  const auto all = call({"tables", "all"});
  EXPECT_EQ(all.rc, 0);
  EXPECT_NE(all.out.find("# gamma-both"), std::string::npos);
  const auto bad = call({"tables", "no-such-table"});
  EXPECT_EQ(bad.rc, 2);
  EXPECT_NE(bad.err.find("error:"), std::string::npos);
}

TEST_F(CliTest, SimulateReproducible) {
  const auto a = call({"simulate", "-c", sample("simulate_default.json"), "-o", path("a.csv")});
  const auto b = call({"simulate", "-c", sample("simulate_default.json"), "-o", path("b.csv")});
  ASSERT_EQ(a.rc, 0) << a.err;
  ASSERT_EQ(b.rc, 0);
  const std::string pa = slurp(path("a.csv"));
  EXPECT_EQ(pa, slurp(path("b.csv")));
  EXPECT_EQ(std::count(pa.begin(), pa.end(), '\n'), 1 + 500 * 6);
  const auto meta = nlohmann::json::parse(slurp(path("a.csv.meta.json")));
  EXPECT_EQ(meta["rng_algorithm"], std::string(dyncred::rng_algorithm));
  EXPECT_EQ(meta["seed"], 20240601);
  const auto c = call({"simulate", "-c", sample("simulate_default.json"), "-o", path("c.csv"), "-s", "5"});
  ASSERT_EQ(c.rc, 0);
  EXPECT_NE(slurp(path("c.csv")), pa);
}

TEST_F(CliTest, SimulateSinglePolicyToStdout) {
  const auto cfg = write("s.json", R"({"n_policies": 1, "T": 3, "state": {"family": "bgar1", "sigma2": 1, "rho": 0.5}})");
  const auto r = call({"simulate", "-c", cfg, "-o", "-"});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 5);
}

TEST_F(CliTest, SeedFromEnvironment) {
  const auto cfg = write("s.json", R"({"n_policies": 3, "T": 2})");
  ::setenv("DYNCRED_SEED", "77", 1);
  const auto a = call({"simulate", "-c", cfg, "-o", path("a.csv")});
  ::unsetenv("DYNCRED_SEED");
  ASSERT_EQ(a.rc, 0) << a.err;
  EXPECT_EQ(nlohmann::json::parse(slurp(path("a.csv.meta.json")))["seed"], 77);
  const auto b = call({"simulate", "-c", cfg, "-o", path("b.csv")});
  EXPECT_EQ(nlohmann::json::parse(slurp(path("b.csv.meta.json")))["seed"], 1);
}

TEST_F(CliTest, EvaluateTrueOnly) {
  const auto cfg = write("e.json", R"({
    "simulate": {"n_policies": 100, "T": 5, "state": {"family": "bgar1", "sigma2": 1, "rho": 0.6}},
    "methods": ["TRUE"], "n_holdout_copies": 10, "seed": 3})");
  const auto r = call({"evaluate", "-c", cfg, "-o", path("out")});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto s = nlohmann::json::parse(slurp(path("out/summary.json")));
  EXPECT_EQ(s["methods"]["TRUE"]["relative_rmse_pct"].get<double>(), 100.0);
  EXPECT_EQ(s["methods"]["TRUE"]["relative_mae_pct"].get<double>(), 100.0);
  EXPECT_TRUE(fs::exists(path("out/premiums.csv")));
  EXPECT_TRUE(fs::exists(path("out/table.txt")));
}

TEST_F(CliTest, EvaluateFromPanelFile) {
  ASSERT_EQ(call({"simulate", "-c", sample("simulate_default.json"), "-o", path("panel.csv")}).rc, 0);
  const auto cfg = write("e.json", R"({"panel": "unused.csv", "methods": ["NAIVE", "PROPOSED", "TRUE"],
                                       "n_holdout_copies": 5})");
  const auto r = call({"evaluate", "-c", cfg, "-p", path("panel.csv"), "-o", path("out")});
  ASSERT_EQ(r.rc, 0) << r.err;
  const std::string rows = slurp(path("out/premiums.csv"));
  EXPECT_EQ(rows.substr(0, rows.find('\n')), "policy_id,method,predicted");
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 1 + 500 * 3);
  const auto again = call({"evaluate", "-c", cfg, "-p", path("panel.csv"), "-o", path("out2")});
  EXPECT_EQ(slurp(path("out/premiums.csv")), slurp(path("out2/premiums.csv")));
  EXPECT_EQ(slurp(path("out/summary.json")), slurp(path("out2/summary.json")));
}

TEST_F(CliTest, EvaluateMissingPanelIsIoError) {
  const auto cfg = write("e.json", R"({"panel": "does-not-exist.csv"})");
  EXPECT_EQ(call({"evaluate", "-c", cfg, "-o", path("out")}).rc, 3);
}

TEST_F(CliTest, FitRecoversCoefficients) {
  ASSERT_EQ(call({"simulate", "-c", sample("simulate_default.json"), "-o", path("panel.csv")}).rc, 0);
  const auto cfg = write("f.json", R"({"panel": "x", "covariates": true, "exclude_last_period": true})");
  const auto r = call({"fit", "-c", cfg, "-p", path("panel.csv"), "-o", path("fit.json")});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("fit.json")));
  const auto& c = j["glm"]["coefficients"];
  EXPECT_NEAR(c[0]["estimate"].get<double>(), -3.0, 3 * c[0]["std_err"].get<double>());
  EXPECT_NEAR(c[1]["estimate"].get<double>(), 2.0, 3 * c[1]["std_err"].get<double>());
  EXPECT_TRUE(j.contains("moments"));
  EXPECT_TRUE(j.contains("warnings"));
}

TEST_F(CliTest, FitSinglePeriodPanelFails) {
  const auto panel = write("p.csv", "policy_id,period,lambda,y,true_r\nA,1,1,0,\nB,1,1,2,\nC,1,1,1,\n");
  const auto cfg = write("f.json", R"({"panel": "x", "covariates": false})");
  const auto r = call({"fit", "-c", cfg, "-p", panel, "-o", path("fit.json")});
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("DegenerateDenominator"), std::string::npos) << r.err;
}

TEST(CliBinary, RunsAsProcess) {
  const std::string cmd = std::string(DYNCRED_CLI_PATH) + " tables arma-remark > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string(DYNCRED_CLI_PATH) + " tables bogus 2> /dev/null";
  const int status = std::system(bad.c_str());
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
