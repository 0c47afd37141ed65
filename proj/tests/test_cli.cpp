#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "popproto/cli.hpp"

using namespace popproto;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ppcli");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run_cli(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string src(const std::string& rel) { return std::string(POPPROTO_SOURCE_DIR) + "/" + rel; }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "popproto_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Simulate, WritesHeaderAndOneRowPerTrial) {
  Outcome o = invoke({"simulate", "--builtin", "majority", "--input", "x1=30,x2=20", "--trials", "4", "--seed", "7"});
  ASSERT_EQ(o.code, 0) << o.err;
  auto ls = lines(o.out);
  ASSERT_EQ(ls.size(), 5u);
  EXPECT_EQ(ls[0], cli::kCsvHeader);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    auto cols = cli::split(ls[i], ',');
    ASSERT_EQ(cols.size(), 10u) << ls[i];
    EXPECT_EQ(cols[0], "majority");
    EXPECT_EQ(cols[1], "50");
    EXPECT_EQ(cols[2], "x1=30;x2=20");
    EXPECT_EQ(cols[5], std::to_string(i - 1));
    EXPECT_EQ(cols[8], "1");
  }
}

TEST(Simulate, SameSeedSameRows) {
  std::vector<std::string> args{"simulate", "--builtin", "halve_fast", "--m", "500", "--a", "5",
                                "--trials", "3", "--seed", "99", "--no-header"};
  Outcome a = invoke(args), b = invoke(args);
  args.push_back("--workers");
  args.push_back("1");
  Outcome c = invoke(args);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  EXPECT_EQ(lines(a.out).size(), 3u);
}

TEST(Simulate, ParallelTimeIsInteractionsOverN) {
  Outcome o = invoke({"simulate", "--compile-nlinear", "2", "--m", "40", "--trials", "2", "--seed", "1", "--no-header"});
  ASSERT_EQ(o.code, 0) << o.err;
  for (const auto& l : lines(o.out)) {
    auto cols = cli::split(l, ',');
    double n = std::stod(cols[1]), inter = std::stod(cols[6]), t = std::stod(cols[7]);
    EXPECT_NEAR(t, inter / n, 1e-6);
    EXPECT_EQ(cols[8], "80");
    EXPECT_EQ(cols[9], "stop_condition");
  }
}

TEST(Simulate, UsageErrors) {
  EXPECT_EQ(invoke({"simulate", "--protocol", src("protocols/missing.pp"), "--m", "3"}).code, 2);
  EXPECT_EQ(invoke({"simulate", "--builtin", "double"}).code, 2);
  EXPECT_EQ(invoke({"simulate", "--builtin", "nope", "--m", "3"}).code, 2);
  EXPECT_EQ(invoke({"simulate", "--builtin", "double", "--m", "3", "--engine", "warp"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
}

TEST(Verify, PassAndFailExitCodes) {
  Outcome ok = invoke({"verify", "--builtin", "majority", "--max-total", "5"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  auto j = nlohmann::json::parse(ok.out);
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_EQ(j["protocol"], "majority");

  Outcome bad = invoke({"verify", "--protocol", src("protocols/double.pp"), "--linear", "3", "--max-total", "4", "--q0", "5"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(nlohmann::json::parse(bad.out)["pass"].get<bool>());

  Outcome good = invoke({"verify", "--protocol", src("protocols/double.pp"), "--linear", "2", "--max-total", "4", "--q0", "5"});
  EXPECT_EQ(good.code, 0) << good.out;
  EXPECT_EQ(invoke({"verify", "--protocol", src("protocols/double.pp")}).code, 2);
}

TEST(Verify, CompiledApproximatorWithA) {
  Outcome o = invoke({"verify", "--compile-qlinear", "1/2", "--max-total", "5", "--a-max", "2"});
  EXPECT_EQ(o.code, 0) << o.out;
}

TEST(Surgery, WorkedExampleElimination) {
  Outcome o = invoke({"surgery", "--protocol", src("protocols/example_p.pp"), "--delta", "d1,d2,d3", "--eliminate",
                   "5,1,2"});
  ASSERT_EQ(o.code, 0) << o.err;
  auto j = nlohmann::json::parse(o.out);
  EXPECT_EQ(j["elimination"]["e"], (nlohmann::json{{"d3", 5}, {"g1", 14}}));
  EXPECT_EQ(j["elimination"]["z_executed"], (nlohmann::json{{"g1", 27}}));
  EXPECT_TRUE(j["elimination"]["matches"].get<bool>());
}

TEST(Surgery, EmptyDeltaAndFailures) {
  for (std::string empty : {"", "∅"}) {
    Outcome o = invoke({"surgery", "--protocol", src("protocols/example_p.pp"), "--delta", empty});
    EXPECT_EQ(o.code, 0);
    EXPECT_EQ(nlohmann::json::parse(o.out), (nlohmann::json{{"delta", nlohmann::json::array()},
                                                            {"rules", nlohmann::json::array()}}));
  }
  Outcome no = invoke({"surgery", "--protocol", src("protocols/not_orderable.pp"), "--delta", "x,y"});
  EXPECT_EQ(no.code, 3);
  EXPECT_EQ(nlohmann::json::parse(no.out)["error"], "NotOrderable");

  Outcome stall = invoke({"surgery", "--protocol", src("protocols/example_p.pp"), "--delta", "d1,d2,d3", "--produce",
                       "0,0,5", "--host-origin", "d1=10,d2=10,d3=10,g1=10,g2=10", "--host-steps",
                       "1*7,2*16,3*17,5*16,4*2", "--b1", "3", "--buffer", "0"});
  EXPECT_EQ(stall.code, 3);
  EXPECT_EQ(nlohmann::json::parse(stall.out)["error"], "InvalidEdit");
  EXPECT_EQ(invoke({"surgery", "--protocol", src("protocols/example_p.pp"), "--delta", "d9"}).code, 2);
}

TEST(Experiment, SweepWritesRowsToFile) {
  auto cfg = scratch("sweep.json"), csv = scratch("sweep.csv");
  std::ofstream(cfg) << R"({"seed": 3, "trials": 2,
    "sweeps": [{"builtin": "halve_fast", "n": [110, 220], "a_divisor": 11},
               {"compile_nlinear": "1,1", "inputs": ["3,4"]}]})";
  Outcome o = invoke({"experiment", cfg.string(), "--out", csv.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  std::ifstream f(csv);
  std::stringstream ss;
  ss << f.rdbuf();
  auto ls = lines(ss.str());
  ASSERT_EQ(ls.size(), 1u + 2 * 2 + 2);
  EXPECT_EQ(ls[0], cli::kCsvHeader);
  auto first = cli::split(ls[1], ',');
  EXPECT_EQ(first[1], "110");
  EXPECT_EQ(first[3], "10");
  EXPECT_EQ(cli::split(ls.back(), ',')[8], "7");
}

TEST(Experiment, EmptySweepIsHeaderOnly) {
  auto cfg = scratch("empty.json");
  std::ofstream(cfg) << R"({"sweeps": []})";
  Outcome o = invoke({"experiment", cfg.string()});
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(lines(o.out), std::vector<std::string>{cli::kCsvHeader});
  std::ofstream(scratch("broken.json")) << "{";
  EXPECT_EQ(invoke({"experiment", scratch("broken.json").string()}).code, 2);
}

TEST(Binary, ExitCodeReachesShell) {
  std::string cmd = std::string(PPCLI_PATH) + " surgery --protocol " + src("protocols/not_orderable.pp") +
                    " --delta x,y > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 3);
}
