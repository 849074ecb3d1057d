#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli_app.hpp"
#include "test_support.hpp"

using namespace oodselect;
using oodselect::testing::TempDir;
using nlohmann::json;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& p) { return json::parse(slurp(p)); }

// Small fixture shared by most tests.
class CliFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto r = run_cli({"synth", "--out", dir.path().string(), "--seed", "3", "--n-models", "60", "--aligned", "60",
                            "--inverted", "30", "--noise", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::string p(const std::string& name) const { return (dir / name).string(); }
  std::vector<std::string> data_args() const { return {"--correctness", p("correctness.csv"), "--models", p("models.csv")}; }

  TempDir dir{"cli"};
};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_F(CliFixture, SynthWritesFixtureFiles) {
  for (const char* f : {"correctness.csv", "models.csv", "examples.csv", "truth.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto truth = read_json(dir / "truth.json");
  EXPECT_EQ(truth["result"]["inverted"].size(), 30u);
  EXPECT_EQ(truth["command"], "synth");
}

TEST_F(CliFixture, FitWritesSelectionAndIsReproducible) {
  const auto args = cat({"fit", "--size", "30", "--steps", "300", "--restarts", "2", "--seed", "5", "--out", p("a")},
                        data_args());
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("S=30"), std::string::npos);
  auto first = read_json(dir / "a" / "selection_S30.json");
  EXPECT_EQ(first["result"]["subset"].size(), 30u);
  EXPECT_EQ(first["result"]["universe_size"], 100);
  EXPECT_EQ(first["seed"], 5);
  for (const char* split : {"train", "val", "test"}) EXPECT_TRUE(first["result"]["reports"][split].is_object());

  ASSERT_EQ(run_cli(args).code, 0);
  auto second = read_json(dir / "a" / "selection_S30.json");
  first.erase("timestamp");
  second.erase("timestamp");
  EXPECT_EQ(first.dump(), second.dump());
}

TEST_F(CliFixture, MissingInputNamesThePath) {
  const auto r = run_cli({"fit", "--size", "5", "--correctness", p("correctness.csv"), "--models", p("nope.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"fit", "--size", "5", "--models", p("models.csv")}).code, 2);
}

TEST_F(CliFixture, InvalidSizeIsAValidationError) {
  EXPECT_EQ(run_cli(cat({"fit", "--size", "101", "--out", p("x")}, data_args())).code, 2);
  EXPECT_EQ(run_cli(cat({"fit", "--size", "0", "--out", p("x")}, data_args())).code, 2);
}

TEST_F(CliFixture, ConfigPrecedenceFlagOverFileOverDefault) {
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# shared settings\nsteps = 40\nrestarts = 3\nlambda_max = 7\nsizes = 10,20\n";
  }
  const auto r = run_cli(cat({"fit", "--config", p("run.cfg"), "--size", "10", "--restarts", "1", "--out", p("c")},
                             data_args()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(dir / "c" / "selection_S10.json");
  const auto& opt = doc["result"]["optimizer"];
  EXPECT_EQ(opt["steps"], 40);        // file
  EXPECT_EQ(opt["restarts"], 1);      // flag
  EXPECT_EQ(opt["lambda_max"], 7.0);  // file
  EXPECT_EQ(opt["lr0"], OptimizerConfig{}.lr0);
  EXPECT_EQ(doc["config"]["steps"], "40");
  EXPECT_EQ(doc["config_file"], p("run.cfg"));
}

TEST_F(CliFixture, UnknownConfigKeyRejected) {
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "stepz = 40\n";
  }
  const auto r = run_cli(cat({"fit", "--config", p("bad.cfg"), "--size", "10", "--out", p("c")}, data_args()));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("stepz"), std::string::npos) << r.err;
}

TEST_F(CliFixture, SweepCsvHasOneRowPerSizeMethodSplit) {
  const auto r = run_cli(cat({"sweep", "--sizes", "10,30,60", "--steps", "200", "--restarts", "1", "--out", p("s")},
                             data_args()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("recommended_S="), std::string::npos);
  const auto csv = slurp(dir / "s" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 * 3 * 3);
  EXPECT_EQ(csv.find("distance"), std::string::npos);
  const auto doc = read_json(dir / "s" / "sweep.json");
  EXPECT_EQ(doc["result"]["entries"].size(), 3u);
  EXPECT_TRUE(doc["result"]["recommendation"].contains("S"));
}

TEST_F(CliFixture, SweepRejectsDecreasingSizes) {
  EXPECT_EQ(run_cli(cat({"sweep", "--sizes", "30,10", "--out", p("s")}, data_args())).code, 2);
}

TEST_F(CliFixture, ConsistencyOfNestedSelections) {
  const auto ids = load_correctness(p("correctness.csv")).example_ids();
  auto write_sel = [&](const std::string& name, std::size_t n) {
    json j = {{"result", {{"S", n}, {"universe_size", ids.size()},
                          {"subset", std::vector<std::string>(ids.begin(), ids.begin() + static_cast<long>(n))}}}};
    std::ofstream(dir / name) << j.dump();
    return p(name);
  };
  const auto a = write_sel("a.json", 10), b = write_sel("b.json", 20), c = write_sel("c.json", 40);
  auto r = run_cli({"consistency", "--selections", a + "," + b + "," + c, "--out", p("k")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("normalized_jaccard=1.0000"), std::string::npos) << r.out;
  EXPECT_EQ(read_json(dir / "k" / "consistency.json")["result"]["normalized"], 1.0);

  r = run_cli({"consistency", "--selections", c + "," + a, "--out", p("k")});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliFixture, PrevalenceOfFullSelectionHasNoShift) {
  const auto ids = load_correctness(p("correctness.csv")).example_ids();
  std::ofstream(dir / "all.json") << json{{"subset", ids}}.dump();
  const auto r = run_cli({"prevalence", "--examples", p("examples.csv"), "--selection", p("all.json"), "--resamples",
                          "200", "--out", p("v")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(dir / "v" / "prevalence.json");
  ASSERT_TRUE(doc["result"].contains("pool"));
  for (const auto& row : doc["result"]["pool"]) EXPECT_EQ(row["delta"], 0.0);
}

TEST_F(CliFixture, StabilityRuns) {
  const auto r = run_cli(cat({"stability", "--orderings", "4", "--out", p("t")}, data_args()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("stable_model_count="), std::string::npos);
  EXPECT_EQ(read_json(dir / "t" / "stability.json")["result"]["n_models"], 60);
}

TEST(Cli, TheoryReportsAllProbes) {
  TempDir dir("theory");
  const auto r = run_cli({"theory", "--trials", "40", "--decay-sizes", "16,32,64", "--witness-trials", "20000",
                          "--lipschitz-pairs", "20", "--out", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json(dir / "theory.json");
  EXPECT_TRUE(doc["result"].contains("new_model"));
  EXPECT_TRUE(doc["result"].contains("new_example"));
  EXPECT_TRUE(doc["result"].contains("witness"));
  EXPECT_TRUE(doc["result"].contains("lipschitz"));
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"fit", "--bogus", "1"}).code, 2);
  EXPECT_EQ(run_cli({"fit", "--metric", "kendall"}).code, 2);
  const auto help = run_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("sweep"), std::string::npos);
}
