#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "wglasso/io.hpp"
#include "wglasso_cli/app.hpp"
#include "wglasso_cli/run_config.hpp"

namespace wgl::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// shortest representation that parses back to the same double
std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("wglasso_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "wglasso");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::vector<std::string> small(std::vector<std::string> args) {
    for (const char* a : {"--electrodes", "16", "--inverse-positions", "60", "--true-positions", "60"}) {
      args.emplace_back(a);
    }
    return args;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST(RunConfigTest, DefaultsRoundTrip) {
  const RunConfig defaults;
  const auto back = run_config_from_json(to_json(defaults));
  EXPECT_EQ(to_json(back), to_json(defaults));
  EXPECT_FALSE(back.alpha.has_value());
}

TEST(RunConfigTest, SectionsApply) {
  const auto c = run_config_from_json(json::parse(R"({
    "seed": 7,
    "geometry": {"electrodes": 32, "inverse_positions": 100},
    "weighting": {"kind": "identity"},
    "solver": {"max_sweeps": 50},
    "morozov": {"tau": 1.1, "delta_mode": "estimated"},
    "experiment": {"trials": 3, "comparison": false},
    "solve": {"alpha": 0.25},
    "verify": {"seeds": 2}
  })"));
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.experiment.electrodes, 32);
  EXPECT_EQ(c.experiment.inverse_positions, 100);
  EXPECT_EQ(c.experiment.weighting, WeightingKind::kIdentity);
  EXPECT_EQ(c.experiment.solver.max_sweeps, 50);
  EXPECT_DOUBLE_EQ(c.experiment.morozov.tau, 1.1);
  EXPECT_EQ(c.experiment.delta_mode, DeltaMode::kEstimated);
  EXPECT_EQ(c.experiment.trials, 3);
  EXPECT_FALSE(c.experiment.comparison);
  EXPECT_EQ(c.alpha, 0.25);
  EXPECT_EQ(c.verify_seeds, 2);
  EXPECT_EQ(run_config_from_json(to_json(c)).alpha, 0.25);
}

TEST(RunConfigTest, StrictParsing) {
  for (const char* text : {R"({"sed": 1})", R"({"geometry": {"electrode": 64}})", R"({"solver": {"tol": 1}})",
                           R"({"geometry": {"electrodes": "many"}})", R"({"weighting": {"kind": "magic"}})",
                           R"([1, 2])"}) {
    EXPECT_THROW(run_config_from_json(json::parse(text)), ConfigError) << text;
  }
}

TEST(RunConfigTest, SemanticChecksRunAfterParsing) {
  for (const char* text : {R"({"geometry": {"electrodes": 3}})", R"({"morozov": {"tau": 0.5}})",
                           R"({"solve": {"alpha": -1}})", R"({"verify": {"seeds": 0}})"}) {
    const auto c = run_config_from_json(json::parse(text));
    EXPECT_THROW(c.validate(), ConfigError) << text;
  }
  EXPECT_NO_THROW(RunConfig{}.validate());
}

TEST(RunConfigTest, DefaultsAreDescribed) {
  const auto text = describe_defaults();
  for (const char* needle : {"electrodes", "max_sweeps", "tau", "noise_level", "seed"}) {
    EXPECT_NE(text.find(needle), std::string::npos) << needle;
  }
}

TEST_F(CliTest, HelpExitsZero) {
  EXPECT_EQ(invoke({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("generate"), std::string::npos);
  EXPECT_EQ(invoke({}), kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}), kExitUsage);
}

TEST_F(CliTest, BinaryHelp) {
  const std::string cmd = std::string("\"") + WGLASSO_CLI_PATH + "\" --help > \"" + (dir_ / "help.txt").string() + "\"";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_NE(slurp(dir_ / "help.txt").find("Exit codes"), std::string::npos);
}

TEST_F(CliTest, GenerateWritesFiveDeterministicFiles) {
  const std::vector<std::string> names{kGeometryFile, kInverseGridFile, kTrueGridFile, "lead_field.bin",
                                       "lead_field.json"};
  ASSERT_EQ(invoke(small({"generate", "--out", (dir_ / "a").string()})), kExitOk) << err_.str();
  ASSERT_EQ(invoke(small({"generate", "--out", (dir_ / "b").string()})), kExitOk) << err_.str();
  EXPECT_EQ(std::distance(fs::directory_iterator(dir_ / "a"), fs::directory_iterator{}), 5);
  for (const auto& n : names) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / n)) << n;
    EXPECT_EQ(slurp(dir_ / "a" / n), slurp(dir_ / "b" / n)) << n;
  }
  const auto lf = io::read_lead_field(dir_ / "a" / kLeadFieldStem);
  EXPECT_EQ(lf.rows(), 16);
  EXPECT_EQ(lf.entries.cols(), 180);
}

TEST_F(CliTest, GenerateRejectsTooFewElectrodes) {
  EXPECT_EQ(invoke({"generate", "--electrodes", "3", "--out", dir_.string()}), kExitUsage);
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, SolveFixedAndMorozov) {
  const auto data = (dir_ / "data").string();
  ASSERT_EQ(invoke(small({"generate", "--out", data})), kExitOk) << err_.str();

  ASSERT_EQ(invoke(small({"solve", "--data", data, "--out", (dir_ / "m.json").string(), "--weighting", "identity"})),
            kExitOk)
      << err_.str();
  const auto morozov = io::read_json(dir_ / "m.json");
  EXPECT_EQ(morozov.at("selection"), "morozov");
  EXPECT_TRUE(morozov.at("morozov").at("in_bracket").get<bool>());
  const double amax = morozov.at("alpha_max").get<double>();

  ASSERT_EQ(invoke(small({"solve", "--data", data, "--out", (dir_ / "f.json").string(), "--weighting", "identity",
                          "--alpha", fmt_double(amax)})),
            kExitOk)
      << err_.str();
  const auto fixed = io::read_json(dir_ / "f.json");
  EXPECT_EQ(fixed.at("selection"), "fixed");
  EXPECT_TRUE(fixed.at("dipoles").empty());
  for (const auto& v : fixed.at("result").at("x")) EXPECT_EQ(v.get<double>(), 0.0);

  ASSERT_EQ(invoke(small({"solve", "--data", data, "--out", (dir_ / "t.json").string()})), kExitOk) << err_.str();
  const auto truncated = io::read_json(dir_ / "t.json");
  EXPECT_NE(truncated.at("weighting"), morozov.at("weighting"));
  EXPECT_NE(truncated.at("result").at("x"), morozov.at("result").at("x"));
}

TEST_F(CliTest, SolveMissingData) {
  EXPECT_EQ(invoke({"solve", "--data", (dir_ / "nothing").string(), "--out", (dir_ / "x.json").string()}),
            kExitUsage);
}

TEST_F(CliTest, VerifyOneSeed) {
  const auto start = std::chrono::steady_clock::now();
  ASSERT_EQ(invoke({"verify", "--seeds", "1", "--out", (dir_ / "v.json").string()}), kExitOk) << err_.str();
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
  const auto report = io::read_json(dir_ / "v.json");
  int informational = 0;
  for (const auto& c : report.at("cases")) {
    if (c.at("informational").get<bool>()) {
      ++informational;
      EXPECT_EQ(c.at("verdict"), "not_applicable");
    } else {
      EXPECT_EQ(c.at("verdict"), "pass");
    }
  }
  EXPECT_EQ(informational, 2);
}

TEST_F(CliTest, ExperimentWritesOutputs) {
  const auto out = dir_ / "exp";
  ASSERT_EQ(invoke(small({"experiment", "--trials", "2", "--out", out.string()})), kExitOk) << err_.str();
  std::istringstream csv(slurp(out / kTrialsFile));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, io::kTrialCsvHeader);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
  const auto summary = io::read_json(out / kSummaryFile);
  EXPECT_EQ(summary.at("summary").size(), 2u);
  EXPECT_EQ(summary.at("run_config").at("seed"), 42);
}

TEST_F(CliTest, UnwritableOutputIsIoError) {
  fs::create_directories(dir_ / "ro");
  {
    std::ofstream blocker(dir_ / "ro" / "file");
  }
  EXPECT_EQ(invoke(small({"generate", "--out", (dir_ / "ro" / "file" / "sub").string()})), kExitIo);
}

TEST_F(CliTest, ProvenanceReproducesOutputs) {
  ASSERT_EQ(invoke(small({"generate", "--seed", "9", "--out", (dir_ / "a").string()})), kExitOk) << err_.str();
  const auto provenance = io::read_json(dir_ / "a" / kGeometryFile);
  EXPECT_EQ(provenance.at("seed"), 9);
  io::write_json(dir_ / "config.json", provenance.at("config"));
  ASSERT_EQ(invoke({"generate", "--config", (dir_ / "config.json").string(), "--out", (dir_ / "b").string()}),
            kExitOk)
      << err_.str();
  for (const char* n : {kGeometryFile, kInverseGridFile, kTrueGridFile, "lead_field.bin", "lead_field.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / n), slurp(dir_ / "b" / n)) << n;
  }
}

TEST_F(CliTest, UnknownConfigKeyIsUsageError) {
  io::write_text(dir_ / "bad.json", R"({"geometry": {"electrodez": 10}})");
  EXPECT_EQ(invoke({"generate", "--config", (dir_ / "bad.json").string(), "--out", dir_.string()}), kExitUsage);
}

}  // namespace
}  // namespace wgl::cli
