#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "cartanlab/lab/experiments.hpp"
#include "cartanlab/lab/report.hpp"

using namespace cartanlab;
using namespace cartanlab::lab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cartanlab-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p.string();
}

int exit_code(const std::string& args) {
  std::string cmd = std::string(CARTANLAB_EXE) + " " + args + " > /dev/null 2>&1";
  int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

ExperimentConfig smoke() {
  auto c = apply_config(default_config(), parse_json(read_text_file(CARTANLAB_CONFIGS "/smoke.json"), "smoke.json"));
  validate(c);
  return c;
}

}  // namespace

TEST(Config, PresetMatrices) {
  auto c = preset("cubic-2cos-pi-9");
  ASSERT_EQ(c.generators.size(), 2u);
  EXPECT_EQ(c.generators[0], (IntMatrix{{0, 1, 0}, {0, 0, 1}, {1, 3, 0}}));
  EXPECT_EQ(c.generators[1], (IntMatrix{{-2, 0, 1}, {1, 1, 0}, {0, 1, 1}}));
  EXPECT_EQ(c.epsilon, 0.05);
}

TEST(Config, UnknownPresetListsKnownOnes) {
  try {
    preset("nope");
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
    EXPECT_NE(std::string(e.what()).find("cubic-2cos-pi-9"), std::string::npos);
  }
}

TEST(Config, JsonRoundTrip) {
  auto c = default_config();
  c.seed = 42;
  auto again = apply_config(default_config(), to_json(c));
  EXPECT_EQ(dump_json(to_json(again)), dump_json(to_json(c)));
}

TEST(Config, RejectsUnknownKeys) {
  for (const char* doc : {R"({"bogus": 1})", R"({"solver": {"grd": 8}})", R"({"analysis": {"steps": -5}})",
                          R"({"perturbation": {"family": "other"}})", R"({"solver": {"interpolation": "quintic"}})"}) {
    try {
      apply_config(default_config(), parse_json(doc, "inline"));
      FAIL() << doc;
    } catch (const LabError& e) {
      EXPECT_EQ(e.code(), ErrorCode::Config) << doc;
    }
  }
}

TEST(Config, ValidationCatchesShapeErrors) {
  auto c = default_config();
  c.generators.pop_back();
  EXPECT_THROW(validate(c), LabError);
  auto d = default_config();
  d.solver.generator = 3;
  EXPECT_THROW(validate(d), LabError);
}

TEST(Config, SeedRequiredForStochasticRuns) {
  auto c = default_config();
  c.seed.reset();
  try {
    run("lyapunov", c);
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}

TEST(Config, FlagsOverrideFile) {
  auto dir = scratch("flags");
  auto path = write_file(dir / "c.json", R"({"seed": 3, "out": "from-file"})");
  auto c = load_config(path, Overrides{std::uint64_t{9}, std::string("from-flag")});
  EXPECT_EQ(*c.seed, 9u);
  EXPECT_EQ(c.out, "from-flag");
  auto d = load_config(path, Overrides{});
  EXPECT_EQ(*d.seed, 3u);
  EXPECT_EQ(d.out, "from-file");
}

TEST(Artifacts, CsvFormatting) {
  CsvWriter w({"a", "b"});
  w.row_strings({fmt(0.1), fmt(-2.0)});
  EXPECT_EQ(w.str(), "a,b\n0.10000000000000001,-2\n");
  auto rows = read_csv(w.str());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(std::stod(rows[1][0]), 0.1);
}

TEST(Lab, WeylReportsSixChambers) {
  auto r = run("weyl", default_config());
  EXPECT_TRUE(r.ok());
  auto j = parse_json(r.artifacts.files().at("chambers.json"), "chambers.json");
  EXPECT_EQ(j["count"], 6);
  EXPECT_EQ(j["chambers"].size(), 6u);
}

TEST(Lab, SmokeVerifyPassesAndIsDeterministic) {
  auto c = smoke();
  auto a = run("verify", c);
  for (const auto& ch : a.checks) EXPECT_TRUE(ch.pass) << ch.line();
  EXPECT_EQ(a.checks.size(), 10u);
  for (const char* f : {"run.json", "exponents.csv", "chart.csv", "chambers.json", "semiconj.bin", "semiconj.json"})
    EXPECT_TRUE(a.artifacts.contains(f)) << f;
  auto b = run("verify", c);
  EXPECT_TRUE(a.artifacts == b.artifacts);
  // exponents.csv header and row count: 3 elements x 3 functionals
  auto rows = read_csv(a.artifacts.files().at("exponents.csv"));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"m1", "m2", "i", "estimate", "stderr", "linear_value"}));
}

TEST(Lab, LinearCaseVerifiesExactly) {
  auto c = smoke();
  c.epsilon = 0.0;
  auto r = run("verify", c);
  for (const auto& ch : r.checks) EXPECT_TRUE(ch.pass) << ch.line();
}

TEST(Lab, SeedChangesStochasticArtifactsOnly) {
  auto c = smoke();
  c.analysis.determinism_check = false;
  auto a = run("lyapunov", c);
  c.seed = *c.seed + 1;
  auto b = run("lyapunov", c);
  EXPECT_NE(a.artifacts.files().at("exponents.csv"), b.artifacts.files().at("exponents.csv"));
}

TEST(Lab, SingleMapLyapunovIsDiagnosticOnly) {
  auto c = smoke();
  c.family = "single-map";
  auto r = run("lyapunov", c);
  EXPECT_TRUE(r.checks.empty());
  EXPECT_TRUE(r.artifacts.contains("exponents.csv"));
  EXPECT_THROW(run("verify", c), LabError);
}

TEST(Report, RequiresRunJson) {
  auto dir = scratch("report-empty");
  try {
    render_report(dir.string());
    FAIL();
  } catch (const LabError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Report, TabulatesArtifactsStably) {
  auto c = smoke();
  c.analysis.determinism_check = false;
  auto r = run("lyapunov", c);
  auto dir = scratch("report");
  r.artifacts.write(dir.string());
  std::string a = render_report(dir.string());
  EXPECT_NE(a.find("exponents (estimated vs linear)"), std::string::npos);
  EXPECT_NE(a.find("(1,1)"), std::string::npos);
  EXPECT_EQ(render_report(dir.string()), a);
}

TEST(Cli, ExitCodes) {
  auto dir = scratch("cli");
  auto bad_key = write_file(dir / "bad.json", R"({"preset": "cubic-2cos-pi-9", "colour": 1})");
  auto not_json = write_file(dir / "broken.json", "{ nope");
  auto no_seed = write_file(dir / "noseed.json", R"({"preset": "cubic-2cos-pi-9"})");
  auto bad_tol = write_file(dir / "tight.json",
                            R"({"preset": "cubic-2cos-pi-9", "solver": {"grid": 8, "tol": 1e-12, "max_iterations": 40}})");
  const std::string out = " --out " + (dir / "o").string();
  EXPECT_EQ(exit_code("weyl --config " + bad_key + out), 2);
  EXPECT_EQ(exit_code("weyl --config " + not_json + out), 2);
  EXPECT_EQ(exit_code("weyl --config " + (dir / "missing.json").string() + out), 2);
  EXPECT_EQ(exit_code("weyl" + out), 2);
  EXPECT_EQ(exit_code("frobnicate --config " + no_seed), 2);
  EXPECT_EQ(exit_code("lyapunov --config " + no_seed + out), 2);
  EXPECT_EQ(exit_code("report " + (dir / "empty").string()), 2);
  EXPECT_EQ(exit_code("weyl --config " + no_seed + out), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "chambers.json"));
  EXPECT_EQ(exit_code("report " + (dir / "o").string()), 0);
  // solver cannot reach the tolerance: numerical failure
  EXPECT_EQ(exit_code("semiconj --config " + bad_tol + out), 1);
}
