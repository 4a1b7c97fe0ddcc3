#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "qcal/errors.hpp"
#include "qcal/runner.hpp"

using namespace qcal;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qcal_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Runner, ConfigRoundTrip) {
  for (const auto& name : builtin_scenario_names()) {
    const auto c = builtin_scenario(name);
    const auto j = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(j)), j) << name;
  }
}

TEST(Runner, ConfigRejectsUnknownKeysAndBadValues) {
  auto j = config_to_json(builtin_scenario("fig2"));
  j["detector"]["etap"] = 0.5;
  EXPECT_THROW(config_from_json(j), ValidationError);
  j = config_to_json(builtin_scenario("fig2"));
  j["strategy"] = "magic";
  EXPECT_THROW(config_from_json(j), ValidationError);
  j = config_to_json(builtin_scenario("fig2"));
  j["state"]["xi"] = 1.0;
  EXPECT_THROW(config_from_json(j), ValidationError);
  EXPECT_THROW(builtin_scenario("nope"), ValidationError);
}

TEST(Runner, MissingKeysTakeDefaults) {
  const auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(config_to_json(c), config_to_json(ScenarioConfig{}));
}

TEST(Runner, LoadConfigFromFile) {
  const auto dir = scratch_dir("load");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"name": "custom", "samples": 1234, "state": {"xi": 0.5, "fock_cutoff": 30}})";
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.name, "custom");
  EXPECT_EQ(c.samples, 1234u);
  EXPECT_EQ(c.state.xi, 0.5);
  EXPECT_THROW(load_config(dir / "missing.json"), Error);
}

TEST(Property, EndToEndDeterminism) {
  auto c = builtin_scenario("qubit-sampled");
  c.samples = 20000;
  c.bootstrap_reps = 5;
  c.strategy = "both";
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  c.output_dir = a.string();
  c.workers = 1;
  run(c);
  c.output_dir = b.string();
  c.workers = 3;
  run(c);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_FALSE(slurp(a / "report.json").empty());
}

TEST(Runner, FaithfulnessGate) {
  for (const char* name : {"product-state", "vacuum-twin-beam"}) {
    auto c = builtin_scenario(name);
    c.samples = 1000;
    EXPECT_THROW(run(c), FaithfulnessError) << name;
  }
}

TEST(Runner, Fig2WritesPlotFiles) {
  auto c = builtin_scenario("fig2");
  c.samples = 20000;
  const auto dir = scratch_dir("fig2");
  c.output_dir = dir.string();
  const auto rep = run(c);
  EXPECT_TRUE(rep.invariants_hold());
  int csv = 0;
  for (const auto& e : fs::directory_iterator(dir / "plots")) csv += e.path().extension() == ".csv";
  EXPECT_EQ(csv, 8);
  const auto text = slurp(dir / "plots" / "averaging_k0.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "n,estimate,stderr,theory");
  EXPECT_TRUE(fs::exists(dir / "timing.json"));
  EXPECT_TRUE(fs::exists(dir / "config.json"));
}

TEST(Runner, EmptyReconstructionGivesNote) {
  RunReport r;
  r.report = {{"reconstructions", nlohmann::json::object()}};
  const auto out = emit_plot_data(r, scratch_dir("empty"));
  EXPECT_TRUE(out.files.empty());
  EXPECT_FALSE(out.note.empty());
}

TEST(Runner, OracleScenariosAreExact) {
  for (const char* name : {"qubit-oracle", "qutrit-oracle", "qubit-depolarized"}) {
    const auto rep = run(builtin_scenario(name));
    EXPECT_TRUE(rep.invariants_hold()) << name;
    EXPECT_LT(rep.report.at("reconstructions").at("averaging").at("max_abs_error").get<double>(), 1e-8) << name;
  }
}

TEST(Runner, InvariantsReported) {
  auto c = builtin_scenario("qubit-sampled");
  c.samples = 5000;
  c.bootstrap_reps = 0;
  c.strategy = "both";
  const auto rep = run(c);
  std::set<std::string> names;
  for (const auto& i : rep.invariants) names.insert(i.name);
  for (const char* n : {"ground_truth_povm", "quorum_spans", "ml_trace_monotone", "ml_completeness", "ml_positivity"})
    EXPECT_TRUE(names.count(n)) << n;
  EXPECT_TRUE(rep.invariants_hold());
  EXPECT_EQ(rep.report.at("reconstructions").size(), 2u);
}
