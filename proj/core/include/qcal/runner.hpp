#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qcal {

struct StateSpec {
  /// twin_beam | maximally_entangled | product
  std::string kind = "twin_beam";
  double xi = 0.88;
  int fock_cutoff = 60;
  int dim = 2;
};

struct DetectorSpec {
  /// photocounter | random
  std::string kind = "photocounter";
  double eta_p = 0.8;
  double nu = 1.0;
  int env_cutoff = 40;
  int outcomes = 3;
  std::uint64_t seed = 11;
};

struct QuorumSpec {
  /// homodyne | pauli | random_bases
  std::string kind = "homodyne";
  double eta_h = 0.9;
  int kernel_cutoff = 20;
  /// random_bases: number of random bases added to the computational one.
  int settings = 3;
  std::uint64_t seed = 5;
};

struct NoiseSpec {
  /// none | depolarizing
  std::string kind = "none";
  double p = 0.0;
  /// Use noise-corrected duals and probes in reconstruction.
  bool correct = true;
};

struct MlSpec {
  int fock_cutoff = 40;
  double min_ll_increase = 1e-8;
  int max_iters = 20000;
  bool accelerate = true;
};

struct DisplaySpec {
  int max_outcome = 7;
  int max_fock = 6;
};

struct ScenarioConfig {
  std::string name = "fig2";
  StateSpec state;
  DetectorSpec detector;
  QuorumSpec quorum;
  NoiseSpec noise;
  std::size_t samples = 200000;
  /// Feed exact outcome distributions to the estimators instead of samples.
  bool exact = false;
  /// averaging | ml | both
  std::string strategy = "averaging";
  int bootstrap_reps = 0;
  std::uint64_t seed = 1;
  MlSpec ml;
  DisplaySpec display;
  /// Empty: nothing is written.
  std::string output_dir;
  bool write_dataset = false;
  unsigned workers = 0;
  double svd_tolerance = 1e-10;
  /// Runs abort when the map condition number exceeds this.
  double max_condition = 1e12;
};

nlohmann::json config_to_json(const ScenarioConfig& config);
/// Missing keys take default values; unknown keys and invalid values throw ValidationError.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);
void validate_config(const ScenarioConfig& config);

std::vector<std::string> builtin_scenario_names();
/// Throws ValidationError for an unknown name.
ScenarioConfig builtin_scenario(const std::string& name);

struct InvariantCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  /// Deterministic content; byte-identical across runs with the same config.
  nlohmann::json report;
  /// Wall-clock seconds per stage; kept apart from `report`.
  nlohmann::json timing;
  std::vector<InvariantCheck> invariants;

  bool invariants_hold() const;
};

/// Faithfulness check, sampling (or exact distributions), reconstruction and
/// statistics. Throws FaithfulnessError when the state map is not invertible
/// on the reconstructed subspace. Writes artifacts when output_dir is set.
RunReport run(const ScenarioConfig& config);

struct PlotOutput {
  std::vector<std::filesystem::path> files;
  std::string note;
};

/// One CSV per displayed outcome and strategy, columns n,estimate,stderr,theory.
PlotOutput emit_plot_data(const RunReport& report, const std::filesystem::path& dir);

}  // namespace qcal
