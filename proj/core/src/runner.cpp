#include "qcal/runner.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "qcal/detectors.hpp"
#include "qcal/errors.hpp"
#include "qcal/quorum.hpp"
#include "qcal/random.hpp"
#include "qcal/recon_avg.hpp"
#include "qcal/recon_ml.hpp"
#include "qcal/sampler.hpp"
#include "qcal/states.hpp"
#include "qcal/stats.hpp"

namespace qcal {

using nlohmann::json;

namespace {

// Reads `key` into `field` when present and marks it as consumed.
template <class T>
void read(const json& j, const char* key, T& field, std::set<std::string>& seen) {
  seen.insert(key);
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!seen.contains(key)) throw ValidationError("config: unknown key '" + where + key + "'");
  }
}

template <class Fn>
void section(const json& j, const char* key, std::set<std::string>& seen, Fn&& fn) {
  seen.insert(key);
  if (!j.contains(key)) return;
  std::set<std::string> inner;
  fn(j.at(key), inner);
  reject_unknown(j.at(key), inner, std::string(key) + ".");
}

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Entry value or null when not finite.
json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start).count();
    start = now;
    return s;
  }
};

json report_json(const PovmReport& r) {
  return {{"max_antihermitian_deviation", r.max_antihermitian_deviation},
          {"min_eigenvalue", r.min_eigenvalue},
          {"completeness_deviation", r.completeness_deviation}};
}

// Shared between strategies: one estimate vector layout per scenario.
struct Layout {
  bool diagonal = true;
  int n_outcomes = 0;
  int max_fock = 0;
  Index dim = 0;

  Index size() const {
    return diagonal ? static_cast<Index>(n_outcomes) * (max_fock + 1)
                    : static_cast<Index>(n_outcomes) * dim * dim * 2;
  }
  Index diag_index(int k, int n) const { return static_cast<Index>(k) * (max_fock + 1) + n; }
  Index op_index(int k, Index r, Index c, int part) const {
    return ((static_cast<Index>(k) * dim + r) * dim + c) * 2 + part;
  }
};

RealVector pack_diagonal(const Layout& L, const std::function<std::optional<double>(int, int)>& value) {
  RealVector v = RealVector::Zero(L.size());
  for (int k = 0; k < L.n_outcomes; ++k) {
    for (int n = 0; n <= L.max_fock; ++n) v(L.diag_index(k, n)) = value(k, n).value_or(0.0);
  }
  return v;
}

RealVector pack_operators(const Layout& L, const std::vector<int>& outcomes,
                          const std::vector<ComplexOperator>& elements) {
  RealVector v = RealVector::Zero(L.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const int k = outcomes[i];
    if (k < 0 || k >= L.n_outcomes) continue;
    for (Index r = 0; r < L.dim; ++r) {
      for (Index c = 0; c < L.dim; ++c) {
        v(L.op_index(k, r, c, 0)) = elements[i](r, c).real();
        v(L.op_index(k, r, c, 1)) = elements[i](r, c).imag();
      }
    }
  }
  return v;
}

// Reconstruction entries against the truth, with z-scores where an error bar exists.
json entries_json(const Layout& L, const RealVector& estimate, const std::optional<RealVector>& stderr,
                  const RealVector& truth, const std::vector<char>& observed) {
  json out = json::array();
  auto z = [&](Index i) -> json {
    if (!stderr || !((*stderr)(i) > 0.0)) return nullptr;
    return (estimate(i) - truth(i)) / (*stderr)(i);
  };
  if (L.diagonal) {
    for (int k = 0; k < L.n_outcomes; ++k) {
      for (int n = 0; n <= L.max_fock; ++n) {
        const Index i = L.diag_index(k, n);
        out.push_back({{"outcome", k},
                       {"n", n},
                       {"observed", static_cast<bool>(observed[static_cast<std::size_t>(k)])},
                       {"estimate", estimate(i)},
                       {"stderr", stderr ? json((*stderr)(i)) : json(nullptr)},
                       {"theory", truth(i)},
                       {"z", z(i)}});
      }
    }
    return out;
  }
  for (int k = 0; k < L.n_outcomes; ++k) {
    for (Index r = 0; r < L.dim; ++r) {
      for (Index c = 0; c < L.dim; ++c) {
        const Index re = L.op_index(k, r, c, 0), im = L.op_index(k, r, c, 1);
        out.push_back({{"outcome", k},
                       {"row", r},
                       {"col", c},
                       {"observed", static_cast<bool>(observed[static_cast<std::size_t>(k)])},
                       {"estimate", estimate(re)},
                       {"estimate_im", estimate(im)},
                       {"stderr", stderr ? json((*stderr)(re)) : json(nullptr)},
                       {"stderr_im", stderr ? json((*stderr)(im)) : json(nullptr)},
                       {"theory", truth(re)},
                       {"theory_im", truth(im)},
                       {"z", z(re)},
                       {"z_im", z(im)}});
      }
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

}  // namespace

bool RunReport::invariants_hold() const {
  for (const auto& c : invariants) {
    if (!c.passed) return false;
  }
  return true;
}

json config_to_json(const ScenarioConfig& c) {
  return {
      {"name", c.name},
      {"state", {{"kind", c.state.kind}, {"xi", c.state.xi}, {"fock_cutoff", c.state.fock_cutoff}, {"dim", c.state.dim}}},
      {"detector",
       {{"kind", c.detector.kind},
        {"eta_p", c.detector.eta_p},
        {"nu", c.detector.nu},
        {"env_cutoff", c.detector.env_cutoff},
        {"outcomes", c.detector.outcomes},
        {"seed", c.detector.seed}}},
      {"quorum",
       {{"kind", c.quorum.kind},
        {"eta_h", c.quorum.eta_h},
        {"kernel_cutoff", c.quorum.kernel_cutoff},
        {"settings", c.quorum.settings},
        {"seed", c.quorum.seed}}},
      {"noise", {{"kind", c.noise.kind}, {"p", c.noise.p}, {"correct", c.noise.correct}}},
      {"samples", c.samples},
      {"exact", c.exact},
      {"strategy", c.strategy},
      {"bootstrap_reps", c.bootstrap_reps},
      {"seed", c.seed},
      {"ml",
       {{"fock_cutoff", c.ml.fock_cutoff},
        {"min_ll_increase", c.ml.min_ll_increase},
        {"max_iters", c.ml.max_iters},
        {"accelerate", c.ml.accelerate}}},
      {"display", {{"max_outcome", c.display.max_outcome}, {"max_fock", c.display.max_fock}}},
      {"output_dir", c.output_dir},
      {"write_dataset", c.write_dataset},
      {"workers", c.workers},
      {"svd_tolerance", c.svd_tolerance},
      {"max_condition", c.max_condition},
  };
}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  std::set<std::string> seen;
  read(j, "name", c.name, seen);
  section(j, "state", seen, [&](const json& s, std::set<std::string>& k) {
    read(s, "kind", c.state.kind, k);
    read(s, "xi", c.state.xi, k);
    read(s, "fock_cutoff", c.state.fock_cutoff, k);
    read(s, "dim", c.state.dim, k);
  });
  section(j, "detector", seen, [&](const json& s, std::set<std::string>& k) {
    read(s, "kind", c.detector.kind, k);
    read(s, "eta_p", c.detector.eta_p, k);
    read(s, "nu", c.detector.nu, k);
    read(s, "env_cutoff", c.detector.env_cutoff, k);
    read(s, "outcomes", c.detector.outcomes, k);
    read(s, "seed", c.detector.seed, k);
  });
  section(j, "quorum", seen, [&](const json& s, std::set<std::string>& k) {
    read(s, "kind", c.quorum.kind, k);
    read(s, "eta_h", c.quorum.eta_h, k);
    read(s, "kernel_cutoff", c.quorum.kernel_cutoff, k);
    read(s, "settings", c.quorum.settings, k);
    read(s, "seed", c.quorum.seed, k);
  });
  section(j, "noise", seen, [&](const json& s, std::set<std::string>& k) {
    read(s, "kind", c.noise.kind, k);
    read(s, "p", c.noise.p, k);
    read(s, "correct", c.noise.correct, k);
  });
  read(j, "samples", c.samples, seen);
  read(j, "exact", c.exact, seen);
  read(j, "strategy", c.strategy, seen);
  read(j, "bootstrap_reps", c.bootstrap_reps, seen);
  read(j, "seed", c.seed, seen);
  section(j, "ml", seen, [&](const json& s, std::set<std::string>& k) {
    read(s, "fock_cutoff", c.ml.fock_cutoff, k);
    read(s, "min_ll_increase", c.ml.min_ll_increase, k);
    read(s, "max_iters", c.ml.max_iters, k);
    read(s, "accelerate", c.ml.accelerate, k);
  });
  section(j, "display", seen, [&](const json& s, std::set<std::string>& k) {
    read(s, "max_outcome", c.display.max_outcome, k);
    read(s, "max_fock", c.display.max_fock, k);
  });
  read(j, "output_dir", c.output_dir, seen);
  read(j, "write_dataset", c.write_dataset, seen);
  read(j, "workers", c.workers, seen);
  read(j, "svd_tolerance", c.svd_tolerance, seen);
  read(j, "max_condition", c.max_condition, seen);
  reject_unknown(j, seen, "");
  validate_config(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const ScenarioConfig& c) {
  auto fail = [](const std::string& m) { throw ValidationError("config: " + m); };
  const bool cv = c.state.kind == "twin_beam";
  if (cv) {
    if (c.quorum.kind != "homodyne") fail("twin_beam states are read by the homodyne quorum");
    if (c.detector.kind != "photocounter") fail("twin_beam scenarios need a photocounter detector");
    if (!(c.state.xi >= 0.0 && c.state.xi < 1.0)) fail("state.xi must lie in [0, 1)");
    if (c.state.fock_cutoff < 1) fail("state.fock_cutoff must be positive");
    if (!(c.quorum.eta_h > 0.5 && c.quorum.eta_h <= 1.0)) fail("quorum.eta_h must lie in (1/2, 1]");
    if (c.quorum.kernel_cutoff < 0 || c.quorum.kernel_cutoff > c.state.fock_cutoff)
      fail("quorum.kernel_cutoff must lie in [0, state.fock_cutoff]");
    if (c.noise.kind != "none") fail("tomographer noise is supported for finite quorums only");
    if (c.exact && (c.strategy != "averaging")) fail("exact mode with a homodyne quorum supports averaging only");
  } else if (c.state.kind == "maximally_entangled" || c.state.kind == "product") {
    if (c.quorum.kind != "pauli" && c.quorum.kind != "random_bases") fail("unknown finite quorum kind");
    if (c.quorum.kind == "pauli" && c.state.dim != 2) fail("the pauli quorum needs dim 2");
    if (c.state.dim < 2) fail("state.dim must be at least 2");
    if (c.detector.kind == "random" && c.detector.outcomes < 1) fail("detector.outcomes must be positive");
    if (c.detector.kind != "random" && c.detector.kind != "photocounter") fail("unknown detector kind");
    if (c.quorum.kind == "random_bases" && c.quorum.settings < 0) fail("quorum.settings must be nonnegative");
    if (c.noise.kind != "none" && c.noise.kind != "depolarizing") fail("unknown noise kind");
    if (c.noise.kind == "depolarizing" && !(c.noise.p >= 0.0 && c.noise.p < 1.0)) fail("noise.p must lie in [0, 1)");
  } else {
    fail("unknown state kind '" + c.state.kind + "'");
  }
  if (c.detector.kind == "photocounter") {
    if (!(c.detector.eta_p > 0.0 && c.detector.eta_p <= 1.0)) fail("detector.eta_p must lie in (0, 1]");
    if (!(c.detector.nu >= 0.0)) fail("detector.nu must be nonnegative");
    if (c.detector.env_cutoff < 0) fail("detector.env_cutoff must be nonnegative");
  }
  if (c.strategy != "averaging" && c.strategy != "ml" && c.strategy != "both") fail("unknown strategy");
  if (!c.exact && c.samples == 0) fail("samples must be positive unless exact is set");
  if (c.bootstrap_reps == 1 || c.bootstrap_reps < 0) fail("bootstrap_reps must be 0 or at least 2");
  if (c.exact && c.bootstrap_reps > 0) fail("bootstrap needs sampled data");
  if (c.display.max_outcome < 0 || c.display.max_fock < 0) fail("display ranges must be nonnegative");
  if (cv && c.display.max_fock > c.quorum.kernel_cutoff) fail("display.max_fock exceeds the kernel cutoff");
  if (cv && (c.strategy != "averaging") && c.display.max_fock > c.ml.fock_cutoff) fail("display.max_fock exceeds ml.fock_cutoff");
  if (c.ml.max_iters < 1 || !(c.ml.min_ll_increase > 0.0)) fail("ml stopping rule must be positive");
  if (!(c.svd_tolerance > 0.0) || !(c.max_condition > 1.0)) fail("bad faithfulness tolerances");
}

std::vector<std::string> builtin_scenario_names() {
  return {"fig2", "fig4", "qubit-oracle", "qutrit-oracle", "qubit-sampled", "qubit-depolarized",
          "product-state", "vacuum-twin-beam"};
}

ScenarioConfig builtin_scenario(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  if (name == "fig2") return c;
  if (name == "fig4") {
    c.samples = 50000;
    c.strategy = "ml";
    c.bootstrap_reps = 50;
    c.seed = 4;
    return c;
  }
  ScenarioConfig f;
  f.name = name;
  f.state = {"maximally_entangled", 0.0, 0, 2};
  f.detector = {"random", 0.8, 1.0, 40, 3, 11};
  f.quorum = {"pauli", 0.9, 20, 3, 5};
  f.display = {2, 1};
  f.samples = 100000;
  if (name == "qubit-oracle") {
    f.exact = true;
    f.samples = 0;
    return f;
  }
  if (name == "qutrit-oracle") {
    f.state.dim = 3;
    f.detector.outcomes = 4;
    f.quorum.kind = "random_bases";
    f.exact = true;
    f.samples = 0;
    return f;
  }
  if (name == "qubit-sampled") {
    f.bootstrap_reps = 50;
    f.seed = 2;
    return f;
  }
  if (name == "qubit-depolarized") {
    f.noise = {"depolarizing", 0.2, true};
    f.exact = true;
    f.samples = 0;
    return f;
  }
  if (name == "product-state") {
    f.state.kind = "product";
    return f;
  }
  if (name == "vacuum-twin-beam") {
    c.state.xi = 0.0;
    return c;
  }
  throw ValidationError("unknown scenario '" + name + "'");
}

RunReport run(const ScenarioConfig& config) {
  validate_config(config);
  Clock clock, total;
  RunReport out;
  json& rep = out.report;
  json& timing = out.timing;
  rep["scenario"] = config.name;
  rep["config"] = config_to_json(config);
  // Execution settings do not change results.
  rep["config"].erase("output_dir");
  rep["config"].erase("workers");
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    out.invariants.push_back({name, ok, detail});
  };

  const bool cv = config.state.kind == "twin_beam";
  const bool want_avg = config.strategy != "ml";
  const bool want_ml = config.strategy != "averaging";
  const MlOptions mlo{config.ml.min_ll_increase, config.ml.max_iters, config.ml.accelerate, config.workers};

  // Scenario objects; the estimators below refer to them.
  std::optional<TwinBeam> beam;
  std::optional<DiagonalMapR> diag_map;
  std::optional<HomodyneQuorum> hq;
  BipartiteState state;
  std::optional<MapR> map;
  std::optional<FiniteQuorum> quorum;
  DualSet duals;
  std::optional<NoiseMap> noise;
  const NoiseMap* correction = nullptr;
  Povm truth;

  Layout layout;
  layout.diagonal = cv;
  std::vector<char> observed;
  auto mark_observed = [&](const std::vector<double>& mass) {
    observed.assign(static_cast<std::size_t>(layout.n_outcomes), 0);
    for (int k = 0; k < layout.n_outcomes && k < static_cast<int>(mass.size()); ++k) {
      observed[static_cast<std::size_t>(k)] = mass[static_cast<std::size_t>(k)] > 0.0;
    }
  };

  // Faithfulness gate (step i analogue).
  Index gate_dim;
  Index gate_rank;
  double gate_condition;
  double gate_tol;
  if (cv) {
    beam = twin_beam(config.state.xi, config.state.fock_cutoff);
    diag_map = build_diagonal_map_R(*beam, config.svd_tolerance);
    gate_dim = diag_map->weights.size();
    gate_rank = diag_map->rank;
    gate_condition = diag_map->condition_number;
    gate_tol = diag_map->svd_tolerance;
  } else {
    const Index d = config.state.dim;
    if (config.state.kind == "maximally_entangled") {
      state = maximally_entangled(static_cast<int>(d));
    } else {
      const ComplexOperator mixed = ComplexOperator::Identity(d, d) / static_cast<double>(d);
      state = product_state(mixed, mixed);
    }
    map = build_map_R(state, config.svd_tolerance);
    gate_dim = d * d;
    gate_rank = map->rank;
    gate_condition = map->condition_number;
    gate_tol = map->svd_tolerance;
  }
  const bool faithful = gate_rank == gate_dim && gate_condition <= config.max_condition;
  rep["faithfulness"] = {{"subspace", cv ? "photon-number diagonal" : "full operator space"},
                         {"dimension", gate_dim},
                         {"rank", gate_rank},
                         {"condition_number", num_or_null(gate_condition)},
                         {"svd_tolerance", gate_tol},
                         {"faithful", faithful}};
  if (!faithful) {
    throw FaithfulnessError("state map is not invertible on the reconstructed subspace: rank " +
                                std::to_string(gate_rank) + " of " + std::to_string(gate_dim) +
                                ", condition number " + number(gate_condition),
                            gate_condition);
  }

  if (cv) {
    rep["state"] = {{"kind", "twin_beam"},
                    {"truncation_deficit", beam->truncation_deficit},
                    {"mean_photon_number", beam->mean_photon_number()}};
    truth = noisy_photocounter(config.detector.eta_p, config.detector.nu, config.state.fock_cutoff,
                               config.detector.env_cutoff);
    layout.n_outcomes = std::min<int>(config.display.max_outcome + 1, static_cast<int>(truth.size()));
    layout.max_fock = config.display.max_fock;
    hq = make_homodyne_quorum(config.quorum.eta_h, config.quorum.kernel_cutoff);
    rep["kernels"] = {{"fock_cutoff", hq->fock_cutoff},
                      {"eta_h", hq->eta_h},
                      {"smear_sigma2", hq->smear_sigma2},
                      {"residual", hq->kernels.residual},
                      {"ridge", hq->kernels.ridge}};
    check("kernel_residual", hq->kernels.residual < 1e-4, "unbiasedness residual " + number(hq->kernels.residual));
  } else {
    const Index d = config.state.dim;
    rep["state"] = {{"kind", config.state.kind}, {"dim", d}};
    truth = config.detector.kind == "random"
                ? random_povm(d, config.detector.outcomes, config.detector.seed)
                : noisy_photocounter(config.detector.eta_p, config.detector.nu, static_cast<int>(d) - 1,
                                     config.detector.env_cutoff);
    layout.n_outcomes = static_cast<int>(truth.size());
    layout.dim = d;
    quorum = config.quorum.kind == "pauli" ? pauli_quorum()
                                           : random_basis_quorum(d, config.quorum.settings, config.quorum.seed);
    duals = compute_dual_set(*quorum);
    if (config.noise.kind == "depolarizing") {
      noise = noise_map_from_superoperator(depolarizing_superoperator(d, config.noise.p));
      rep["noise"] = {{"kind", "depolarizing"},
                      {"p", config.noise.p},
                      {"condition_number", noise->condition_number},
                      {"corrected", config.noise.correct}};
      if (config.noise.correct) correction = &*noise;
    }
    rep["quorum"] = {{"kind", config.quorum.kind}, {"settings", quorum->num_settings()}, {"spans", quorum->span_check}};
    check("quorum_spans", quorum->span_check, "eigenprojectors span the operator space");
  }
  const PovmReport truth_report = check_povm(truth);
  rep["ground_truth"] = {{"outcomes", truth.size()}, {"povm_report", report_json(truth_report)}};
  check("ground_truth_povm", truth_report.satisfied(), "constraints of the simulated detector");
  RealVector truth_vec;
  if (cv) {
    const RealMatrix td = truth.diagonals();
    truth_vec = pack_diagonal(layout, [&](int k, int n) { return td(k, n); });
  } else {
    std::vector<int> labels(truth.size());
    std::iota(labels.begin(), labels.end(), 0);
    truth_vec = pack_operators(layout, labels, truth.elements);
  }
  timing["setup"] = clock.lap();

  // Estimators: value vector plus analytic error bars where the strategy has them.
  struct Estimate {
    RealVector value;
    std::optional<RealVector> stderr;
    json extra = json::object();
  };
  const std::size_t n_truth = truth.size();
  auto averaging_from_table = [&](const FrequencyTable& table) {
    const PovmEstimate pe = recover_povm(estimate_conditioned_finite(table, *quorum, duals, correction), *map);
    Estimate e;
    e.value = pack_operators(layout, pe.outcomes, pe.elements);
    RealVector se = RealVector::Zero(layout.size());
    for (std::size_t i = 0; i < pe.outcomes.size(); ++i) {
      for (Index r = 0; r < layout.dim; ++r) {
        for (Index c = 0; c < layout.dim; ++c) {
          se(layout.op_index(pe.outcomes[i], r, c, 0)) = pe.stderr_re[i](r, c);
          se(layout.op_index(pe.outcomes[i], r, c, 1)) = pe.stderr_im[i](r, c);
        }
      }
    }
    e.stderr = se;
    e.extra = {{"kind", "operator"}, {"povm_report", report_json(pe.report)}};
    return e;
  };
  auto averaging_from_conditioned = [&](const ConditionedEstimates& est) {
    const DiagonalPovmEstimate pe = recover_povm_diagonal(est, *diag_map);
    auto pack = [&](const RealMatrix& m) {
      return pack_diagonal(layout, [&](int k, int n) -> std::optional<double> {
        const Index r = pe.row_of(k);
        if (r < 0) return std::nullopt;
        return m(r, n);
      });
    };
    Estimate e;
    e.value = pack(pe.value);
    e.stderr = pack(pe.stderr);
    e.extra = {{"kind", "diagonal"},
               {"clipped", est.clipped},
               {"clipped_fraction", est.clipped_fraction},
               {"warnings", est.warnings},
               {"unobserved", est.unobserved},
               {"completeness_deviation", pe.completeness_deviation}};
    return e;
  };
  auto averaging = [&](const Dataset& d) {
    return cv ? averaging_from_conditioned(estimate_conditioned_homodyne(d, *hq, config.workers))
              : averaging_from_table(tabulate(d, n_truth, *quorum));
  };
  auto ml_pack = [&](const MlResult& r) {
    if (cv) {
      return pack_diagonal(layout, [&](int k, int n) -> std::optional<double> {
        const Index row = r.row_of(k);
        if (row < 0) return std::nullopt;
        return r.diagonals(row, n);
      });
    }
    std::vector<int> outs(r.outcomes.begin(), r.outcomes.end() - 1);
    std::vector<ComplexOperator> els(r.povm.elements.begin(), r.povm.elements.end() - 1);
    return pack_operators(layout, outs, els);
  };
  auto ml_from_table = [&](const FrequencyTable& table) {
    return maximize(build_problem_finite(table, state, *quorum, correction), mlo);
  };
  auto ml_fit = [&](const Dataset& d) {
    return cv ? maximize(build_problem_diagonal(d, *beam, *hq, config.ml.fock_cutoff), mlo)
              : ml_from_table(tabulate(d, n_truth, *quorum));
  };
  auto record = [&](const std::string& key, Estimate e, const MlResult* ml) {
    e.extra["max_abs_error"] = (e.value - truth_vec).cwiseAbs().maxCoeff();
    e.extra["stderr_source"] = e.stderr ? (config.exact ? "exact" : "analytic") : "none";
    check(key + "_finite", e.value.allFinite(), "all reconstructed entries finite");
    if (ml != nullptr) {
      e.extra["result"] = ml_result_to_json(*ml);
      check("ml_trace_monotone", ml->trace_monotone(), "log-likelihood nondecreasing");
      check("ml_completeness", ml->completeness_deviation <= 1e-6, number(ml->completeness_deviation));
      check("ml_positivity", ml->min_eigenvalue >= -1e-8, number(ml->min_eigenvalue));
    }
    return e;
  };

  std::map<std::string, Estimate> results;
  std::optional<MlResult> ml_result;
  Dataset data;
  if (config.exact) {
    std::vector<double> mass(n_truth, 0.0);
    if (cv) {
      const ConditionedEstimates est = exact_conditioned_homodyne(*beam, truth, *hq);
      for (const auto& e : est.estimates) mass[static_cast<std::size_t>(e.outcome)] = e.weight;
      mark_observed(mass);
      rep["dataset"] = {{"exact", true}, {"records", 0}};
      timing["sampling"] = clock.lap();
      results["averaging"] = record("averaging", averaging_from_conditioned(est), nullptr);
      timing["averaging"] = clock.lap();
    } else {
      const FrequencyTable table = exact_frequencies(exact_finite_table(state, truth, *quorum, noise ? &*noise : nullptr));
      for (const auto& w : table.weight) {
        for (Index n = 0; n < w.rows(); ++n) mass[static_cast<std::size_t>(n)] += w.row(n).sum();
      }
      mark_observed(mass);
      rep["dataset"] = {{"exact", true}, {"records", 0}};
      timing["sampling"] = clock.lap();
      if (want_avg) {
        results["averaging"] = record("averaging", averaging_from_table(table), nullptr);
        timing["averaging"] = clock.lap();
      }
      if (want_ml) {
        ml_result = ml_from_table(table);
        results["ml"] = record("ml", {ml_pack(*ml_result), std::nullopt, {{"kind", "operator"}}}, &*ml_result);
        timing["ml"] = clock.lap();
      }
    }
  } else {
    data = cv ? sample_homodyne_twinbeam(*beam, truth, *hq, config.samples, config.seed, {config.workers})
              : sample_finite(state, truth, *quorum, config.samples, config.seed, noise ? &*noise : nullptr,
                              {config.workers});
    data.scenario_id = config.name;
    data.recount(n_truth);
    mark_observed(std::vector<double>(data.counts_by_n.begin(), data.counts_by_n.end()));
    rep["dataset"] = {{"exact", false},
                      {"records", data.size()},
                      {"seed", data.seed},
                      {"counts_by_n", data.counts_by_n}};
    if (!config.output_dir.empty() && config.write_dataset) {
      std::filesystem::create_directories(config.output_dir);
      save_dataset(data, std::filesystem::path(config.output_dir) / "dataset");
    }
    timing["sampling"] = clock.lap();
    if (want_avg) {
      results["averaging"] = record("averaging", averaging(data), nullptr);
      timing["averaging"] = clock.lap();
    }
    if (want_ml) {
      ml_result = ml_fit(data);
      results["ml"] = record("ml", {ml_pack(*ml_result), std::nullopt, {{"kind", cv ? "diagonal" : "operator"}}},
                             &*ml_result);
      timing["ml"] = clock.lap();
    }
    if (config.bootstrap_reps > 0) {
      std::uint64_t stream = 100;
      for (auto& [key, e] : results) {
        const Estimator est = key == "ml" ? Estimator([&](const Dataset& d) { return ml_pack(ml_fit(d)); })
                                          : Estimator([&](const Dataset& d) { return averaging(d).value; });
        const BootstrapReport b =
            bootstrap(data, est, config.bootstrap_reps, derive_seed(config.seed, ++stream), config.workers);
        e.extra["bootstrap"] = {{"n_repetitions", b.n_repetitions},
                                {"seed", b.seed},
                                {"failures", b.failures},
                                {"failure_messages", b.failure_messages}};
        if (e.stderr) e.extra["analytic_stderr"] = std::vector<double>(e.stderr->begin(), e.stderr->end());
        e.stderr = b.stddev;
        e.extra["stderr_source"] = "bootstrap";
        timing["bootstrap_" + key] = clock.lap();
      }
    }
  }

  json recon = json::object();
  for (auto& [key, e] : results) {
    e.extra["entries"] = entries_json(layout, e.value, e.stderr, truth_vec, observed);
    recon[key] = std::move(e.extra);
  }
  rep["reconstructions"] = std::move(recon);
  json inv = json::array();
  for (const auto& c : out.invariants) inv.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  rep["invariants"] = inv;
  rep["invariants_hold"] = out.invariants_hold();
  timing["total"] = total.lap();

  if (!config.output_dir.empty()) {
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", rep.dump(2) + "\n");
    write_text(dir / "timing.json", timing.dump(2) + "\n");
    write_text(dir / "config.json", config_to_json(config).dump(2) + "\n");
    emit_plot_data(out, dir / "plots");
  }
  return out;
}

PlotOutput emit_plot_data(const RunReport& report, const std::filesystem::path& dir) {
  PlotOutput out;
  const json& recon = report.report.value("reconstructions", json::object());
  for (const auto& [strategy, body] : recon.items()) {
    std::map<int, std::string> rows;
    for (const auto& e : body.at("entries")) {
      int n;
      if (e.contains("n")) {
        n = e.at("n").get<int>();
      } else {
        if (e.at("row") != e.at("col")) continue;
        n = e.at("row").get<int>();
      }
      auto field = [&](const char* k) { return e.at(k).is_null() ? std::string() : number(e.at(k).get<double>()); };
      rows[e.at("outcome").get<int>()] += std::to_string(n) + "," + field("estimate") + "," + field("stderr") + "," +
                                          field("theory") + "\n";
    }
    for (const auto& [k, text] : rows) {
      std::filesystem::create_directories(dir);
      const auto path = dir / (strategy + "_k" + std::to_string(k) + ".csv");
      write_text(path, "n,estimate,stderr,theory\n" + text);
      out.files.push_back(path);
    }
  }
  if (out.files.empty()) out.note = "no reconstructed outcomes; no plot files written";
  return out;
}

}  // namespace qcal
