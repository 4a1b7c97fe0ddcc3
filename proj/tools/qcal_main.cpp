#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qcal/errors.hpp"
#include "qcal/quorum.hpp"
#include "qcal/runner.hpp"

namespace {

// Exit codes: 1 usage or runtime error, 2 invariant violation, 3 non-faithful state.
constexpr int kInvariantViolation = 2;
constexpr int kNotFaithful = 3;

qcal::ScenarioConfig resolve(const std::string& spec) {
  if (std::filesystem::exists(spec)) return qcal::load_config(spec);
  return qcal::builtin_scenario(spec);
}

void print_summary(const qcal::RunReport& r) {
  const auto& rep = r.report;
  std::cout << "scenario " << rep.at("scenario").get<std::string>() << "\n";
  const auto& f = rep.at("faithfulness");
  std::cout << "  map rank " << f.at("rank") << " of " << f.at("dimension") << ", condition number "
            << f.at("condition_number") << "\n";
  for (const auto& [key, body] : rep.at("reconstructions").items()) {
    int with_z = 0, within3 = 0;
    for (const auto& e : body.at("entries")) {
      if (e.at("z").is_null()) continue;
      ++with_z;
      if (std::abs(e.at("z").get<double>()) <= 3.0) ++within3;
    }
    std::cout << "  " << key << ": max |error| " << body.at("max_abs_error").get<double>();
    if (with_z > 0) std::cout << ", " << within3 << "/" << with_z << " entries within 3 stderr";
    std::cout << " (" << body.at("stderr_source").get<std::string>() << " error bars)\n";
  }
  for (const auto& c : r.invariants) {
    if (!c.passed) std::cout << "  invariant violated: " << c.name << " (" << c.detail << ")\n";
  }
  std::cout << "  total " << r.timing.at("total").get<double>() << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibration of a measuring apparatus by tomography of conditioned states"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario given as a config file or builtin name");
  std::string spec, output;
  long long samples = -1;
  long long seed = -1;
  int reps = -1;
  run->add_option("config", spec, "Config file (JSON) or builtin scenario name")->required();
  run->add_option("-o,--output", output, "Output directory (overrides the config)");
  run->add_option("-n,--samples", samples, "Number of joint records (overrides the config)");
  run->add_option("-s,--seed", seed, "Master seed (overrides the config)");
  run->add_option("-b,--bootstrap", reps, "Bootstrap repetitions (overrides the config)");

  auto* defaults = app.add_subcommand("print-defaults", "Print a complete config with every default");
  std::string defaults_name = "fig2";
  defaults->add_option("scenario", defaults_name, "Builtin scenario to print");

  auto* list = app.add_subcommand("list-scenarios", "List builtin scenarios");

  auto* kernels = app.add_subcommand("export-kernels", "Write diagonal estimation kernels as CSV");
  double eta = 0.9;
  int cutoff = 20;
  std::string kernel_out;
  kernels->add_option("--eta", eta, "Homodyne efficiency eta_h");
  kernels->add_option("--cutoff", cutoff, "Fock cutoff of the kernels");
  kernels->add_option("-o,--output", kernel_out, "CSV file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& n : qcal::builtin_scenario_names()) std::cout << n << "\n";
      return 0;
    }
    if (*defaults) {
      std::cout << qcal::config_to_json(qcal::builtin_scenario(defaults_name)).dump(2) << "\n";
      return 0;
    }
    if (*kernels) {
      const auto hq = qcal::make_homodyne_quorum(eta, cutoff);
      if (kernel_out.empty()) {
        qcal::write_kernel_csv(hq.kernels, std::cout);
      } else {
        std::ofstream f(kernel_out);
        qcal::write_kernel_csv(hq.kernels, f);
      }
      std::cerr << "kernel residual " << hq.kernels.residual << "\n";
      return 0;
    }
    qcal::ScenarioConfig config = resolve(spec);
    if (!output.empty()) config.output_dir = output;
    if (samples >= 0) config.samples = static_cast<std::size_t>(samples);
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (reps >= 0) config.bootstrap_reps = reps;
    const qcal::RunReport report = qcal::run(config);
    print_summary(report);
    return report.invariants_hold() ? 0 : kInvariantViolation;
  } catch (const qcal::FaithfulnessError& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kNotFaithful;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
