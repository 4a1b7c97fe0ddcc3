#include "qcal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "qcal/errors.hpp"
#include "qcal/parallel.hpp"
#include "qcal/random.hpp"

namespace qcal {

Dataset resample(const Dataset& data, std::uint64_t seed) {
  Dataset out;
  out.kind = data.kind;
  out.seed = seed;
  out.scenario_id = data.scenario_id;
  out.parameters = data.parameters;
  out.records.reserve(data.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < data.size(); ++i) out.records.push_back(data.records[rng.below(data.size())]);
  out.recount(data.counts_by_n.size());
  return out;
}

BootstrapReport bootstrap(const Dataset& data, const Estimator& estimator, int n_reps,
                          std::uint64_t seed, unsigned workers) {
  if (n_reps < 2) throw ValidationError("bootstrap: need at least 2 repetitions");
  if (data.size() == 0) throw ValidationError("bootstrap: empty dataset");
  const RealVector reference = estimator(data);

  std::vector<std::optional<RealVector>> results(static_cast<std::size_t>(n_reps));
  std::vector<std::string> errors(static_cast<std::size_t>(n_reps));
  parallel_for(results.size(), workers, [&](std::size_t r) {
    try {
      RealVector v = estimator(resample(data, derive_seed(seed, r)));
      if (v.size() != reference.size()) {
        errors[r] = "estimate length changed";
      } else if (!v.allFinite()) {
        errors[r] = "non-finite estimate";
      } else {
        results[r] = std::move(v);
      }
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  });

  BootstrapReport rep;
  rep.n_repetitions = n_reps;
  rep.seed = seed;
  rep.mean = RealVector::Zero(reference.size());
  RealVector sq = RealVector::Zero(reference.size());
  int ok = 0;
  for (std::size_t r = 0; r < results.size(); ++r) {
    if (!results[r]) {
      ++rep.failures;
      rep.failure_messages.push_back("repetition " + std::to_string(r) + ": " + errors[r]);
      continue;
    }
    ++ok;
    rep.mean += *results[r];
  }
  if (rep.failures * 5 > n_reps || ok < 2) {
    throw BootstrapError("bootstrap: " + std::to_string(rep.failures) + " of " +
                         std::to_string(n_reps) + " repetitions failed");
  }
  rep.mean /= ok;
  for (const auto& r : results) {
    if (r) sq += (*r - rep.mean).cwiseAbs2();
  }
  rep.stddev = (sq / (ok - 1)).cwiseSqrt();
  return rep;
}

nlohmann::json bootstrap_to_json(const BootstrapReport& report) {
  return {{"n_repetitions", report.n_repetitions},
          {"seed", report.seed},
          {"failures", report.failures},
          {"failure_messages", report.failure_messages},
          {"mean", std::vector<double>(report.mean.begin(), report.mean.end())},
          {"stddev", std::vector<double>(report.stddev.begin(), report.stddev.end())}};
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

MseComparison compare_mse(const EntryTable& a, const EntryTable& b, const EntryTable& truth,
                          const std::vector<EntryKey>& entry_set) {
  MseComparison out;
  for (const auto& key : entry_set) {
    const auto ia = a.find(key), ib = b.find(key), it = truth.find(key);
    if (ia == a.end() || ib == b.end() || it == truth.end()) {
      out.missing.push_back(key);
      continue;
    }
    out.entries.push_back(key);
    out.squared_error_a.push_back(std::pow(ia->second - it->second, 2));
    out.squared_error_b.push_back(std::pow(ib->second - it->second, 2));
  }
  out.median_a = median(out.squared_error_a);
  out.median_b = median(out.squared_error_b);
  return out;
}

}  // namespace qcal
