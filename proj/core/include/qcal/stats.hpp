#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcal/qmath.hpp"
#include "qcal/sampler.hpp"

namespace qcal {

/// Maps a dataset to a fixed-length vector of estimated entries. It may throw;
/// a throw or a length change counts as a failed repetition.
using Estimator = std::function<RealVector(const Dataset&)>;

struct BootstrapReport {
  int n_repetitions = 0;
  std::uint64_t seed = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  RealVector mean;
  /// Per-entry sample standard deviation over successful repetitions.
  RealVector stddev;
};

/// Resamples whole records with replacement to the original size, reruns the
/// estimator and reports per-entry spread. Repetition r draws from the stream
/// derive_seed(seed, r), so the report is deterministic per seed. Throws
/// ValidationError for n_reps < 2 and BootstrapError when more than 20% of the
/// repetitions fail.
BootstrapReport bootstrap(const Dataset& data, const Estimator& estimator, int n_reps,
                          std::uint64_t seed, unsigned workers = 0);

/// Dataset with records data.records[idx[i]].
Dataset resample(const Dataset& data, std::uint64_t seed);

nlohmann::json bootstrap_to_json(const BootstrapReport& report);

/// Diagonal entries keyed by (outcome n, photon number m).
using EntryKey = std::pair<int, int>;
using EntryTable = std::map<EntryKey, double>;

struct MseComparison {
  std::vector<EntryKey> entries;
  std::vector<double> squared_error_a;
  std::vector<double> squared_error_b;
  double median_a = 0.0;
  double median_b = 0.0;
  /// Requested entries absent from one of the inputs; excluded from the medians.
  std::vector<EntryKey> missing;
};

MseComparison compare_mse(const EntryTable& a, const EntryTable& b, const EntryTable& truth,
                          const std::vector<EntryKey>& entry_set);

/// Median of a copy of v; NaN for an empty input.
double median(std::vector<double> v);

}  // namespace qcal
