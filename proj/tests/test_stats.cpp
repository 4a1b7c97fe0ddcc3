#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "qcal/detectors.hpp"
#include "qcal/errors.hpp"
#include "qcal/runner.hpp"
#include "qcal/sampler.hpp"
#include "qcal/stats.hpp"

using namespace qcal;

namespace {

Dataset ideal_counter_data(std::size_t n, std::uint64_t seed) {
  // Ideal photon counter on a qubit-sized truncation: outcome n = Fock number.
  return sample_finite(maximally_entangled(2), noisy_photocounter(1.0, 0.0, 1, 1), pauli_quorum(), n, seed);
}

RealVector outcome_frequencies(const Dataset& d) {
  RealVector v = RealVector::Zero(2);
  for (const auto& r : d.records) v(r.outcome) += 1.0;
  return v / static_cast<double>(d.size());
}

}  // namespace

TEST(Stats, ConstantEstimatorHasZeroSpread) {
  const auto data = ideal_counter_data(1000, 1);
  const auto rep = bootstrap(data, [](const Dataset&) { return RealVector::Constant(3, 2.5); }, 10, 4);
  EXPECT_EQ(rep.stddev.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(rep.mean(1), 2.5);
}

TEST(Stats, BootstrapMatchesBinomialStderr) {
  const std::size_t n = 20000;
  const auto data = ideal_counter_data(n, 2);
  const auto rep = bootstrap(data, outcome_frequencies, 200, 5);
  const double p = outcome_frequencies(data)(0);
  EXPECT_NEAR(rep.stddev(0) / std::sqrt(p * (1 - p) / n), 1.0, 0.3);
}

TEST(Property, BootstrapDeterministicPerSeed) {
  const auto data = ideal_counter_data(5000, 3);
  const auto a = bootstrap(data, outcome_frequencies, 20, 9, 1);
  const auto b = bootstrap(data, outcome_frequencies, 20, 9, 4);
  EXPECT_EQ(a.stddev, b.stddev);
  EXPECT_EQ(a.mean, b.mean);
  const auto c = bootstrap(data, outcome_frequencies, 20, 10);
  EXPECT_NE(a.stddev, c.stddev);
}

TEST(Stats, BootstrapShrinksWithData) {
  auto spread = [](std::size_t n) {
    return bootstrap(ideal_counter_data(n, 7), outcome_frequencies, 200, 11).stddev(0);
  };
  EXPECT_NEAR(spread(5000) / spread(20000), 2.0, 0.6);
}

TEST(Stats, FailuresAreCountedAndBounded) {
  const auto data = ideal_counter_data(100, 4);
  int calls = 0;
  auto flaky = [&](const Dataset&) -> RealVector {
    if (calls++ % 10 == 3) throw Error("flaky");
    return RealVector::Zero(1);
  };
  const auto rep = bootstrap(data, flaky, 20, 1, 1);
  EXPECT_GT(rep.failures, 0);
  EXPECT_EQ(rep.failure_messages.size(), static_cast<std::size_t>(rep.failures));
  calls = 0;
  auto broken = [&](const Dataset&) -> RealVector {
    if (calls++ > 0) throw Error("broken");
    return RealVector::Zero(1);
  };
  EXPECT_THROW(bootstrap(data, broken, 20, 1, 1), BootstrapError);
  EXPECT_THROW(bootstrap(data, outcome_frequencies, 1, 1), ValidationError);
}

TEST(Stats, ResamplePreservesSizeAndRecords) {
  const auto data = ideal_counter_data(500, 5);
  const auto r = resample(data, 3);
  EXPECT_EQ(r.size(), data.size());
  for (const auto& rec : r.records) EXPECT_NE(std::find(data.records.begin(), data.records.end(), rec), data.records.end());
}

TEST(Stats, CompareMse) {
  EntryTable truth{{{0, 0}, 1.0}, {{0, 1}, 0.5}, {{1, 1}, 0.25}};
  EntryTable a{{{0, 0}, 1.1}, {{0, 1}, 0.5}, {{1, 1}, 0.35}};
  const auto same = compare_mse(a, a, truth, {{0, 0}, {0, 1}, {1, 1}});
  EXPECT_EQ(same.median_a, same.median_b);
  EntryTable b{{{0, 0}, 1.0}, {{0, 1}, 0.6}};
  const auto c = compare_mse(a, b, truth, {{0, 0}, {0, 1}, {1, 1}});
  ASSERT_EQ(c.missing.size(), 1u);
  EXPECT_EQ(c.missing[0], (EntryKey{1, 1}));
  EXPECT_EQ(c.entries.size(), 2u);
  EXPECT_NEAR(c.median_a, 0.005, 1e-12);
}

TEST(Stats, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(Stats, MlBeatsAveragingAtEqualSize) {
  std::vector<EntryKey> keys;
  for (int k = 0; k <= 7; ++k)
    for (int n = 0; n <= 6; ++n) keys.push_back({k, n});
  auto table = [](const nlohmann::json& entries, const char* field) {
    EntryTable t;
    for (const auto& e : entries) t[{e.at("outcome").get<int>(), e.at("n").get<int>()}] = e.at(field).get<double>();
    return t;
  };
  std::vector<double> ml_medians, avg_medians;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto ml = builtin_scenario("fig4");
    ml.bootstrap_reps = 0;
    ml.seed = seed;
    auto avg = builtin_scenario("fig2");
    avg.samples = ml.samples;
    avg.seed = seed;
    const auto em = run(ml).report.at("reconstructions").at("ml").at("entries");
    const auto ea = run(avg).report.at("reconstructions").at("averaging").at("entries");
    const auto c = compare_mse(table(em, "estimate"), table(ea, "estimate"), table(ea, "theory"), keys);
    EXPECT_TRUE(c.missing.empty());
    ml_medians.push_back(c.median_a);
    avg_medians.push_back(c.median_b);
  }
  EXPECT_LE(median(ml_medians), median(avg_medians));
}
