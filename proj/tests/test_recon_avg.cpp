#include <cmath>

#include <gtest/gtest.h>

#include "qcal/detectors.hpp"
#include "qcal/errors.hpp"
#include "qcal/recon_avg.hpp"
#include "qcal/sampler.hpp"
#include "qcal/stats.hpp"

using namespace qcal;

namespace {

double max_error(const PovmEstimate& est, const Povm& truth) {
  double e = 0.0;
  for (std::size_t i = 0; i < est.outcomes.size(); ++i) {
    e = std::max(e, (est.elements[i] - truth.elements[static_cast<std::size_t>(est.outcomes[i])]).cwiseAbs().maxCoeff());
  }
  return e;
}

PovmEstimate exact_round_trip(const BipartiteState& R, const Povm& truth, const FiniteQuorum& q,
                              const NoiseMap* noise = nullptr) {
  const auto table = exact_frequencies(exact_finite_table(R, truth, q, noise));
  return recover_povm(estimate_conditioned_finite(table, q, compute_dual_set(q), noise), build_map_R(R));
}

}  // namespace

TEST(ReconAvg, ExactRoundTripQubitAndQutrit) {
  const auto qubit = random_povm(2, 3, 7);
  EXPECT_LT(max_error(exact_round_trip(maximally_entangled(2), qubit, pauli_quorum()), qubit), 1e-8);
  const auto qutrit = random_povm(3, 4, 8);
  EXPECT_LT(max_error(exact_round_trip(maximally_entangled(3), qutrit, random_basis_quorum(3, 3, 9)), qutrit), 1e-8);
}

TEST(ReconAvg, ExactRoundTripWithNonMaximallyEntangledState) {
  // Partially entangled pure state sum_i c_i |ii>, faithful but not maximally entangled.
  BipartiteState R;
  R.dim_system = R.dim_tomo = 3;
  ComplexVector psi = ComplexVector::Zero(9);
  const double c[3] = {0.7, 0.5, 0.3};
  for (int i = 0; i < 3; ++i) psi(i * 3 + i) = c[i];
  psi.normalize();
  R.rho = psi * psi.adjoint();
  const auto truth = random_povm(3, 2, 10);
  EXPECT_LT(max_error(exact_round_trip(R, truth, random_basis_quorum(3, 3, 11)), truth), 1e-8);
}

TEST(ReconAvg, ExactRoundTripThroughDepolarizingNoise) {
  const auto truth = random_povm(2, 3, 12);
  const auto noise = noise_map_from_superoperator(depolarizing_superoperator(2, 0.3));
  EXPECT_LT(max_error(exact_round_trip(maximally_entangled(2), truth, pauli_quorum(), &noise), truth), 1e-8);
  // Ignoring the noise biases the estimate.
  const auto table = exact_frequencies(exact_finite_table(maximally_entangled(2), truth, pauli_quorum(), &noise));
  const auto q = pauli_quorum();
  const auto naive = recover_povm(estimate_conditioned_finite(table, q, compute_dual_set(q)), build_map_R(maximally_entangled(2)));
  EXPECT_GT(max_error(naive, truth), 1e-3);
}

TEST(ReconAvg, UnobservedOutcomeProducesNoEstimate) {
  Povm truth = random_povm(2, 2, 3);
  truth.elements.push_back(ComplexOperator::Zero(2, 2));
  const auto q = pauli_quorum();
  const auto table = exact_frequencies(exact_finite_table(maximally_entangled(2), truth, q));
  const auto est = estimate_conditioned_finite(table, q, compute_dual_set(q));
  ASSERT_EQ(est.unobserved.size(), 1u);
  EXPECT_EQ(est.unobserved[0], 2);
  EXPECT_EQ(est.estimates.size(), 2u);
}

TEST(ReconAvg, SampledStderrMatchesSpreadOverSeeds) {
  const auto R = maximally_entangled(2);
  const auto truth = random_povm(2, 3, 14);
  const auto q = pauli_quorum();
  const auto duals = compute_dual_set(q);
  const auto map = build_map_R(R);
  const int seeds = 60;
  std::vector<double> values;
  double reported = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const auto data = sample_finite(R, truth, q, 20000, 1000 + s);
    const auto pe = recover_povm(estimate_conditioned_finite(tabulate(data, 3, q), q, duals), map);
    values.push_back(pe.elements[1](0, 1).real());
    reported += pe.stderr_re[1](0, 1) / seeds;
  }
  double mean = 0.0, var = 0.0;
  for (double v : values) mean += v / seeds;
  for (double v : values) var += (v - mean) * (v - mean) / (seeds - 1);
  EXPECT_NEAR(std::sqrt(var) / reported, 1.0, 0.3);
  EXPECT_NEAR(mean, truth.elements[1](0, 1).real(), 4.0 * reported / std::sqrt(double(seeds)));
}

TEST(ReconAvg, SampledCompletenessWithinErrorBars) {
  const auto R = maximally_entangled(2);
  const auto q = pauli_quorum();
  const auto data = sample_finite(R, random_povm(2, 3, 15), q, 100000, 3);
  const auto pe = recover_povm(estimate_conditioned_finite(tabulate(data, 3, q), q, compute_dual_set(q)), build_map_R(R));
  const ComplexOperator dev = pe.completeness_sum - ComplexOperator::Identity(2, 2);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) {
      EXPECT_LE(std::abs(dev(i, j).real()), 5.0 * pe.completeness_stderr_re(i, j) + 1e-12);
      EXPECT_LE(std::abs(dev(i, j).imag()), 5.0 * pe.completeness_stderr_im(i, j) + 1e-12);
    }
}

TEST(ReconAvg, HomodyneExactModeWithinKernelTolerance) {
  const auto tb = twin_beam(0.88, 60);
  const auto povm = noisy_photocounter(0.8, 1.0, 60, 40);
  const auto hq = make_homodyne_quorum(0.9, 20);
  const auto est = exact_conditioned_homodyne(tb, povm, hq);
  const auto pe = recover_povm_diagonal(est, build_diagonal_map_R(tb));
  const RealMatrix truth = povm.diagonals();
  // The kernels are unbiased on m <= 20; the residual state weight above 20
  // leaks in, so compare only where the leakage is negligible.
  double worst = 0.0;
  for (int k = 0; k <= 6; ++k)
    for (int n = 0; n <= 6; ++n) worst = std::max(worst, std::abs(pe.value(pe.row_of(k), n) - truth(k, n)));
  EXPECT_LT(worst, 1e-2);

  // With a state that lives inside the kernel range the agreement is at residual level.
  const auto small = twin_beam(0.5, 12);
  const auto small_povm = noisy_photocounter(0.8, 1.0, 12, 40);
  const auto pe2 = recover_povm_diagonal(exact_conditioned_homodyne(small, small_povm, hq), build_diagonal_map_R(small));
  const RealMatrix t2 = small_povm.diagonals();
  double worst2 = 0.0;
  for (std::size_t r = 0; r < pe2.outcomes.size(); ++r)
    for (int n = 0; n <= 6; ++n)
      worst2 = std::max(worst2, std::abs(pe2.value(static_cast<Index>(r), n) - t2(pe2.outcomes[r], n)));
  EXPECT_LT(worst2, 1e-3);
}

TEST(ReconAvg, HomodyneClippingIsCounted) {
  Dataset d;
  d.kind = DatasetKind::homodyne;
  d.records = {{0, 0.0, 0.1}, {0, 0.0, 9.5}, {1, 0.0, -0.2}};
  d.recount();
  const auto est = estimate_conditioned_homodyne(d, make_homodyne_quorum(0.9, 4));
  EXPECT_EQ(est.clipped, 1u);
  EXPECT_FALSE(est.warnings.empty());
}

TEST(ReconAvg, HomodyneStderrIncludesBinomialTerm) {
  const auto tb = twin_beam(0.6, 30);
  const auto povm = noisy_photocounter(0.8, 1.0, 30, 40);
  const auto hq = make_homodyne_quorum(0.9, 12);
  const auto data = sample_homodyne_twinbeam(tb, povm, hq, 50000, 8);
  const auto est = estimate_conditioned_homodyne(data, hq);
  const auto pe = recover_povm_diagonal(est, build_diagonal_map_R(tb));
  const auto& e = est.estimates[0];
  const double w0 = tb.weights(0);
  const double expect = std::sqrt(std::pow(e.p_hat * e.diag_stderr(0), 2) + std::pow(e.diag_hat(0) * e.p_stderr, 2)) / w0;
  EXPECT_NEAR(pe.stderr(0, 0), expect, 1e-15);
}

TEST(Property, AveragingErrorScalesAsInverseSqrtN) {
  const auto R = maximally_entangled(2);
  const auto truth = random_povm(2, 3, 31);
  const auto q = pauli_quorum();
  const auto duals = compute_dual_set(q);
  const auto map = build_map_R(R);
  auto median_sq = [&](std::size_t n) {
    std::vector<double> errs;
    for (int s = 0; s < 40; ++s) {
      const auto data = sample_finite(R, truth, q, n, 500 + s + n);
      const auto pe = recover_povm(estimate_conditioned_finite(tabulate(data, 3, q), q, duals), map);
      for (std::size_t i = 0; i < pe.outcomes.size(); ++i)
        errs.push_back((pe.elements[i] - truth.elements[i]).cwiseAbs2().sum());
    }
    return median(errs);
  };
  const double ratio = median_sq(40000) / median_sq(10000);
  EXPECT_GT(ratio, 0.125);
  EXPECT_LT(ratio, 0.5);
}
