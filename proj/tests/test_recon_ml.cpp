#include <cmath>

#include <gtest/gtest.h>

#include "qcal/detectors.hpp"
#include "qcal/errors.hpp"
#include "qcal/random.hpp"
#include "qcal/recon_ml.hpp"
#include "qcal/sampler.hpp"
#include "qcal/stats.hpp"

using namespace qcal;

namespace {

Dataset small_homodyne(std::size_t n, std::uint64_t seed, double xi = 0.6, int cutoff = 30) {
  return sample_homodyne_twinbeam(twin_beam(xi, cutoff), noisy_photocounter(0.8, 1.0, cutoff, 30),
                                  make_homodyne_quorum(0.9, 4), n, seed);
}

}  // namespace

TEST(ReconMl, ResponseRowsAtIdealEfficiency) {
  Dataset d;
  d.kind = DatasetKind::homodyne;
  d.records = {{0, 0.0, 0.375}, {1, 0.0, -1.25}};
  const auto tb = twin_beam(0.5, 10);
  HomodyneQuorum hq;
  hq.eta_h = 1.0;
  const auto pr = build_problem_diagonal(d, tb, hq, 10);
  for (int m = 0; m <= 10; ++m) {
    const double psi = fock_quadrature_amplitude(m, 0.375);
    EXPECT_NEAR(pr.rows(0, m), tb.weights(m) * psi * psi, 1e-14);
  }
}

TEST(ReconMl, VacuumStateRowsLiveOnZero) {
  const auto data = small_homodyne(200, 1);
  const auto pr = build_problem_diagonal(data, twin_beam(0.0, 10), make_homodyne_quorum(0.9, 4), 10);
  EXPECT_GT(pr.rows.col(0).minCoeff(), 0.0);
  EXPECT_EQ(pr.rows.rightCols(10).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ReconMl, ResponseRowsFiniteAndNonnegative) {
  Rng rng(4);
  Dataset d;
  d.kind = DatasetKind::homodyne;
  for (int i = 0; i < 100000; ++i) d.records.push_back({0, 0.0, 12.0 * (rng.uniform() - 0.5)});
  const auto pr = build_problem_diagonal(d, twin_beam(0.88, 60), make_homodyne_quorum(0.9, 4), 40);
  EXPECT_TRUE(pr.rows.allFinite());
  EXPECT_GE(pr.rows.minCoeff(), 0.0);
}

TEST(ReconMl, CutoffTooSmall) {
  const auto data = small_homodyne(100, 2);
  EXPECT_THROW(build_problem_diagonal(data, twin_beam(0.88, 60), make_homodyne_quorum(0.9, 4), 20), CutoffError);
  EXPECT_THROW(build_problem_diagonal(data, twin_beam(0.5, 10), make_homodyne_quorum(0.9, 4), 11), ValidationError);
}

TEST(ReconMl, DiagonalMonotoneAndConstrained) {
  const auto data = small_homodyne(20000, 3);
  const auto pr = build_problem_diagonal(data, twin_beam(0.6, 30), make_homodyne_quorum(0.9, 4), 25);
  for (bool accelerate : {true, false}) {
    MlOptions o;
    o.accelerate = accelerate;
    o.max_iters = accelerate ? 20000 : 300;
    const auto r = maximize(pr, o);
    EXPECT_TRUE(r.trace_monotone());
    EXPECT_LE(r.completeness_deviation, 1e-6);
    EXPECT_GE(r.min_eigenvalue, -1e-8);
    EXPECT_EQ(r.outcomes.back(), kCatchAllOutcome);
    if (accelerate) {
      EXPECT_TRUE(r.converged);
      EXPECT_NEAR(log_likelihood(pr, r.diagonals), r.trace.back(), 1e-6);
    }
  }
}

TEST(ReconMl, AcceleratedAndPlainReachTheSameOptimum) {
  const auto data = small_homodyne(5000, 5, 0.4, 20);
  const auto pr = build_problem_diagonal(data, twin_beam(0.4, 20), make_homodyne_quorum(0.9, 4), 15);
  MlOptions plain;
  plain.accelerate = false;
  plain.min_ll_increase = 1e-10;
  const auto a = maximize(pr);
  const auto b = maximize(pr, plain);
  EXPECT_NEAR(a.trace.back(), b.trace.back(), 1e-3);
  EXPECT_LT(a.iterations, b.iterations);
}

TEST(ReconMl, QubitWithinBootstrapErrors) {
  const auto R = maximally_entangled(2);
  const auto truth = random_povm(2, 3, 19);
  const auto q = pauli_quorum();
  const auto data = sample_finite(R, truth, q, 100000, 6);
  auto estimator = [&](const Dataset& d) {
    const auto r = maximize(build_problem_finite(tabulate(d, 3, q), R, q));
    RealVector v(3 * 8);
    for (int k = 0; k < 3; ++k) {
      const Index row = r.row_of(k);
      for (int i = 0; i < 4; ++i) {
        v(k * 8 + 2 * i) = r.povm.elements[row](i % 2, i / 2).real();
        v(k * 8 + 2 * i + 1) = r.povm.elements[row](i % 2, i / 2).imag();
      }
    }
    return v;
  };
  const RealVector est = estimator(data);
  const auto boot = bootstrap(data, estimator, 30, 77);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 4; ++i) {
      const Complex t = truth.elements[k](i % 2, i / 2);
      EXPECT_LT(std::abs(est(k * 8 + 2 * i) - t.real()), 5.0 * boot.stddev(k * 8 + 2 * i) + 1e-12);
      EXPECT_LT(std::abs(est(k * 8 + 2 * i + 1) - t.imag()), 5.0 * boot.stddev(k * 8 + 2 * i + 1) + 1e-12);
    }
}

TEST(ReconMl, FiniteTraceMonotoneAndPovmValid) {
  const auto R = maximally_entangled(3);
  const auto q = random_basis_quorum(3, 3, 4);
  const auto data = sample_finite(R, random_povm(3, 4, 3), q, 5000, 7);
  const auto r = maximize(build_problem_finite(tabulate(data, 4, q), R, q));
  EXPECT_TRUE(r.trace_monotone());
  EXPECT_LE(r.completeness_deviation, 1e-6);
  EXPECT_GE(r.min_eigenvalue, -1e-8);
}

TEST(ReconMl, FiniteExactFrequenciesApproachTruth) {
  const auto R = maximally_entangled(2);
  const auto truth = random_povm(2, 3, 23);
  const auto q = pauli_quorum();
  const auto table = exact_frequencies(exact_finite_table(R, truth, q));
  MlOptions o;
  o.min_ll_increase = 1e-14;
  const auto r = maximize(build_problem_finite(table, R, q), o);
  for (int k = 0; k < 3; ++k) EXPECT_LT((r.povm.elements[r.row_of(k)] - truth.elements[k]).norm(), 1e-3);
}

TEST(ReconMl, TooSmallCutoffShowsBias) {
  // Characterization: a Hilbert-space cutoff far below the state support
  // pushes errors well beyond sampling noise.
  const auto tb = twin_beam(0.6, 30);
  const auto povm = noisy_photocounter(0.8, 1.0, 30, 30);
  const auto hq = make_homodyne_quorum(0.9, 4);
  const auto data = sample_homodyne_twinbeam(tb, povm, hq, 20000, 12);
  TwinBeam cut = tb;
  cut.xi = 0.0;  // bypasses the tail check on purpose
  const auto biased = maximize(build_problem_diagonal(data, cut, hq, 2));
  const auto good = maximize(build_problem_diagonal(data, tb, hq, 25));
  const RealMatrix t = povm.diagonals();
  double eb = 0.0, eg = 0.0;
  for (int k = 0; k <= 2; ++k)
    for (int n = 0; n <= 2; ++n) {
      eb += std::pow(biased.diagonals(biased.row_of(k), n) - t(k, n), 2);
      eg += std::pow(good.diagonals(good.row_of(k), n) - t(k, n), 2);
    }
  EXPECT_GT(eb, eg);
}

TEST(ReconMl, JsonExport) {
  const auto data = small_homodyne(2000, 9, 0.4, 20);
  const auto r = maximize(build_problem_diagonal(data, twin_beam(0.4, 20), make_homodyne_quorum(0.9, 4), 10));
  const auto j = ml_result_to_json(r);
  EXPECT_EQ(j.at("trace").size(), r.trace.size());
  EXPECT_EQ(j.at("diagonals").size(), r.outcomes.size());
  EXPECT_TRUE(j.at("converged").get<bool>());
}
