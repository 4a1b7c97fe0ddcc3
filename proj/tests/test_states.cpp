#include <cmath>

#include <gtest/gtest.h>

#include "qcal/errors.hpp"
#include "qcal/random.hpp"
#include "qcal/states.hpp"

using namespace qcal;

namespace {

ComplexOperator random_operator(Index d, std::uint64_t seed) {
  Rng rng(seed);
  ComplexOperator m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = {rng.normal(), rng.normal()};
  return m;
}

}  // namespace

TEST(States, MaximallyEntangledActsAsTransposeOverD) {
  for (int d : {2, 3, 4}) {
    const auto R = maximally_entangled(d);
    EXPECT_NEAR(R.rho.trace().real(), 1.0, 1e-14);
    const auto x = random_operator(d, 7 + d);
    EXPECT_LT((apply_map_R(R, x) - x.transpose() / double(d)).norm(), 1e-13);
    const auto map = build_map_R(R);
    EXPECT_TRUE(map.faithful());
    EXPECT_NEAR(map.condition_number, 1.0, 1e-12);
  }
  EXPECT_THROW(maximally_entangled(1), ValidationError);
}

TEST(States, VectorizedMapAgreesWithDirectPartialTrace) {
  const auto R = maximally_entangled(3);
  // A generic faithful state: mix in a random positive operator.
  auto a = random_operator(9, 11);
  BipartiteState mixed = R;
  mixed.rho = 0.7 * R.rho + 0.3 * (a * a.adjoint()) / (a * a.adjoint()).trace().real();
  const auto map = build_map_R(mixed);
  const auto x = random_operator(3, 12);
  EXPECT_LT((map.apply(x) - apply_map_R(mixed, x)).norm(), 1e-12);
  EXPECT_LT((invert_map_R(map, map.apply(x)) - x).norm(), 1e-9);
  EXPECT_THROW(invert_map_R(map, ComplexOperator::Zero(2, 2)), DimensionMismatch);
}

TEST(States, ProductStateIsNotFaithful) {
  const ComplexOperator mixed = ComplexOperator::Identity(2, 2) / 2.0;
  const auto map = build_map_R(product_state(mixed, mixed));
  EXPECT_EQ(map.rank, 1);
  EXPECT_FALSE(map.faithful());
  EXPECT_TRUE(std::isinf(map.condition_number));
}

TEST(States, TwinBeamWeightsAndDeficit) {
  const double xi = 0.88;
  const auto tb = twin_beam(xi, 54);
  EXPECT_NEAR(tb.weights.sum(), 1.0, 1e-14);
  EXPECT_NEAR(tb.truncation_deficit, std::pow(xi, 110), 1e-18);
  EXPECT_LT(tb.truncation_deficit, 1e-6);
  EXPECT_NEAR(tb.weights(3) / tb.weights(2), xi * xi, 1e-14);
  // Untruncated mean photon number xi^2 / (1 - xi^2).
  EXPECT_NEAR(twin_beam(xi, 400).mean_photon_number(), xi * xi / (1 - xi * xi), 1e-9);
  EXPECT_THROW(twin_beam(1.0, 10), UnnormalizableState);
  EXPECT_THROW(twin_beam(1.3, 10), UnnormalizableState);
}

TEST(States, TwinBeamDenseStateMatchesWeights) {
  const auto tb = twin_beam(0.5, 4);
  const auto R = tb.state();
  EXPECT_EQ(R.dim_system, 5);
  EXPECT_NEAR(R.rho.trace().real(), 1.0, 1e-14);
  // Conditioning on |m><m| leaves weight w_m on |m><m|.
  ComplexOperator p = ComplexOperator::Zero(5, 5);
  p(2, 2) = 1.0;
  const auto out = apply_map_R(R, p);
  EXPECT_NEAR(out(2, 2).real(), tb.weights(2), 1e-14);
}

TEST(States, DiagonalMapConditionNumber) {
  for (double xi : {0.3, 0.6, 0.88}) {
    const int cutoff = 8;
    const auto dm = build_diagonal_map_R(twin_beam(xi, cutoff));
    EXPECT_TRUE(dm.faithful());
    EXPECT_NEAR(dm.condition_number / std::pow(xi, -2.0 * cutoff), 1.0, 1e-10);
    RealVector x = RealVector::LinSpaced(cutoff + 1, 0.1, 0.9);
    EXPECT_LT((dm.invert(dm.apply(x)) - x).norm(), 1e-10);
  }
}

TEST(States, VacuumTwinBeamIsNotFaithful) {
  const auto dm = build_diagonal_map_R(twin_beam(0.0, 10));
  EXPECT_EQ(dm.rank, 1);
  EXPECT_FALSE(dm.faithful());
  EXPECT_TRUE(std::isinf(dm.condition_number));
}
