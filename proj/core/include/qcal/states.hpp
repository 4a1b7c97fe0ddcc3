#pragma once

#include "qcal/qmath.hpp"

namespace qcal {

/// Density operator on H (x) T. H is the side read by the apparatus under
/// calibration, T the side read by the tomographer.
struct BipartiteState {
  Index dim_system = 0;
  Index dim_tomo = 0;
  ComplexOperator rho;
  /// Probability mass removed by truncation before renormalization.
  double truncation_deficit = 0.0;
};

/// |Psi> = sum_i |i>|i> / sqrt(d).
BipartiteState maximally_entangled(int d);

/// rho_system (x) rho_tomo. Never faithful; useful for exercising the faithfulness gate.
BipartiteState product_state(const ComplexOperator& rho_system, const ComplexOperator& rho_tomo);

/// Photon-number correlated two-mode state proportional to sum_m xi^m |m>|m>,
/// truncated at `fock_cutoff` photons per arm and renormalized.
///
/// The dense density matrix has (cutoff+1)^2 rows, so it is only materialized
/// on request; the calibration pipeline works with the Schmidt weights.
struct TwinBeam {
  double xi = 0.0;
  int fock_cutoff = 0;
  /// weights(m) = |c_m|^2 after renormalization.
  RealVector weights;
  /// sum_{m > cutoff} (1 - xi^2) xi^{2m} = xi^{2(cutoff+1)}.
  double truncation_deficit = 0.0;

  Index dim() const { return fock_cutoff + 1; }
  double mean_photon_number() const;
  BipartiteState state() const;
};

/// Throws UnnormalizableState for xi >= 1 and ValidationError for xi < 0.
TwinBeam twin_beam(double xi, int fock_cutoff);

/// Superoperator X -> Tr_1[(X (x) 1) R] in column-stacked vectorized form,
/// together with its SVD pseudo-inverse.
struct MapR {
  Index dim_system = 0;
  Index dim_tomo = 0;
  Eigen::MatrixXcd matrix;          // dim_tomo^2 x dim_system^2
  Eigen::MatrixXcd pseudo_inverse;  // dim_system^2 x dim_tomo^2
  RealVector singular_values;
  Index rank = 0;
  double condition_number = 0.0;
  double svd_tolerance = 0.0;

  bool faithful() const { return rank == dim_system * dim_system; }
  ComplexOperator apply(const ComplexOperator& x) const;
};

MapR build_map_R(const BipartiteState& R, double svd_tolerance = 1e-10);

/// Direct evaluation of Tr_1[(X (x) 1) R], independent of the vectorized matrix.
ComplexOperator apply_map_R(const BipartiteState& R, const ComplexOperator& x);

/// X with vec(X) = pseudo_inverse * vec(y). Throws DimensionMismatch if y is not dim_tomo.
ComplexOperator invert_map_R(const MapR& map, const ComplexOperator& y);

/// Restriction of the twin-beam map to photon-number diagonal operators, where
/// it acts as x_m -> weights(m) * x_m.
struct DiagonalMapR {
  RealVector weights;
  Index rank = 0;
  double condition_number = 0.0;
  double svd_tolerance = 0.0;

  bool faithful() const { return rank == weights.size(); }
  RealVector apply(const RealVector& x) const;
  /// Elementwise inverse on the leading x.size() entries. Entries with a
  /// discarded weight map to zero.
  RealVector invert(const RealVector& y) const;
  double inverse_weight(Index m) const;
};

DiagonalMapR build_diagonal_map_R(const TwinBeam& R, double svd_tolerance = 1e-10);

}  // namespace qcal
