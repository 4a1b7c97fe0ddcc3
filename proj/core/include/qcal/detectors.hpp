#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcal/qmath.hpp"

namespace qcal {

/// Ordered list of POVM elements, one per outcome label n = 0, 1, ...
struct Povm {
  Index dim = 0;
  std::vector<ComplexOperator> elements;

  std::size_t size() const { return elements.size(); }
  /// True when every element is diagonal in the computational (Fock) basis.
  bool is_diagonal(double tol = 0.0) const;
  /// diagonals(n, m) = <m|P_n|m>.
  RealMatrix diagonals() const;
};

struct PovmReport {
  double max_antihermitian_deviation = 0.0;
  double min_eigenvalue = 0.0;
  /// max_ij |(sum_n P_n - I)_ij|
  double completeness_deviation = 0.0;

  bool satisfied(double hermitian_tol = 1e-12, double positivity_tol = 1e-10,
                 double completeness_tol = 1e-10) const {
    return max_antihermitian_deviation <= hermitian_tol && min_eigenvalue >= -positivity_tol &&
           completeness_deviation <= completeness_tol;
  }
};

PovmReport check_povm(const Povm& povm);

/// Diagonal POVM from a response matrix: response(n, m) = <m|P_n|m>.
Povm povm_from_diagonals(const RealMatrix& response);

/// P_n = |o_n><o_n|. Throws ValidationError unless the vectors are an
/// orthonormal basis (Gram deviation below 1e-10).
Povm projective_povm(std::span<const ComplexVector> basis);

/// Response matrix response(k, n) = <n|P_k|n> of an ideal photon counter
/// preceded by a beam splitter of transmissivity eta_p that mixes in a thermal
/// mode with mean photon number nu.
///
/// Computed as pure loss followed by a quantum-limited amplifier, the
/// composition that reproduces the thermal-environment beam splitter on
/// photon-number statistics. Rows k = 0 .. fock_cutoff+env_cutoff; the last row
/// absorbs the remainder so each column sums to one.
RealMatrix photocounter_response(double eta_p, double nu, int fock_cutoff, int env_cutoff);

/// Reference computation of the same response by brute force: the two-mode
/// beam-splitter unitary is built on a truncated tensor space, applied to
/// |n><n| (x) rho_thermal, and the environment is traced out.
RealMatrix photocounter_response_reference(double eta_p, double nu, int fock_cutoff,
                                           int env_cutoff);

/// Diagonal POVM built from photocounter_response.
/// Throws CutoffError when the thermal tail above env_cutoff is >= 1e-8.
Povm noisy_photocounter(double eta_p, double nu, int fock_cutoff, int env_cutoff);

/// Thermal occupation probabilities nu^j / (1+nu)^{j+1}, j = 0 .. cutoff.
RealVector thermal_distribution(double nu, int cutoff);
double thermal_tail_mass(double nu, int cutoff);

/// Random POVM from Ginibre draws: P_n = S^{-1/2} G_n G_n^dagger S^{-1/2}.
/// Bit-identical for a fixed seed.
Povm random_povm(Index dim, int n_outcomes, std::uint64_t seed);

/// p(n) = Tr[rho P_n]. Throws DimensionMismatch.
std::vector<double> born_probabilities(const Povm& povm, const ComplexOperator& rho);

}  // namespace qcal
