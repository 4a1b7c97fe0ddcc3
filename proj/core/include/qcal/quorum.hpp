#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "qcal/qmath.hpp"

namespace qcal {

/// One tomographer setting: an orthonormal eigenbasis with outcome labels.
struct QuorumSetting {
  std::vector<ComplexVector> basis;
  std::vector<double> labels;
};

/// Finite family of observables read by the tomographer.
struct FiniteQuorum {
  Index dim = 0;
  std::vector<QuorumSetting> settings;
  /// Whether the eigenprojectors span the full operator space (rank dim^2).
  bool span_check = false;

  std::size_t num_settings() const { return settings.size(); }
  std::size_t num_results(std::size_t k) const { return settings[k].basis.size(); }
  ComplexOperator projector(std::size_t k, std::size_t m) const;
  /// All projectors, setting-major.
  std::vector<ComplexOperator> projectors() const;
};

/// Validates orthonormality of every setting (1e-10) and computes span_check.
FiniteQuorum make_finite_quorum(std::vector<QuorumSetting> settings);

/// sigma_x, sigma_y, sigma_z eigenbases on a qubit.
FiniteQuorum pauli_quorum();

/// `n_settings` Haar-like random orthonormal bases plus the computational basis.
FiniteQuorum random_basis_quorum(Index dim, int n_settings, std::uint64_t seed);

/// Dual operators C^{(k)}_m, one per setting/outcome pair, such that
/// X = sum_{k,m} Tr[X C^{(k)}_m^dagger] |b^{(k)}_m><b^{(k)}_m|.
struct DualSet {
  std::vector<std::vector<ComplexOperator>> duals;

  const ComplexOperator& at(std::size_t k, std::size_t m) const { return duals[k][m]; }
};

/// Canonical dual frame of an operator family via the pseudo-inverse of its
/// Gram matrix. Throws NotAQuorum when the family does not span the operator space.
std::vector<ComplexOperator> dual_frame(std::span<const ComplexOperator> frame,
                                        double relative_tolerance = 1e-10);

DualSet compute_dual_set(const FiniteQuorum& quorum);

/// Linear map on operators in column-stacked vectorized form.
struct NoiseMap {
  Index dim = 0;
  Eigen::MatrixXcd superoperator;
  Eigen::MatrixXcd inverse_superoperator;
  double condition_number = 0.0;

  ComplexOperator apply(const ComplexOperator& x) const;
  ComplexOperator apply_inverse(const ComplexOperator& x) const;
};

/// Throws NonInvertibleNoise when the condition number exceeds `max_condition`.
NoiseMap noise_map_from_superoperator(const Eigen::MatrixXcd& matrix, double max_condition = 1e10);
NoiseMap invert_noise_map(const NoiseMap& map);

/// Superoperator of X -> (1-p) X + p Tr[X] I/d.
Eigen::MatrixXcd depolarizing_superoperator(Index dim, double p);

/// Duals for data taken through noise N: Tr[X C'^dagger] = Tr[N^{-1}(X) C^dagger].
DualSet noise_corrected_duals(const DualSet& duals, const NoiseMap& noise);

// ---------------------------------------------------------------------------
// Homodyne quorum, photon-number diagonal estimation.

/// Density of the efficiency-smeared quadrature outcome for Fock state |m>:
/// psi_m^2 convolved with a centered Gaussian of variance (1-eta)/(4 eta).
double smeared_fock_pdf(int m, double eta_h, double x);

/// out[m] = smeared_fock_pdf(m, eta_h, x) for m = 0 .. out.size()-1.
void smeared_fock_pdfs(double eta_h, double x, std::span<double> out);

struct KernelGrid {
  double x_min = -8.0;
  double x_max = 8.0;
  double step = 1.0 / 512.0;

  Index size() const;
  double at(Index i) const { return x_min + step * static_cast<double>(i); }
};

/// Sampled estimation kernels K_m with E_q_j[K_m] = delta_mj for m, j <= cutoff.
struct KernelTable {
  KernelGrid grid;
  int fock_cutoff = 0;
  double eta_h = 1.0;
  /// values(m, i) = K_m(grid.at(i)).
  RealMatrix values;
  /// max_{m,j} |sum_i w_i K_m(x_i) q_j(x_i) - delta_mj| on the grid.
  double residual = 0.0;
  double ridge = 0.0;

  /// Linear interpolation of K_m at x; nullopt outside the grid.
  std::optional<double> evaluate(int m, double x) const;
  /// Fills out[m] for m <= out.size()-1; returns false (and zeros) outside the grid.
  bool evaluate_all(double x, std::span<double> out) const;
};

/// Solves the ridge-regularized least-norm unbiasedness system on the grid.
/// Throws ValidationError for eta_h <= 1/2 and KernelConstructionError when the
/// residual is not below `max_residual`.
KernelTable build_diagonal_kernels(int fock_cutoff, double eta_h, const KernelGrid& grid = {},
                                   double ridge = 1e-10, double max_residual = 1e-4);

/// Phase-averaged homodyne tomographer with efficiency eta_h > 1/2.
struct HomodyneQuorum {
  double eta_h = 1.0;
  int fock_cutoff = 0;
  double smear_sigma2 = 0.0;
  KernelTable kernels;
};

HomodyneQuorum make_homodyne_quorum(double eta_h, int fock_cutoff, const KernelGrid& grid = {},
                                    double ridge = 1e-10);

/// CSV with header x,K_0,...,K_M.
void write_kernel_csv(const KernelTable& table, std::ostream& out);

}  // namespace qcal
