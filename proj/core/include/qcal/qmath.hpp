#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qcal {

using Index = Eigen::Index;
using Complex = std::complex<double>;

/// Dense square operator on a truncated Hilbert space. States, POVM elements
/// and quorum projectors all share this representation.
using ComplexOperator = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

struct HermitianCheckReport {
  double max_antihermitian_deviation = 0.0;
  /// Smallest eigenvalue of the Hermitian part (x + x^dagger) / 2.
  double min_eigenvalue = 0.0;
};

/// Kronecker product: result((i*b.dim + p), (j*b.dim + q)) = a(i,j) * b(p,q).
ComplexOperator tensor_product(const ComplexOperator& a, const ComplexOperator& b);

/// Trace over the first tensor factor of dimension `dim_first`.
/// Throws DimensionMismatch when x.rows() is not divisible by dim_first.
ComplexOperator partial_trace_first(const ComplexOperator& x, Index dim_first);

/// Trace over the second tensor factor of dimension `dim_second`.
ComplexOperator partial_trace_second(const ComplexOperator& x, Index dim_second);

HermitianCheckReport positivity_report(const ComplexOperator& x);

/// Column-stacking vectorization: vec(X)[i + j*d] = X(i,j).
ComplexVector vectorize(const ComplexOperator& x);
ComplexOperator unvectorize(const ComplexVector& v, Index dim);

/// Hilbert-Schmidt inner product Tr[a^dagger b].
Complex hs_inner(const ComplexOperator& a, const ComplexOperator& b);

/// f(x) for Hermitian x via its eigendecomposition, with eigenvalues clipped at
/// zero before applying `power`. Only used on positive semidefinite inputs.
ComplexOperator psd_power(const ComplexOperator& x, double power);

/// Moore-Penrose pseudo-inverse computed from an SVD, with singular values at
/// or below `relative_tolerance * sigma_max` treated as zero.
struct PseudoInverse {
  Eigen::MatrixXcd matrix;
  RealVector singular_values;
  Index rank = 0;
  /// sigma_max / sigma_min when every singular value is retained; +inf otherwise.
  double condition_number = 0.0;
};
PseudoInverse pseudo_inverse(const Eigen::MatrixXcd& a, double relative_tolerance);

/// Quadrature wavefunction psi_m(x) of the Fock state |m>, for the quadrature
/// X = (a^dagger e^{i phi} + a e^{-i phi}) / 2. The vacuum has variance 1/4.
double fock_quadrature_amplitude(int m, double x);

/// Fills out[m] = psi_m(x) for m = 0 .. out.size()-1 in a single recurrence pass.
void fock_quadrature_amplitudes(double x, std::span<double> out);

}  // namespace qcal
