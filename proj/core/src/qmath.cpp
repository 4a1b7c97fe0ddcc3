#include "qcal/qmath.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qcal/errors.hpp"

namespace qcal {

ComplexOperator tensor_product(const ComplexOperator& a, const ComplexOperator& b) {
  const Index ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  ComplexOperator out(ra * rb, ca * cb);
  for (Index i = 0; i < ra; ++i) {
    for (Index j = 0; j < ca; ++j) {
      out.block(i * rb, j * cb, rb, cb) = a(i, j) * b;
    }
  }
  return out;
}

ComplexOperator partial_trace_first(const ComplexOperator& x, Index dim_first) {
  if (dim_first <= 0 || x.rows() != x.cols() || x.rows() % dim_first != 0) {
    throw DimensionMismatch("partial_trace_first: dimension " + std::to_string(x.rows()) +
                            " is not divisible by " + std::to_string(dim_first));
  }
  const Index d2 = x.rows() / dim_first;
  ComplexOperator out = ComplexOperator::Zero(d2, d2);
  for (Index i = 0; i < dim_first; ++i) {
    out += x.block(i * d2, i * d2, d2, d2);
  }
  return out;
}

ComplexOperator partial_trace_second(const ComplexOperator& x, Index dim_second) {
  if (dim_second <= 0 || x.rows() != x.cols() || x.rows() % dim_second != 0) {
    throw DimensionMismatch("partial_trace_second: dimension " + std::to_string(x.rows()) +
                            " is not divisible by " + std::to_string(dim_second));
  }
  const Index d1 = x.rows() / dim_second;
  ComplexOperator out(d1, d1);
  for (Index i = 0; i < d1; ++i) {
    for (Index j = 0; j < d1; ++j) {
      out(i, j) = x.block(i * dim_second, j * dim_second, dim_second, dim_second).trace();
    }
  }
  return out;
}

HermitianCheckReport positivity_report(const ComplexOperator& x) {
  HermitianCheckReport report;
  const Index d = x.rows();
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      report.max_antihermitian_deviation =
          std::max(report.max_antihermitian_deviation, std::abs(x(i, j) - std::conj(x(j, i))));
    }
  }
  if (d == 0) return report;
  const ComplexOperator herm = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(herm, Eigen::EigenvaluesOnly);
  report.min_eigenvalue = solver.eigenvalues().minCoeff();
  return report;
}

ComplexVector vectorize(const ComplexOperator& x) {
  return Eigen::Map<const ComplexVector>(x.data(), x.size());
}

ComplexOperator unvectorize(const ComplexVector& v, Index dim) {
  if (v.size() != dim * dim) {
    throw DimensionMismatch("unvectorize: vector length " + std::to_string(v.size()) +
                            " does not match dimension " + std::to_string(dim));
  }
  return Eigen::Map<const ComplexOperator>(v.data(), dim, dim);
}

Complex hs_inner(const ComplexOperator& a, const ComplexOperator& b) {
  return (a.adjoint() * b).trace();
}

ComplexOperator psd_power(const ComplexOperator& x, double power) {
  Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(0.5 * (x + x.adjoint()));
  RealVector ev = solver.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    const double v = std::max(ev(i), 0.0);
    ev(i) = (v == 0.0 && power < 0.0) ? 0.0 : std::pow(v, power);
  }
  const auto& u = solver.eigenvectors();
  return u * ev.asDiagonal() * u.adjoint();
}

PseudoInverse pseudo_inverse(const Eigen::MatrixXcd& a, double relative_tolerance) {
  PseudoInverse out;
  if (a.size() == 0) {
    out.matrix = Eigen::MatrixXcd::Zero(a.cols(), a.rows());
    out.condition_number = std::numeric_limits<double>::infinity();
    return out;
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() > 0 ? out.singular_values(0) : 0.0;
  const double cut = relative_tolerance * smax;
  RealVector inv = RealVector::Zero(out.singular_values.size());
  double smin_kept = 0.0;
  for (Index i = 0; i < out.singular_values.size(); ++i) {
    const double s = out.singular_values(i);
    if (s > cut && s > 0.0) {
      inv(i) = 1.0 / s;
      ++out.rank;
      smin_kept = s;
    }
  }
  out.matrix = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
  const Index full = std::min(a.rows(), a.cols());
  out.condition_number = (out.rank == full && out.rank > 0)
                             ? smax / smin_kept
                             : std::numeric_limits<double>::infinity();
  return out;
}

void fock_quadrature_amplitudes(double x, std::span<double> out) {
  if (out.empty()) return;
  // Normalized Hermite functions phi_m(y) at y = sqrt(2) x; psi_m(x) = 2^{1/4} phi_m(y).
  const double y = std::numbers::sqrt2 * x;
  const double scale = std::pow(2.0, 0.25);
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * y * y);
  out[0] = scale * cur;
  for (std::size_t m = 0; m + 1 < out.size(); ++m) {
    const double md = static_cast<double>(m);
    const double next = std::sqrt(2.0 / (md + 1.0)) * y * cur - std::sqrt(md / (md + 1.0)) * prev;
    prev = cur;
    cur = next;
    out[m + 1] = scale * cur;
  }
}

double fock_quadrature_amplitude(int m, double x) {
  if (m < 0) throw ValidationError("fock_quadrature_amplitude: negative Fock index");
  std::vector<double> buf(static_cast<std::size_t>(m) + 1);
  fock_quadrature_amplitudes(x, buf);
  return buf.back();
}

}  // namespace qcal
