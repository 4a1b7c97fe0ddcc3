#include "qcal/detectors.hpp"

#include <cmath>
#include <string>

#include <Eigen/Sparse>

#include "qcal/errors.hpp"
#include "qcal/random.hpp"

namespace qcal {

namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// p^k (1-p)^(n-k) C(n,k) without overflow; handles p in {0, 1}.
double binomial_pmf(int n, int k, double p) {
  if (k < 0 || k > n) return 0.0;
  if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_binomial(n, k) + k * std::log(p) + (n - k) * std::log1p(-p));
}

void check_photocounter_args(double eta_p, double nu, int fock_cutoff, int env_cutoff) {
  if (!(eta_p > 0.0 && eta_p <= 1.0)) throw ValidationError("photocounter: eta_p must lie in (0,1]");
  if (!(nu >= 0.0)) throw ValidationError("photocounter: nu must be non-negative");
  if (fock_cutoff < 0 || env_cutoff < 0) throw ValidationError("photocounter: negative cutoff");
}

}  // namespace

bool Povm::is_diagonal(double tol) const {
  for (const auto& e : elements) {
    for (Index i = 0; i < e.rows(); ++i) {
      for (Index j = 0; j < e.cols(); ++j) {
        if (i != j && std::abs(e(i, j)) > tol) return false;
      }
    }
  }
  return true;
}

RealMatrix Povm::diagonals() const {
  RealMatrix out(static_cast<Index>(elements.size()), dim);
  for (std::size_t n = 0; n < elements.size(); ++n) {
    out.row(static_cast<Index>(n)) = elements[n].diagonal().real().transpose();
  }
  return out;
}

PovmReport check_povm(const Povm& povm) {
  PovmReport report;
  report.min_eigenvalue = std::numeric_limits<double>::infinity();
  ComplexOperator sum = ComplexOperator::Zero(povm.dim, povm.dim);
  for (const auto& e : povm.elements) {
    if (e.rows() != povm.dim || e.cols() != povm.dim) {
      throw DimensionMismatch("check_povm: element dimension mismatch");
    }
    const HermitianCheckReport r = positivity_report(e);
    report.max_antihermitian_deviation =
        std::max(report.max_antihermitian_deviation, r.max_antihermitian_deviation);
    report.min_eigenvalue = std::min(report.min_eigenvalue, r.min_eigenvalue);
    sum += e;
  }
  if (povm.elements.empty()) report.min_eigenvalue = 0.0;
  sum -= ComplexOperator::Identity(povm.dim, povm.dim);
  report.completeness_deviation = sum.size() > 0 ? sum.cwiseAbs().maxCoeff() : 0.0;
  return report;
}

Povm povm_from_diagonals(const RealMatrix& response) {
  Povm povm;
  povm.dim = response.cols();
  povm.elements.reserve(static_cast<std::size_t>(response.rows()));
  for (Index n = 0; n < response.rows(); ++n) {
    povm.elements.emplace_back(response.row(n).transpose().cast<Complex>().asDiagonal());
  }
  return povm;
}

Povm projective_povm(std::span<const ComplexVector> basis) {
  if (basis.empty()) throw ValidationError("projective_povm: empty basis");
  const Index d = basis.front().size();
  if (static_cast<Index>(basis.size()) != d) {
    throw ValidationError("projective_povm: need exactly " + std::to_string(d) + " vectors");
  }
  Eigen::MatrixXcd v(d, d);
  for (Index i = 0; i < d; ++i) {
    if (basis[static_cast<std::size_t>(i)].size() != d) {
      throw ValidationError("projective_povm: vectors of unequal length");
    }
    v.col(i) = basis[static_cast<std::size_t>(i)];
  }
  const double gram_dev = (v.adjoint() * v - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff();
  if (gram_dev >= 1e-10) {
    throw ValidationError("projective_povm: basis is not orthonormal (Gram deviation " +
                          std::to_string(gram_dev) + ")");
  }
  Povm povm;
  povm.dim = d;
  for (Index i = 0; i < d; ++i) povm.elements.emplace_back(v.col(i) * v.col(i).adjoint());
  return povm;
}

RealVector thermal_distribution(double nu, int cutoff) {
  RealVector p(cutoff + 1);
  const double ratio = nu / (1.0 + nu);
  double term = 1.0 / (1.0 + nu);
  for (int j = 0; j <= cutoff; ++j) {
    p(j) = term;
    term *= ratio;
  }
  return p;
}

double thermal_tail_mass(double nu, int cutoff) {
  return std::pow(nu / (1.0 + nu), cutoff + 1);
}

RealMatrix photocounter_response(double eta_p, double nu, int fock_cutoff, int env_cutoff) {
  check_photocounter_args(eta_p, nu, fock_cutoff, env_cutoff);
  // Thermal attenuator (eta, nu) = amplifier(gain) o pure loss(eta / gain),
  // with gain = 1 + (1 - eta) nu.
  const double gain = 1.0 + (1.0 - eta_p) * nu;
  const double loss_eta = eta_p / gain;
  const int kmax = fock_cutoff + env_cutoff;
  RealMatrix response = RealMatrix::Zero(kmax + 1, fock_cutoff + 1);
  const double inv_gain = 1.0 / gain;
  const double log_inv_gain = std::log(inv_gain);
  const double log_excess = std::log1p(-inv_gain);
  for (int n = 0; n <= fock_cutoff; ++n) {
    for (int l = 0; l <= n; ++l) {
      const double after_loss = binomial_pmf(n, l, loss_eta);
      if (after_loss == 0.0) continue;
      for (int k = l; k < kmax; ++k) {
        // Quantum-limited amplifier: P(k|l) = C(k,l) g^{-(l+1)} (1 - 1/g)^{k-l}.
        double amp;
        if (gain == 1.0) {
          amp = (k == l) ? 1.0 : 0.0;
        } else {
          amp = std::exp(log_binomial(k, l) + (l + 1) * log_inv_gain + (k - l) * log_excess);
        }
        response(k, n) += after_loss * amp;
      }
    }
    const double assigned = response.col(n).head(kmax).sum();
    response(kmax, n) = std::max(0.0, 1.0 - assigned);
  }
  return response;
}

RealMatrix photocounter_response_reference(double eta_p, double nu, int fock_cutoff,
                                           int env_cutoff) {
  check_photocounter_args(eta_p, nu, fock_cutoff, env_cutoff);
  // Per-mode cutoff large enough that every block of fixed total photon number
  // reachable from the inputs lies entirely inside the truncated space.
  const int c = fock_cutoff + env_cutoff;
  const Index dm = c + 1;
  const Index dim = dm * dm;
  auto idx = [dm](Index n1, Index n2) { return n1 * dm + n2; };

  // Generator G = a1^dag a2 - a1 a2^dag on the truncated tensor space; real in the Fock basis.
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index n1 = 0; n1 < dm; ++n1) {
    for (Index n2 = 0; n2 < dm; ++n2) {
      if (n1 + 1 < dm && n2 >= 1) {
        const double amp = std::sqrt(static_cast<double>((n1 + 1) * n2));
        triplets.emplace_back(idx(n1 + 1, n2 - 1), idx(n1, n2), amp);
      }
      if (n1 >= 1 && n2 + 1 < dm) {
        const double amp = std::sqrt(static_cast<double>(n1 * (n2 + 1)));
        triplets.emplace_back(idx(n1 - 1, n2 + 1), idx(n1, n2), -amp);
      }
    }
  }
  Eigen::SparseMatrix<double> generator(dim, dim);
  generator.setFromTriplets(triplets.begin(), triplets.end());

  // U = exp(theta G), cos(theta) = sqrt(eta_p), applied by Taylor series over
  // substeps short enough that each series converges without cancellation.
  const double theta = std::acos(std::sqrt(eta_p));
  const double norm_bound = theta * 2.0 * static_cast<double>(dm);
  const int substeps = std::max(1, static_cast<int>(std::ceil(norm_bound / 0.5)));
  const double h = theta / substeps;
  auto apply_unitary = [&](RealVector v) {
    for (int s = 0; s < substeps; ++s) {
      RealVector term = v;
      RealVector acc = v;
      for (int k = 1; k <= 40; ++k) {
        term = (h / k) * (generator * term);
        acc += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
      }
      v = std::move(acc);
    }
    return v;
  };

  const RealVector thermal = thermal_distribution(nu, env_cutoff);
  RealMatrix response = RealMatrix::Zero(c + 1, fock_cutoff + 1);
  for (int n = 0; n <= fock_cutoff; ++n) {
    for (int j = 0; j <= env_cutoff; ++j) {
      if (thermal(j) == 0.0) continue;
      RealVector in = RealVector::Zero(dim);
      in(idx(n, j)) = 1.0;
      const RealVector out = apply_unitary(std::move(in));
      // Trace out the environment: detector registers k photons in mode 1.
      for (Index k = 0; k <= c; ++k) {
        response(k, n) += thermal(j) * out.segment(k * dm, dm).squaredNorm();
      }
    }
    const double assigned = response.col(n).head(c).sum();
    response(c, n) = std::max(0.0, 1.0 - assigned);
  }
  return response;
}

Povm noisy_photocounter(double eta_p, double nu, int fock_cutoff, int env_cutoff) {
  check_photocounter_args(eta_p, nu, fock_cutoff, env_cutoff);
  const double tail = thermal_tail_mass(nu, env_cutoff);
  if (tail >= 1e-8) {
    throw CutoffError("noisy_photocounter: thermal tail mass " + std::to_string(tail) +
                      " above env_cutoff " + std::to_string(env_cutoff) + " is not below 1e-8");
  }
  return povm_from_diagonals(photocounter_response(eta_p, nu, fock_cutoff, env_cutoff));
}

Povm random_povm(Index dim, int n_outcomes, std::uint64_t seed) {
  if (n_outcomes < 1) throw ValidationError("random_povm: need at least one outcome");
  if (dim < 1) throw ValidationError("random_povm: dimension must be positive");
  Povm povm;
  povm.dim = dim;
  if (n_outcomes == 1) {
    povm.elements.push_back(ComplexOperator::Identity(dim, dim));
    return povm;
  }
  Rng rng(seed);
  std::vector<ComplexOperator> raw;
  ComplexOperator sum = ComplexOperator::Zero(dim, dim);
  for (int n = 0; n < n_outcomes; ++n) {
    ComplexOperator g(dim, dim);
    for (Index j = 0; j < dim; ++j) {
      for (Index i = 0; i < dim; ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        g(i, j) = Complex(re, im);
      }
    }
    raw.push_back(g * g.adjoint());
    sum += raw.back();
  }
  const ComplexOperator s_inv_half = psd_power(sum, -0.5);
  for (const auto& p : raw) {
    ComplexOperator e = s_inv_half * p * s_inv_half;
    povm.elements.push_back(0.5 * (e + e.adjoint()));
  }
  return povm;
}

std::vector<double> born_probabilities(const Povm& povm, const ComplexOperator& rho) {
  if (rho.rows() != povm.dim || rho.cols() != povm.dim) {
    throw DimensionMismatch("born_probabilities: state dimension " + std::to_string(rho.rows()) +
                            " does not match POVM dimension " + std::to_string(povm.dim));
  }
  std::vector<double> p;
  p.reserve(povm.size());
  for (const auto& e : povm.elements) p.push_back((rho * e).trace().real());
  return p;
}

}  // namespace qcal
