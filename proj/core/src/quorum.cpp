#include "qcal/quorum.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include <Eigen/QR>

#include "qcal/errors.hpp"
#include "qcal/random.hpp"

namespace qcal {

ComplexOperator FiniteQuorum::projector(std::size_t k, std::size_t m) const {
  const ComplexVector& v = settings[k].basis[m];
  return v * v.adjoint();
}

std::vector<ComplexOperator> FiniteQuorum::projectors() const {
  std::vector<ComplexOperator> out;
  for (std::size_t k = 0; k < settings.size(); ++k) {
    for (std::size_t m = 0; m < settings[k].basis.size(); ++m) out.push_back(projector(k, m));
  }
  return out;
}

FiniteQuorum make_finite_quorum(std::vector<QuorumSetting> settings) {
  if (settings.empty()) throw ValidationError("make_finite_quorum: no settings");
  FiniteQuorum q;
  q.dim = settings.front().basis.empty() ? 0 : settings.front().basis.front().size();
  if (q.dim == 0) throw ValidationError("make_finite_quorum: empty basis");
  for (std::size_t k = 0; k < settings.size(); ++k) {
    auto& s = settings[k];
    if (static_cast<Index>(s.basis.size()) != q.dim) {
      throw ValidationError("make_finite_quorum: setting " + std::to_string(k) +
                            " does not have dim vectors");
    }
    if (s.labels.empty()) {
      for (std::size_t m = 0; m < s.basis.size(); ++m) s.labels.push_back(static_cast<double>(m));
    }
    if (s.labels.size() != s.basis.size()) {
      throw ValidationError("make_finite_quorum: label count mismatch");
    }
    Eigen::MatrixXcd v(q.dim, q.dim);
    for (Index i = 0; i < q.dim; ++i) {
      if (s.basis[static_cast<std::size_t>(i)].size() != q.dim) {
        throw ValidationError("make_finite_quorum: vector length mismatch");
      }
      v.col(i) = s.basis[static_cast<std::size_t>(i)];
    }
    const double dev =
        (v.adjoint() * v - Eigen::MatrixXcd::Identity(q.dim, q.dim)).cwiseAbs().maxCoeff();
    if (dev >= 1e-10) {
      throw ValidationError("make_finite_quorum: setting " + std::to_string(k) +
                            " is not orthonormal (deviation " + std::to_string(dev) + ")");
    }
  }
  q.settings = std::move(settings);

  const auto projs = q.projectors();
  Eigen::MatrixXcd stacked(q.dim * q.dim, static_cast<Index>(projs.size()));
  for (std::size_t a = 0; a < projs.size(); ++a) stacked.col(static_cast<Index>(a)) = vectorize(projs[a]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(stacked);
  qr.setThreshold(1e-10);
  q.span_check = qr.rank() == q.dim * q.dim;
  return q;
}

FiniteQuorum pauli_quorum() {
  const double r = 1.0 / std::numbers::sqrt2;
  const Complex i(0.0, 1.0);
  std::vector<QuorumSetting> s(3);
  s[0].basis = {ComplexVector{{r, r}}, ComplexVector{{r, -r}}};
  s[1].basis = {ComplexVector{{r, r * i}}, ComplexVector{{r, -r * i}}};
  s[2].basis = {ComplexVector{{1.0, 0.0}}, ComplexVector{{0.0, 1.0}}};
  for (auto& setting : s) setting.labels = {1.0, -1.0};
  return make_finite_quorum(std::move(s));
}

FiniteQuorum random_basis_quorum(Index dim, int n_settings, std::uint64_t seed) {
  if (dim < 1 || n_settings < 0) throw ValidationError("random_basis_quorum: bad arguments");
  Rng rng(seed);
  std::vector<QuorumSetting> settings;
  QuorumSetting computational;
  for (Index i = 0; i < dim; ++i) computational.basis.push_back(ComplexVector::Unit(dim, i));
  settings.push_back(std::move(computational));
  for (int k = 0; k < n_settings; ++k) {
    Eigen::MatrixXcd g(dim, dim);
    for (Index j = 0; j < dim; ++j) {
      for (Index i = 0; i < dim; ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        g(i, j) = Complex(re, im);
      }
    }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    const Eigen::MatrixXcd u = qr.householderQ() * Eigen::MatrixXcd::Identity(dim, dim);
    QuorumSetting s;
    for (Index i = 0; i < dim; ++i) s.basis.push_back(u.col(i));
    settings.push_back(std::move(s));
  }
  return make_finite_quorum(std::move(settings));
}

std::vector<ComplexOperator> dual_frame(std::span<const ComplexOperator> frame,
                                        double relative_tolerance) {
  if (frame.empty()) throw NotAQuorum("dual_frame: empty operator family");
  const Index d = frame.front().rows();
  const Index n = static_cast<Index>(frame.size());
  Eigen::MatrixXcd v(d * d, n);
  for (Index a = 0; a < n; ++a) {
    if (frame[static_cast<std::size_t>(a)].rows() != d) {
      throw DimensionMismatch("dual_frame: operators of unequal dimension");
    }
    v.col(a) = vectorize(frame[static_cast<std::size_t>(a)]);
  }
  const Eigen::MatrixXcd gram = v.adjoint() * v;
  const PseudoInverse pinv = pseudo_inverse(gram, relative_tolerance);
  if (pinv.rank < d * d) {
    throw NotAQuorum("dual_frame: family spans rank " + std::to_string(pinv.rank) + " of " +
                     std::to_string(d * d) + " operator dimensions");
  }
  const Eigen::MatrixXcd dual_vecs = v * pinv.matrix;
  std::vector<ComplexOperator> out;
  out.reserve(frame.size());
  for (Index a = 0; a < n; ++a) out.push_back(unvectorize(dual_vecs.col(a), d));
  return out;
}

DualSet compute_dual_set(const FiniteQuorum& quorum) {
  const auto projs = quorum.projectors();
  const auto flat = dual_frame(projs);
  DualSet out;
  std::size_t a = 0;
  for (std::size_t k = 0; k < quorum.num_settings(); ++k) {
    out.duals.emplace_back();
    for (std::size_t m = 0; m < quorum.num_results(k); ++m) out.duals.back().push_back(flat[a++]);
  }
  return out;
}

ComplexOperator NoiseMap::apply(const ComplexOperator& x) const {
  return unvectorize(superoperator * vectorize(x), dim);
}

ComplexOperator NoiseMap::apply_inverse(const ComplexOperator& x) const {
  return unvectorize(inverse_superoperator * vectorize(x), dim);
}

NoiseMap noise_map_from_superoperator(const Eigen::MatrixXcd& matrix, double max_condition) {
  if (matrix.rows() != matrix.cols()) {
    throw DimensionMismatch("noise_map_from_superoperator: matrix is not square");
  }
  const Index d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(matrix.rows()))));
  if (d * d != matrix.rows()) {
    throw DimensionMismatch("noise_map_from_superoperator: size is not a perfect square");
  }
  // Rank deficiency shows up as an infinite condition number.
  const PseudoInverse pinv = pseudo_inverse(matrix, 1.0 / std::max(max_condition, 1.0));
  if (!(pinv.condition_number <= max_condition)) {
    throw NonInvertibleNoise("noise map condition number " + std::to_string(pinv.condition_number) +
                             " exceeds bound " + std::to_string(max_condition));
  }
  return {d, matrix, pinv.matrix, pinv.condition_number};
}

NoiseMap invert_noise_map(const NoiseMap& map) {
  return {map.dim, map.inverse_superoperator, map.superoperator, map.condition_number};
}

Eigen::MatrixXcd depolarizing_superoperator(Index dim, double p) {
  const Index n = dim * dim;
  const ComplexVector vid = vectorize(ComplexOperator::Identity(dim, dim));
  return (1.0 - p) * Eigen::MatrixXcd::Identity(n, n) +
         (p / static_cast<double>(dim)) * vid * vid.transpose();
}

DualSet noise_corrected_duals(const DualSet& duals, const NoiseMap& noise) {
  const Eigen::MatrixXcd adj = noise.inverse_superoperator.adjoint();
  DualSet out;
  for (const auto& setting : duals.duals) {
    out.duals.emplace_back();
    for (const auto& c : setting) out.duals.back().push_back(unvectorize(adj * vectorize(c), noise.dim));
  }
  return out;
}

void smeared_fock_pdfs(double eta_h, double x, std::span<double> out) {
  if (out.empty()) return;
  if (!(eta_h > 0.0 && eta_h <= 1.0)) throw ValidationError("smeared_fock_pdf: eta_h must lie in (0,1]");
  const std::size_t n = out.size();
  std::vector<double> psi(n);
  const double root_eta = std::sqrt(eta_h);
  fock_quadrature_amplitudes(root_eta * x, psi);
  for (auto& v : psi) v *= v;
  if (eta_h == 1.0) {
    std::copy(psi.begin(), psi.end(), out.begin());
    return;
  }
  // Efficiency eta is a loss channel followed by rescaling x -> x / sqrt(eta):
  // q_j(x) = sqrt(eta) sum_l Bin(l; j, eta) psi_l(sqrt(eta) x)^2.
  const double ratio = eta_h / (1.0 - eta_h);
  const double log_loss = std::log1p(-eta_h);
  for (std::size_t j = 0; j < n; ++j) {
    double weight = std::exp(static_cast<double>(j) * log_loss);
    double acc = weight * psi[0];
    for (std::size_t l = 0; l < j; ++l) {
      weight *= static_cast<double>(j - l) / static_cast<double>(l + 1) * ratio;
      acc += weight * psi[l + 1];
    }
    out[j] = root_eta * acc;
  }
}

double smeared_fock_pdf(int m, double eta_h, double x) {
  if (m < 0) throw ValidationError("smeared_fock_pdf: negative Fock index");
  std::vector<double> buf(static_cast<std::size_t>(m) + 1);
  smeared_fock_pdfs(eta_h, x, buf);
  return buf.back();
}

Index KernelGrid::size() const {
  return static_cast<Index>(std::llround((x_max - x_min) / step)) + 1;
}

std::optional<double> KernelTable::evaluate(int m, double x) const {
  const double pos = (x - grid.x_min) / grid.step;
  const Index last = values.cols() - 1;
  if (!(pos >= 0.0) || pos > static_cast<double>(last)) return std::nullopt;
  const Index i = std::min(static_cast<Index>(pos), last - 1);
  const double t = pos - static_cast<double>(i);
  return (1.0 - t) * values(m, i) + t * values(m, i + 1);
}

bool KernelTable::evaluate_all(double x, std::span<double> out) const {
  const double pos = (x - grid.x_min) / grid.step;
  const Index last = values.cols() - 1;
  const Index rows = std::min<Index>(values.rows(), static_cast<Index>(out.size()));
  if (!(pos >= 0.0) || pos > static_cast<double>(last)) {
    std::fill(out.begin(), out.end(), 0.0);
    return false;
  }
  const Index i = std::min(static_cast<Index>(pos), last - 1);
  const double t = pos - static_cast<double>(i);
  for (Index m = 0; m < rows; ++m) {
    out[static_cast<std::size_t>(m)] = (1.0 - t) * values(m, i) + t * values(m, i + 1);
  }
  return true;
}

KernelTable build_diagonal_kernels(int fock_cutoff, double eta_h, const KernelGrid& grid,
                                   double ridge, double max_residual) {
  if (!(eta_h > 0.5 && eta_h <= 1.0)) {
    throw ValidationError("build_diagonal_kernels: efficiency noise is invertible only for "
                          "eta_h > 1/2 (got " + std::to_string(eta_h) + ")");
  }
  if (fock_cutoff < 0) throw ValidationError("build_diagonal_kernels: negative cutoff");
  if (!(grid.step > 0.0) || !(grid.x_max > grid.x_min)) {
    throw ValidationError("build_diagonal_kernels: empty grid");
  }
  const Index npts = grid.size();
  const Index nm = fock_cutoff + 1;

  // Trapezoid quadrature weights.
  RealVector w = RealVector::Constant(npts, grid.step);
  w(0) *= 0.5;
  w(npts - 1) *= 0.5;

  RealMatrix q(nm, npts);
  std::vector<double> buf(static_cast<std::size_t>(nm));
  for (Index i = 0; i < npts; ++i) {
    smeared_fock_pdfs(eta_h, grid.at(i), buf);
    for (Index m = 0; m < nm; ++m) q(m, i) = buf[static_cast<std::size_t>(m)];
  }

  // Least-norm solution of sum_i w_i K_m(x_i) q_j(x_i) = delta_mj lies in the
  // span of the q_j: K = C q with (G + lambda I) C = I, G_jl = <q_j, q_l>_w.
  const RealMatrix gram = q * w.asDiagonal() * q.transpose();
  Eigen::SelfAdjointEigenSolver<RealMatrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lambda = ridge * eig.eigenvalues().maxCoeff();
  const RealMatrix reg = gram + lambda * RealMatrix::Identity(nm, nm);
  const RealMatrix coeff = reg.ldlt().solve(RealMatrix::Identity(nm, nm));

  KernelTable table;
  table.grid = grid;
  table.fock_cutoff = fock_cutoff;
  table.eta_h = eta_h;
  table.ridge = ridge;
  table.values = coeff * q;
  const RealMatrix check = table.values * w.asDiagonal() * q.transpose();
  table.residual = (check - RealMatrix::Identity(nm, nm)).cwiseAbs().maxCoeff();
  if (!(table.residual < max_residual)) {
    throw KernelConstructionError("build_diagonal_kernels: unbiasedness residual " +
                                  std::to_string(table.residual) + " is not below " +
                                  std::to_string(max_residual) +
                                  "; widen or refine the grid, or lower the cutoff");
  }
  return table;
}

HomodyneQuorum make_homodyne_quorum(double eta_h, int fock_cutoff, const KernelGrid& grid,
                                    double ridge) {
  HomodyneQuorum hq;
  hq.eta_h = eta_h;
  hq.fock_cutoff = fock_cutoff;
  hq.smear_sigma2 = (1.0 - eta_h) / (4.0 * eta_h);
  hq.kernels = build_diagonal_kernels(fock_cutoff, eta_h, grid, ridge);
  return hq;
}

void write_kernel_csv(const KernelTable& table, std::ostream& out) {
  out << "x";
  for (Index m = 0; m < table.values.rows(); ++m) out << ",K_" << m;
  out << '\n';
  char buf[64];
  for (Index i = 0; i < table.values.cols(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", table.grid.at(i));
    out << buf;
    for (Index m = 0; m < table.values.rows(); ++m) {
      std::snprintf(buf, sizeof buf, ",%.17g", table.values(m, i));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace qcal
