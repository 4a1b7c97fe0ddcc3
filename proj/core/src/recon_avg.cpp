#include "qcal/recon_avg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qcal/errors.hpp"
#include "qcal/parallel.hpp"

namespace qcal {

namespace {

double safe_sqrt(double v) { return v > 0.0 ? std::sqrt(v) : 0.0; }

}  // namespace

ConditionedEstimates estimate_conditioned_finite(const FrequencyTable& table,
                                                 const FiniteQuorum& quorum, const DualSet& duals,
                                                 const NoiseMap* noise) {
  if (table.weight.size() != quorum.num_settings() || duals.duals.size() != quorum.num_settings()) {
    throw DimensionMismatch("estimate_conditioned_finite: table, quorum and duals disagree");
  }
  const DualSet effective = noise != nullptr ? noise_corrected_duals(duals, *noise) : duals;
  const double n_settings = static_cast<double>(quorum.num_settings());
  std::vector<ComplexOperator> contributions;
  for (std::size_t k = 0; k < quorum.num_settings(); ++k) {
    for (std::size_t m = 0; m < quorum.num_results(k); ++m) {
      contributions.push_back(n_settings * effective.at(k, m).adjoint());
    }
  }

  ConditionedEstimates out;
  out.kind = DatasetKind::finite;
  out.sample_count = table.sample_count;
  const double total = table.total();
  const Index d = quorum.dim;
  for (std::size_t n = 0; n < table.n_outcomes; ++n) {
    std::vector<double> w;
    for (std::size_t k = 0; k < quorum.num_settings(); ++k) {
      for (std::size_t m = 0; m < quorum.num_results(k); ++m) {
        w.push_back(table.weight[k](static_cast<Index>(n), static_cast<Index>(m)));
      }
    }
    double wn = 0.0;
    for (double v : w) wn += v;
    if (!(wn > 0.0)) {
      out.unobserved.push_back(static_cast<int>(n));
      continue;
    }
    ConditionedEstimate est;
    est.outcome = static_cast<int>(n);
    est.weight = wn;
    est.p_hat = wn / total;
    est.rho_hat = ComplexOperator::Zero(d, d);
    RealMatrix sq_re = RealMatrix::Zero(d, d);
    RealMatrix sq_im = RealMatrix::Zero(d, d);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double f = w[j] / wn;
      est.conditional_freq.push_back(f);
      est.rho_hat += f * contributions[j];
      sq_re += f * contributions[j].real().cwiseAbs2();
      sq_im += f * contributions[j].imag().cwiseAbs2();
    }
    est.contributions = contributions;
    if (table.exact()) {
      est.stderr_re = RealMatrix::Zero(d, d);
      est.stderr_im = RealMatrix::Zero(d, d);
    } else {
      const double inv = 1.0 / wn;
      est.stderr_re = ((sq_re - est.rho_hat.real().cwiseAbs2()) * inv).unaryExpr(&safe_sqrt);
      est.stderr_im = ((sq_im - est.rho_hat.imag().cwiseAbs2()) * inv).unaryExpr(&safe_sqrt);
      est.p_stderr = safe_sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(table.sample_count));
    }
    out.estimates.push_back(std::move(est));
  }
  return out;
}

ConditionedEstimates estimate_conditioned_homodyne(const Dataset& data, const HomodyneQuorum& hq,
                                                   unsigned workers) {
  if (data.kind != DatasetKind::homodyne) {
    throw UnsupportedStructure("estimate_conditioned_homodyne: dataset is not homodyne");
  }
  std::size_t n_outcomes = data.counts_by_n.size();
  for (const auto& r : data.records) n_outcomes = std::max(n_outcomes, static_cast<std::size_t>(r.outcome) + 1);
  const Index nm = hq.kernels.values.rows();

  // Fixed-size chunks summed independently and combined in chunk order, so
  // the result does not depend on the number of workers.
  constexpr std::size_t chunk = 1u << 15;
  const std::size_t n_chunks = (data.size() + chunk - 1) / chunk;
  struct Partial {
    RealMatrix sum, sumsq;
    std::vector<std::size_t> count;
    std::size_t clipped = 0;
  };
  std::vector<Partial> partials(n_chunks);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    Partial& p = partials[c];
    p.sum = RealMatrix::Zero(nm, static_cast<Index>(n_outcomes));
    p.sumsq = RealMatrix::Zero(nm, static_cast<Index>(n_outcomes));
    p.count.assign(n_outcomes, 0);
    std::vector<double> k(static_cast<std::size_t>(nm));
    const std::size_t end = std::min(data.size(), (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const auto& r = data.records[i];
      if (!hq.kernels.evaluate_all(r.result, k)) ++p.clipped;
      ++p.count[static_cast<std::size_t>(r.outcome)];
      for (Index m = 0; m < nm; ++m) {
        p.sum(m, r.outcome) += k[static_cast<std::size_t>(m)];
        p.sumsq(m, r.outcome) += k[static_cast<std::size_t>(m)] * k[static_cast<std::size_t>(m)];
      }
    }
  });
  RealMatrix sum = RealMatrix::Zero(nm, static_cast<Index>(n_outcomes));
  RealMatrix sumsq = sum;
  std::vector<std::size_t> count(n_outcomes, 0);
  ConditionedEstimates out;
  out.kind = DatasetKind::homodyne;
  out.sample_count = data.size();
  for (const auto& p : partials) {
    sum += p.sum;
    sumsq += p.sumsq;
    for (std::size_t n = 0; n < n_outcomes; ++n) count[n] += p.count[n];
    out.clipped += p.clipped;
  }
  const double total = static_cast<double>(data.size());
  out.clipped_fraction = total > 0 ? static_cast<double>(out.clipped) / total : 0.0;
  if (out.clipped_fraction > 1e-3) {
    out.warnings.push_back("fraction " + std::to_string(out.clipped_fraction) +
                           " of quadrature values fell outside the kernel grid");
  }
  for (std::size_t n = 0; n < n_outcomes; ++n) {
    if (count[n] == 0) {
      out.unobserved.push_back(static_cast<int>(n));
      continue;
    }
    const double c = static_cast<double>(count[n]);
    ConditionedEstimate est;
    est.outcome = static_cast<int>(n);
    est.weight = c;
    est.p_hat = c / total;
    est.p_stderr = safe_sqrt(est.p_hat * (1.0 - est.p_hat) / total);
    est.diag_hat = sum.col(static_cast<Index>(n)) / c;
    est.diag_stderr = RealVector::Zero(nm);
    if (count[n] > 1) {
      for (Index m = 0; m < nm; ++m) {
        const double var = (sumsq(m, static_cast<Index>(n)) - c * est.diag_hat(m) * est.diag_hat(m)) / (c - 1.0);
        est.diag_stderr(m) = safe_sqrt(var / c);
      }
    }
    out.estimates.push_back(std::move(est));
  }
  return out;
}

ConditionedEstimates exact_conditioned_homodyne(const TwinBeam& R, const Povm& povm,
                                                const HomodyneQuorum& hq) {
  if (povm.dim != R.dim()) throw DimensionMismatch("exact_conditioned_homodyne: dimension mismatch");
  if (!povm.is_diagonal()) throw UnsupportedStructure("exact_conditioned_homodyne: non-diagonal POVM");
  const KernelTable& kt = hq.kernels;
  const Index npts = kt.values.cols();
  const Index nj = R.dim();
  // overlap(m, j) = int K_m q_j dx by trapezoid on the kernel grid.
  RealMatrix q(nj, npts);
  std::vector<double> buf(static_cast<std::size_t>(nj));
  for (Index i = 0; i < npts; ++i) {
    smeared_fock_pdfs(hq.eta_h, kt.grid.at(i), buf);
    const double wi = (i == 0 || i == npts - 1) ? 0.5 * kt.grid.step : kt.grid.step;
    for (Index j = 0; j < nj; ++j) q(j, i) = wi * buf[static_cast<std::size_t>(j)];
  }
  const RealMatrix overlap = kt.values * q.transpose();
  const RealMatrix diag = povm.diagonals();

  ConditionedEstimates out;
  out.kind = DatasetKind::homodyne;
  out.sample_count = 0;
  for (Index n = 0; n < diag.rows(); ++n) {
    const RealVector joint = R.weights.cwiseProduct(diag.row(n).transpose());
    const double pn = joint.sum();
    if (!(pn > 0.0)) {
      out.unobserved.push_back(static_cast<int>(n));
      continue;
    }
    ConditionedEstimate est;
    est.outcome = static_cast<int>(n);
    est.weight = pn;
    est.p_hat = pn;
    est.diag_hat = overlap * (joint / pn);
    est.diag_stderr = RealVector::Zero(est.diag_hat.size());
    out.estimates.push_back(std::move(est));
  }
  return out;
}

PovmEstimate recover_povm(const ConditionedEstimates& estimates, const MapR& map) {
  if (estimates.kind != DatasetKind::finite) {
    throw UnsupportedStructure("recover_povm: use recover_povm_diagonal for homodyne estimates");
  }
  PovmEstimate out;
  out.dim = map.dim_system;
  const Index d = map.dim_system;
  out.completeness_sum = ComplexOperator::Zero(d, d);
  out.completeness_stderr_re = RealMatrix::Zero(d, d);
  out.completeness_stderr_im = RealMatrix::Zero(d, d);
  if (estimates.estimates.empty()) return out;

  // Every estimate shares the same contribution list; map each through R^{-1} once.
  const auto& contribs = estimates.estimates.front().contributions;
  std::vector<ComplexOperator> mapped;
  mapped.reserve(contribs.size());
  for (const auto& c : contribs) mapped.push_back(invert_map_R(map, c));

  const bool exact = estimates.sample_count == 0;
  const double n_total = static_cast<double>(estimates.sample_count);
  std::vector<double> marginal(mapped.size(), 0.0);
  Povm raw;
  raw.dim = d;
  for (const auto& est : estimates.estimates) {
    ComplexOperator p = ComplexOperator::Zero(d, d);
    RealMatrix sq_re = RealMatrix::Zero(d, d);
    RealMatrix sq_im = RealMatrix::Zero(d, d);
    for (std::size_t j = 0; j < mapped.size(); ++j) {
      // Joint frequency of (n, j) among all records.
      const double a = est.p_hat * est.conditional_freq[j];
      marginal[j] += a;
      p += a * mapped[j];
      sq_re += a * mapped[j].real().cwiseAbs2();
      sq_im += a * mapped[j].imag().cwiseAbs2();
    }
    out.outcomes.push_back(est.outcome);
    if (exact) {
      out.stderr_re.push_back(RealMatrix::Zero(d, d));
      out.stderr_im.push_back(RealMatrix::Zero(d, d));
    } else {
      out.stderr_re.push_back(((sq_re - p.real().cwiseAbs2()) / n_total).unaryExpr(&safe_sqrt));
      out.stderr_im.push_back(((sq_im - p.imag().cwiseAbs2()) / n_total).unaryExpr(&safe_sqrt));
    }
    out.completeness_sum += p;
    out.elements.push_back(p);
    raw.elements.push_back(std::move(p));
  }
  if (!exact) {
    RealMatrix sq_re = RealMatrix::Zero(d, d);
    RealMatrix sq_im = RealMatrix::Zero(d, d);
    for (std::size_t j = 0; j < mapped.size(); ++j) {
      sq_re += marginal[j] * mapped[j].real().cwiseAbs2();
      sq_im += marginal[j] * mapped[j].imag().cwiseAbs2();
    }
    out.completeness_stderr_re =
        ((sq_re - out.completeness_sum.real().cwiseAbs2()) / n_total).unaryExpr(&safe_sqrt);
    out.completeness_stderr_im =
        ((sq_im - out.completeness_sum.imag().cwiseAbs2()) / n_total).unaryExpr(&safe_sqrt);
  }
  out.report = check_povm(raw);
  return out;
}

Index DiagonalPovmEstimate::row_of(int n) const {
  const auto it = std::find(outcomes.begin(), outcomes.end(), n);
  return it == outcomes.end() ? -1 : static_cast<Index>(it - outcomes.begin());
}

DiagonalPovmEstimate recover_povm_diagonal(const ConditionedEstimates& estimates,
                                           const DiagonalMapR& map) {
  if (estimates.kind != DatasetKind::homodyne) {
    throw UnsupportedStructure("recover_povm_diagonal: estimates are not photon-number diagonal");
  }
  DiagonalPovmEstimate out;
  if (estimates.estimates.empty()) return out;
  const Index nm = std::min<Index>(estimates.estimates.front().diag_hat.size(), map.weights.size());
  const auto rows = static_cast<Index>(estimates.estimates.size());
  out.value = RealMatrix::Zero(rows, nm);
  out.stderr = RealMatrix::Zero(rows, nm);
  for (Index r = 0; r < rows; ++r) {
    const auto& est = estimates.estimates[static_cast<std::size_t>(r)];
    out.outcomes.push_back(est.outcome);
    for (Index m = 0; m < nm; ++m) {
      const double inv_w = map.inverse_weight(m);
      const double rho = est.diag_hat(m);
      out.value(r, m) = est.p_hat * rho * inv_w;
      // Linear propagation through p_n * rho_n, including the binomial spread of p_n.
      const double se = std::sqrt(est.p_hat * est.p_hat * est.diag_stderr(m) * est.diag_stderr(m) +
                                  rho * rho * est.p_stderr * est.p_stderr);
      out.stderr(r, m) = se * inv_w;
    }
  }
  out.completeness_deviation =
      (out.value.colwise().sum().array() - 1.0).abs().maxCoeff();
  return out;
}

Povm project_to_povm(const PovmEstimate& estimate) {
  Povm povm;
  povm.dim = estimate.dim;
  ComplexOperator sum = ComplexOperator::Zero(estimate.dim, estimate.dim);
  std::vector<ComplexOperator> clipped;
  for (const auto& e : estimate.elements) {
    clipped.push_back(psd_power(e, 1.0));
    sum += clipped.back();
  }
  const ComplexOperator s = psd_power(sum, -0.5);
  for (const auto& c : clipped) {
    const ComplexOperator p = s * c * s;
    povm.elements.push_back(0.5 * (p + p.adjoint()));
  }
  return povm;
}

}  // namespace qcal
