#include "qcal/recon_ml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qcal/errors.hpp"
#include "qcal/parallel.hpp"

namespace qcal {

namespace {

constexpr double kProbabilityFloor = 1e-300;
constexpr std::size_t kChunk = 4096;

double safe_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

// One pass over the data: log-likelihood of theta and the EM score
// score(g, m) = sum_{i in g} r_i[m] / L_i.
struct Pass {
  double ll = 0.0;
  RealMatrix score;
};

Pass e_pass(const DiagonalMlProblem& pr, const RealMatrix& theta, unsigned workers) {
  const auto groups = pr.outcomes.size();
  const Index nm = theta.cols();
  // Chunks never straddle a group boundary, which keeps the row lookup trivial.
  struct Chunk {
    std::size_t group, begin, end;
  };
  std::vector<Chunk> chunks;
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t b = pr.group_offsets[g]; b < pr.group_offsets[g + 1]; b += kChunk) {
      chunks.push_back({g, b, std::min(b + kChunk, pr.group_offsets[g + 1])});
    }
  }
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> th_rows = theta;
  std::vector<double> ll(chunks.size(), 0.0);
  RealMatrix partial = RealMatrix::Zero(static_cast<Index>(chunks.size()), nm);
  parallel_for(chunks.size(), workers, [&](std::size_t c) {
    const auto& ch = chunks[c];
    const auto th = th_rows.row(static_cast<Index>(ch.group));
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(nm);
    double s = 0.0;
    for (std::size_t i = ch.begin; i < ch.end; ++i) {
      const auto r = pr.rows.row(static_cast<Index>(i));
      const double li = std::max(r.dot(th), kProbabilityFloor);
      s += std::log(li);
      acc.noalias() += r / li;
    }
    ll[c] = s;
    partial.row(static_cast<Index>(c)) = acc;
  });
  Pass out;
  out.score = RealMatrix::Zero(theta.rows(), nm);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    out.ll += ll[c];
    out.score.row(static_cast<Index>(chunks[c].group)) += partial.row(static_cast<Index>(c));
  }
  return out;
}

RealMatrix em_update(const RealMatrix& theta, const RealMatrix& score) {
  const RealMatrix g = theta.cwiseProduct(score);
  const RealVector lambda = g.colwise().sum().transpose();
  RealMatrix next = theta;
  for (Index m = 0; m < theta.cols(); ++m) {
    if (lambda(m) > 0.0) next.col(m) = g.col(m) / lambda(m);
  }
  // Entries decaying toward zero would otherwise drift into subnormal range
  // and slow every later pass.
  return next.unaryExpr([](double v) { return v < 1e-200 ? 0.0 : v; });
}

void finish_diagonal(MlResult& res, const RealMatrix& theta) {
  res.diagonals = theta;
  res.povm = povm_from_diagonals(theta);
  res.completeness_deviation = (theta.colwise().sum().array() - 1.0).abs().maxCoeff();
  res.min_eigenvalue = theta.minCoeff();
}

std::vector<double> finite_probabilities(const FiniteMlProblem& pr,
                                         const std::vector<ComplexOperator>& povm) {
  const auto nj = pr.probes.size();
  std::vector<double> p(povm.size() * nj);
  for (std::size_t g = 0; g < povm.size(); ++g) {
    for (std::size_t j = 0; j < nj; ++j) p[g * nj + j] = hs_inner(povm[g], pr.probes[j]).real();
  }
  return p;
}

// Gradient of L / total with respect to each element.
std::vector<ComplexOperator> finite_score(const FiniteMlProblem& pr,
                                          const std::vector<ComplexOperator>& povm) {
  const auto p = finite_probabilities(pr, povm);
  const auto nj = pr.probes.size();
  const double total = pr.counts.sum();
  std::vector<ComplexOperator> out;
  for (std::size_t g = 0; g < povm.size(); ++g) {
    ComplexOperator r = ComplexOperator::Zero(pr.dim, pr.dim);
    if (static_cast<Index>(g) < pr.counts.rows()) {
      for (std::size_t j = 0; j < nj; ++j) {
        const double c = pr.counts(static_cast<Index>(g), static_cast<Index>(j));
        if (c > 0.0) r += (c / std::max(p[g * nj + j], kProbabilityFloor) / total) * pr.probes[j];
      }
    }
    out.push_back(0.5 * (r + r.adjoint()));
  }
  return out;
}

// P_n <- lambda^{-1/2} G_n lambda^{-1/2}; false when lambda is singular.
bool normalize(std::vector<ComplexOperator>& g) {
  ComplexOperator lambda = ComplexOperator::Zero(g.front().rows(), g.front().cols());
  for (const auto& x : g) lambda += x;
  Eigen::SelfAdjointEigenSolver<ComplexOperator> es(0.5 * (lambda + lambda.adjoint()));
  if (es.eigenvalues().minCoeff() <= 1e-14 * std::max(1.0, es.eigenvalues().maxCoeff())) return false;
  const ComplexOperator s = psd_power(lambda, -0.5);
  for (auto& x : g) {
    x = s * x * s;
    x = 0.5 * (x + x.adjoint());
  }
  return true;
}

void finish_finite(MlResult& res, const std::vector<ComplexOperator>& povm) {
  res.povm.dim = povm.front().rows();
  res.povm.elements = povm;
  const PovmReport rep = check_povm(res.povm);
  res.completeness_deviation = rep.completeness_deviation;
  res.min_eigenvalue = rep.min_eigenvalue;
}

}  // namespace

Index MlResult::row_of(int n) const {
  const auto it = std::find(outcomes.begin(), outcomes.end(), n);
  return it == outcomes.end() ? -1 : static_cast<Index>(it - outcomes.begin());
}

bool MlResult::trace_monotone(double slack) const {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] < trace[i - 1] - slack) return false;
  }
  return true;
}

DiagonalMlProblem build_problem_diagonal(const Dataset& data, const TwinBeam& R,
                                         const HomodyneQuorum& hq, int fock_cutoff) {
  if (data.kind != DatasetKind::homodyne) {
    throw UnsupportedStructure("build_problem_diagonal: dataset is not homodyne");
  }
  if (fock_cutoff < 0 || fock_cutoff > R.fock_cutoff) {
    throw ValidationError("build_problem_diagonal: cutoff must lie within the state truncation");
  }
  DiagonalMlProblem pr;
  pr.fock_cutoff = fock_cutoff;
  pr.tail_weight = std::pow(R.xi, 2.0 * (fock_cutoff + 1));
  if (pr.tail_weight > 1e-4) {
    throw CutoffError("build_problem_diagonal: state weight " + std::to_string(pr.tail_weight) +
                      " above the Hilbert-space cutoff exceeds 1e-4");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.records[a].outcome < data.records[b].outcome;
  });
  const Index nm = fock_cutoff + 1;
  pr.rows.resize(static_cast<Index>(data.size()), nm);
  std::vector<double> q(static_cast<std::size_t>(nm));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& rec = data.records[order[i]];
    if (pr.outcomes.empty() || pr.outcomes.back() != rec.outcome) {
      pr.outcomes.push_back(rec.outcome);
      pr.group_offsets.push_back(i);
    }
    smeared_fock_pdfs(hq.eta_h, rec.result, q);
    for (Index m = 0; m < nm; ++m) {
      pr.rows(static_cast<Index>(i), m) = R.weights(m) * q[static_cast<std::size_t>(m)];
    }
  }
  pr.group_offsets.push_back(order.size());
  return pr;
}

FiniteMlProblem build_problem_finite(const FrequencyTable& table, const BipartiteState& R,
                                     const FiniteQuorum& quorum, const NoiseMap* noise) {
  FiniteMlProblem pr;
  pr.dim = R.dim_system;
  const auto probes = tomographer_probes(R, quorum, noise);
  for (const auto& setting : probes) {
    for (const auto& a : setting) pr.probes.push_back(a);
  }
  std::vector<RealVector> rows;
  for (std::size_t n = 0; n < table.n_outcomes; ++n) {
    RealVector row(static_cast<Index>(pr.probes.size()));
    Index j = 0;
    for (std::size_t k = 0; k < table.weight.size(); ++k) {
      for (Index m = 0; m < table.weight[k].cols(); ++m) {
        row(j++) = table.weight[k](static_cast<Index>(n), m);
      }
    }
    if (row.sum() > 0.0) {
      pr.outcomes.push_back(static_cast<int>(n));
      rows.push_back(row);
    }
  }
  pr.counts.resize(static_cast<Index>(rows.size()), static_cast<Index>(pr.probes.size()));
  for (std::size_t g = 0; g < rows.size(); ++g) pr.counts.row(static_cast<Index>(g)) = rows[g];
  return pr;
}

double log_likelihood(const DiagonalMlProblem& problem, const RealMatrix& theta) {
  return e_pass(problem, theta, 1).ll;
}

double log_likelihood(const FiniteMlProblem& problem, const std::vector<ComplexOperator>& povm) {
  const auto p = finite_probabilities(problem, povm);
  const auto nj = problem.probes.size();
  double ll = 0.0;
  for (Index g = 0; g < problem.counts.rows(); ++g) {
    for (std::size_t j = 0; j < nj; ++j) {
      const double c = problem.counts(g, static_cast<Index>(j));
      if (c > 0.0) ll += c * safe_log(p[static_cast<std::size_t>(g) * nj + j]);
    }
  }
  return ll;
}

MlResult maximize(const DiagonalMlProblem& problem, const MlOptions& options) {
  MlResult res;
  res.outcomes = problem.outcomes;
  res.outcomes.push_back(kCatchAllOutcome);
  const auto rows = static_cast<Index>(res.outcomes.size());
  RealMatrix theta = RealMatrix::Constant(rows, problem.fock_cutoff + 1, 1.0 / static_cast<double>(rows));

  // Each base point carries its likelihood and its EM image.
  Pass base = e_pass(problem, theta, options.workers);
  res.iterations = 1;
  res.trace.push_back(base.ll);
  RealMatrix t1 = em_update(theta, base.score);
  while (true) {
    if (res.iterations >= options.max_iters) {
      res.stop_reason = "max_iters";
      break;
    }
    Pass p1 = e_pass(problem, t1, options.workers);
    ++res.iterations;
    RealMatrix next = t1;
    Pass next_pass = std::move(p1);
    RealMatrix next_image = em_update(t1, next_pass.score);

    if (options.accelerate && res.iterations < options.max_iters) {
      // Squared extrapolation from theta through t1 and t2 = EM(t1).
      const RealMatrix& t2 = next_image;
      const RealMatrix r = t1 - theta;
      const RealMatrix v = t2 - 2.0 * t1 + theta;
      const double vn = v.squaredNorm();
      if (vn > 0.0) {
        double alpha = std::min(-1.0, -std::sqrt(r.squaredNorm() / vn));
        RealMatrix tn;
        for (int shrink = 0; shrink < 8; ++shrink) {
          tn = theta - 2.0 * alpha * r + alpha * alpha * v;
          if (tn.minCoeff() >= 0.0 || alpha == -1.0) break;
          alpha = std::min(-1.0, 0.5 * (alpha - 1.0));
        }
        tn = tn.cwiseMax(0.0);
        const RealVector cs = tn.colwise().sum().transpose();
        for (Index m = 0; m < tn.cols(); ++m) {
          if (cs(m) > 0.0) tn.col(m) /= cs(m);
        }
        Pass pn = e_pass(problem, tn, options.workers);
        ++res.iterations;
        if (pn.ll >= next_pass.ll) {
          next = std::move(tn);
          next_image = em_update(next, pn.score);
          next_pass = std::move(pn);
          ++res.extrapolation_steps;
        }
      }
    }

    const double gain = next_pass.ll - base.ll;
    if (gain < 0.0) {
      // Only reachable through rounding once the fixed point is reached.
      res.converged = true;
      res.stop_reason = "min_ll_increase";
      break;
    }
    theta = std::move(next);
    base = std::move(next_pass);
    t1 = std::move(next_image);
    res.trace.push_back(base.ll);
    if (gain < options.min_ll_increase) {
      res.converged = true;
      res.stop_reason = "min_ll_increase";
      break;
    }
  }
  finish_diagonal(res, theta);
  return res;
}

MlResult maximize(const FiniteMlProblem& problem, const MlOptions& options) {
  MlResult res;
  res.outcomes = problem.outcomes;
  res.outcomes.push_back(kCatchAllOutcome);
  const auto n_el = res.outcomes.size();
  const Index d = problem.dim;
  std::vector<ComplexOperator> povm(
      n_el, ComplexOperator::Identity(d, d) / static_cast<double>(n_el));
  double ll = log_likelihood(problem, povm);
  res.trace.push_back(ll);
  res.iterations = 1;

  auto em_candidate = [&](const std::vector<ComplexOperator>& score, double eps) {
    std::vector<ComplexOperator> g;
    g.reserve(n_el);
    const ComplexOperator id = ComplexOperator::Identity(d, d);
    for (std::size_t k = 0; k < n_el; ++k) {
      const ComplexOperator s = psd_power(povm[k], 0.5);
      const ComplexOperator mid = std::isinf(eps) ? score[k] : ((id + eps * score[k]) / (1.0 + eps)).eval();
      g.push_back(s * mid * s);
    }
    if (!normalize(g)) g.clear();
    return g;
  };

  auto gradient_candidate = [&](const std::vector<ComplexOperator>& score, double step) {
    ComplexOperator mean = ComplexOperator::Zero(d, d);
    for (const auto& s : score) mean += s;
    mean /= static_cast<double>(n_el);
    std::vector<ComplexOperator> g;
    for (std::size_t k = 0; k < n_el; ++k) g.push_back(psd_power(povm[k] + step * (score[k] - mean), 1.0));
    if (!normalize(g)) g.clear();
    return g;
  };

  while (true) {
    if (res.iterations >= options.max_iters) {
      res.stop_reason = "max_iters";
      break;
    }
    const auto score = finite_score(problem, povm);
    std::vector<ComplexOperator> accepted;
    double accepted_ll = ll;
    // Pure EM first, then diluted steps, then projected gradient ascent.
    std::vector<double> eps_list{std::numeric_limits<double>::infinity()};
    for (double e = 1.0; e > 1e-8; e *= 0.25) eps_list.push_back(e);
    for (double eps : eps_list) {
      auto cand = em_candidate(score, eps);
      if (cand.empty()) continue;
      const double cl = log_likelihood(problem, cand);
      ++res.iterations;
      if (cl >= ll) {
        accepted = std::move(cand);
        accepted_ll = cl;
        break;
      }
    }
    if (accepted.empty()) {
      for (double step = 1.0; step > 1e-10; step *= 0.25) {
        auto cand = gradient_candidate(score, step);
        if (cand.empty()) continue;
        const double cl = log_likelihood(problem, cand);
        ++res.iterations;
        if (cl >= ll) {
          accepted = std::move(cand);
          accepted_ll = cl;
          ++res.fallback_steps;
          break;
        }
      }
    }
    if (accepted.empty()) {
      res.converged = true;
      res.stop_reason = "no_ascent_step";
      break;
    }
    const double gain = accepted_ll - ll;
    povm = std::move(accepted);
    ll = accepted_ll;
    res.trace.push_back(ll);
    if (gain < options.min_ll_increase) {
      res.converged = true;
      res.stop_reason = "min_ll_increase";
      break;
    }
  }
  finish_finite(res, povm);
  return res;
}

nlohmann::json ml_result_to_json(const MlResult& result) {
  nlohmann::json j;
  j["outcomes"] = result.outcomes;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["stop_reason"] = result.stop_reason;
  j["extrapolation_steps"] = result.extrapolation_steps;
  j["fallback_steps"] = result.fallback_steps;
  j["completeness_deviation"] = result.completeness_deviation;
  j["min_eigenvalue"] = result.min_eigenvalue;
  j["trace"] = result.trace;
  if (result.diagonals.size() > 0) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index g = 0; g < result.diagonals.rows(); ++g) {
      std::vector<double> row(result.diagonals.cols());
      for (Index m = 0; m < result.diagonals.cols(); ++m) row[static_cast<std::size_t>(m)] = result.diagonals(g, m);
      rows.push_back(row);
    }
    j["diagonals"] = rows;
  } else {
    nlohmann::json els = nlohmann::json::array();
    for (const auto& e : result.povm.elements) {
      nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
      for (Index r = 0; r < e.rows(); ++r) {
        std::vector<double> a(e.cols()), b(e.cols());
        for (Index c = 0; c < e.cols(); ++c) {
          a[static_cast<std::size_t>(c)] = e(r, c).real();
          b[static_cast<std::size_t>(c)] = e(r, c).imag();
        }
        re.push_back(a);
        im.push_back(b);
      }
      els.push_back({{"re", re}, {"im", im}});
    }
    j["elements"] = els;
  }
  return j;
}

}  // namespace qcal
