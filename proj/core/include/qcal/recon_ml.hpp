#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcal/detectors.hpp"
#include "qcal/quorum.hpp"
#include "qcal/sampler.hpp"
#include "qcal/states.hpp"

namespace qcal {

/// Outcome label of the element that absorbs every outcome absent from the data.
inline constexpr int kCatchAllOutcome = -1;

struct MlOptions {
  double min_ll_increase = 1e-8;
  /// Bound on likelihood evaluations (one pass over the data each).
  int max_iters = 20000;
  /// Diagonal problems only: squared-extrapolation steps between EM steps,
  /// accepted only when they do not lower the likelihood.
  bool accelerate = true;
  unsigned workers = 0;
};

/// Photon-number diagonal problem: per-record response rows
/// r_i[m] = w_m q_m(x_i), so that L = sum_i log sum_m r_i[m] <m|P_{n_i}|m>.
struct DiagonalMlProblem {
  int fock_cutoff = 0;
  /// Observed outcomes in ascending order.
  std::vector<int> outcomes;
  /// Records of outcomes[g] occupy rows [group_offsets[g], group_offsets[g+1]).
  std::vector<std::size_t> group_offsets;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows;
  /// Twin-beam weight above the cutoff.
  double tail_weight = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
};

/// Throws CutoffError if the twin-beam weight above `fock_cutoff` exceeds 1e-4,
/// ValidationError if the cutoff exceeds the state truncation.
DiagonalMlProblem build_problem_diagonal(const Dataset& data, const TwinBeam& R,
                                         const HomodyneQuorum& hq, int fock_cutoff);

/// Finite-dimensional problem: L = sum_{n,j} c(n,j) log Tr[P_n A_j], with the
/// tomographer probes A_j = Tr_2[(1 (x) N(Pi_j)) R] over all (setting, result) pairs.
struct FiniteMlProblem {
  Index dim = 0;
  std::vector<int> outcomes;
  std::vector<ComplexOperator> probes;
  /// counts(g, j); frequencies in exact mode.
  RealMatrix counts;
};

FiniteMlProblem build_problem_finite(const FrequencyTable& table, const BipartiteState& R,
                                     const FiniteQuorum& quorum, const NoiseMap* noise = nullptr);

struct MlResult {
  /// Row labels; the last one is kCatchAllOutcome.
  std::vector<int> outcomes;
  /// Finite problems: full elements. Diagonal problems: diagonal elements on
  /// the cutoff space.
  Povm povm;
  /// Diagonal problems: diagonals(g, m) = <m|P_g|m>.
  RealMatrix diagonals;
  /// Log-likelihood of every accepted iterate, starting from the initial POVM.
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  int extrapolation_steps = 0;
  int fallback_steps = 0;
  double completeness_deviation = 0.0;
  double min_eigenvalue = 0.0;

  Index row_of(int n) const;
  bool trace_monotone(double slack = 0.0) const;
};

double log_likelihood(const DiagonalMlProblem& problem, const RealMatrix& theta);
double log_likelihood(const FiniteMlProblem& problem, const std::vector<ComplexOperator>& povm);

/// Starts from the uniform POVM P_n = 1/(outcomes + 1).
MlResult maximize(const DiagonalMlProblem& problem, const MlOptions& options = {});
MlResult maximize(const FiniteMlProblem& problem, const MlOptions& options = {});

nlohmann::json ml_result_to_json(const MlResult& result);

}  // namespace qcal
