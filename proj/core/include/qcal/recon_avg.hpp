#pragma once

#include <string>
#include <vector>

#include "qcal/detectors.hpp"
#include "qcal/quorum.hpp"
#include "qcal/sampler.hpp"
#include "qcal/states.hpp"

namespace qcal {

/// Tomographer-side state conditioned on apparatus outcome n, estimated by
/// averaging dual (finite quorum) or kernel (homodyne) functions.
struct ConditionedEstimate {
  int outcome = 0;
  /// Record count with this outcome; probability mass in exact mode.
  double weight = 0.0;
  double p_hat = 0.0;
  double p_stderr = 0.0;

  // Finite quorum.
  ComplexOperator rho_hat;
  RealMatrix stderr_re;
  RealMatrix stderr_im;
  /// rho_hat = sum_j conditional_freq[j] * contributions[j]; kept so that the
  /// map inversion can propagate errors exactly.
  std::vector<ComplexOperator> contributions;
  std::vector<double> conditional_freq;

  // Homodyne quorum: photon-number diagonal only.
  RealVector diag_hat;
  RealVector diag_stderr;
};

struct ConditionedEstimates {
  DatasetKind kind = DatasetKind::finite;
  /// 0 in exact mode.
  std::size_t sample_count = 0;
  std::vector<ConditionedEstimate> estimates;
  /// Outcomes with no records; they produce no estimate.
  std::vector<int> unobserved;
  std::size_t clipped = 0;
  double clipped_fraction = 0.0;
  std::vector<std::string> warnings;
};

/// rho_n = sum_{k,m} f(k,m|n) K C_km^dagger, with K the number of settings
/// (uniform setting choice). With `noise`, the duals are replaced by their
/// noise-corrected versions.
ConditionedEstimates estimate_conditioned_finite(const FrequencyTable& table,
                                                 const FiniteQuorum& quorum, const DualSet& duals,
                                                 const NoiseMap* noise = nullptr);

/// <m|rho_n|m> = mean of K_m(x) over records with outcome n, for m <= kernel cutoff.
/// Records outside the kernel grid contribute zero and are counted as clipped.
ConditionedEstimates estimate_conditioned_homodyne(const Dataset& data, const HomodyneQuorum& hq,
                                                   unsigned workers = 0);

/// Infinite-data limit of estimate_conditioned_homodyne: kernel expectations
/// against the exact conditioned photon-number distributions.
ConditionedEstimates exact_conditioned_homodyne(const TwinBeam& R, const Povm& povm,
                                                const HomodyneQuorum& hq);

/// Raw linear estimate P_n = p_n R^{-1}(rho_n); no projection onto POVMs.
struct PovmEstimate {
  Index dim = 0;
  std::vector<int> outcomes;
  std::vector<ComplexOperator> elements;
  std::vector<RealMatrix> stderr_re;
  std::vector<RealMatrix> stderr_im;
  /// sum_n P_n and the standard error of each entry of that sum.
  ComplexOperator completeness_sum;
  RealMatrix completeness_stderr_re;
  RealMatrix completeness_stderr_im;
  PovmReport report;
};

PovmEstimate recover_povm(const ConditionedEstimates& estimates, const MapR& map);

/// Diagonal reconstruction <m|P_n|m> = p_n <m|rho_n|m> / w_m.
struct DiagonalPovmEstimate {
  std::vector<int> outcomes;
  /// value(i, m) for outcome outcomes[i].
  RealMatrix value;
  RealMatrix stderr;
  /// max_m |sum_n value(n, m) - 1| over the reconstructed range.
  double completeness_deviation = 0.0;

  /// Row for outcome n, or -1 if n was not observed.
  Index row_of(int n) const;
};

DiagonalPovmEstimate recover_povm_diagonal(const ConditionedEstimates& estimates,
                                           const DiagonalMapR& map);

/// Optional post-processing: Hermitian part, negative eigenvalues clipped,
/// then renormalized by S^{-1/2} with S the sum. Not used by the estimator itself.
Povm project_to_povm(const PovmEstimate& estimate);

}  // namespace qcal
