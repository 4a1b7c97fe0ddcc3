#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcal/detectors.hpp"
#include "qcal/quorum.hpp"
#include "qcal/states.hpp"

namespace qcal {

enum class DatasetKind { finite, homodyne };

/// One joint event. For a finite quorum `setting` and `result` hold the integer
/// setting index k and eigenvector index m; for the homodyne quorum they hold
/// the phase and the quadrature value x.
struct JointRecord {
  std::int32_t outcome = 0;
  double setting = 0.0;
  double result = 0.0;

  int setting_index() const { return static_cast<int>(setting); }
  int result_index() const { return static_cast<int>(result); }
  bool operator==(const JointRecord&) const = default;
};

struct Dataset {
  DatasetKind kind = DatasetKind::finite;
  std::vector<JointRecord> records;
  std::uint64_t seed = 0;
  std::string scenario_id;
  /// counts_by_n[n] = number of records with outcome n.
  std::vector<std::size_t> counts_by_n;
  /// Free-form description of how the data were generated.
  nlohmann::json parameters = nlohmann::json::object();

  std::size_t size() const { return records.size(); }
  /// Recomputes counts_by_n with at least `min_outcomes` bins.
  void recount(std::size_t min_outcomes = 0);
};

struct SamplerOptions {
  /// 0 selects hardware concurrency. Results do not depend on this value.
  unsigned workers = 0;
  /// Records per random stream.
  std::size_t chunk_size = 1u << 14;
};

/// Exact p(n, m | k) = Tr[(P_n (x) N(Pi_km)) R] for every setting k.
struct FiniteJointTable {
  std::size_t n_outcomes = 0;
  /// prob[k](n, m)
  std::vector<RealMatrix> prob;
};

/// Operators A_km = Tr_2[(1 (x) N(Pi_km)) R] on the system side, so that
/// p(n, m | k) = Tr[P_n A_km]. `noise` may be null.
std::vector<std::vector<ComplexOperator>> tomographer_probes(const BipartiteState& R,
                                                             const FiniteQuorum& quorum,
                                                             const NoiseMap* noise = nullptr);

/// Throws NumericalValidityError if any probability is below -1e-10.
FiniteJointTable exact_finite_table(const BipartiteState& R, const Povm& povm,
                                    const FiniteQuorum& quorum, const NoiseMap* noise = nullptr);

/// Uniform setting choice, then (n, m) from the exact conditional table.
Dataset sample_finite(const BipartiteState& R, const Povm& povm, const FiniteQuorum& quorum,
                      std::size_t n_records, std::uint64_t seed, const NoiseMap* noise = nullptr,
                      const SamplerOptions& options = {});

/// Per record: pair number m ~ |c_m|^2, outcome n ~ <m|P_n|m>, phase uniform on
/// [0, pi), x = ideal Fock quadrature + Gaussian smearing. Throws
/// UnsupportedStructure for a non-diagonal POVM.
Dataset sample_homodyne_twinbeam(const TwinBeam& R, const Povm& povm, const HomodyneQuorum& hq,
                                 std::size_t n_records, std::uint64_t seed,
                                 const SamplerOptions& options = {});

/// Inverse-CDF sampler for the ideal quadrature densities psi_m(x)^2.
class QuadratureSampler {
 public:
  explicit QuadratureSampler(int max_fock, double step = 1.0 / 1024.0);
  /// Maps u in [0,1) to a quadrature value distributed as psi_m^2.
  double draw(int m, double u) const;
  int max_fock() const { return max_fock_; }

 private:
  int max_fock_;
  double x_min_;
  double step_;
  RealMatrix density_;  // (max_fock+1) x points
  RealMatrix cdf_;
};

/// Event weights tabulated by (n, k, m) for the finite averaging estimator.
/// Built either from sampled records or from exact probabilities.
struct FrequencyTable {
  std::size_t n_outcomes = 0;
  /// weight[k](n, m); counts for sampled data, probabilities in exact mode.
  std::vector<RealMatrix> weight;
  /// Number of records; 0 denotes the exact (infinite-data) limit.
  std::size_t sample_count = 0;

  double total() const;
  bool exact() const { return sample_count == 0; }
};

FrequencyTable tabulate(const Dataset& data, std::size_t n_outcomes, const FiniteQuorum& quorum);
/// Exact frequencies under uniform setting selection: weight = p(n,m|k) / K.
FrequencyTable exact_frequencies(const FiniteJointTable& table);

void write_dataset_csv(const Dataset& data, std::ostream& out);
Dataset read_dataset_csv(std::istream& in, DatasetKind kind);
nlohmann::json dataset_sidecar(const Dataset& data);

/// Writes <stem>.csv and <stem>.json.
void save_dataset(const Dataset& data, const std::filesystem::path& stem);
Dataset load_dataset(const std::filesystem::path& stem);

}  // namespace qcal
