#include "qcal/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "qcal/errors.hpp"
#include "qcal/parallel.hpp"
#include "qcal/random.hpp"

namespace qcal {

namespace {

// Index of the first cumulative value strictly above u * total.
std::size_t draw_from_cdf(const std::vector<double>& cdf, double u) {
  const double target = u * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

std::vector<double> cumulative(const double* p, std::size_t n) {
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::max(0.0, p[i]);
    cdf[i] = acc;
  }
  return cdf;
}

template <class Fill>
std::vector<JointRecord> generate_chunked(std::size_t n_records, std::uint64_t seed,
                                          const SamplerOptions& options, Fill&& fill) {
  std::vector<JointRecord> records(n_records);
  const std::size_t chunk = std::max<std::size_t>(options.chunk_size, 1);
  const std::size_t n_chunks = (n_records + chunk - 1) / chunk;
  parallel_for(n_chunks, options.workers, [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(n_records, begin + chunk);
    for (std::size_t i = begin; i < end; ++i) records[i] = fill(rng);
  });
  return records;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void Dataset::recount(std::size_t min_outcomes) {
  std::size_t n = min_outcomes;
  for (const auto& r : records) n = std::max(n, static_cast<std::size_t>(r.outcome) + 1);
  counts_by_n.assign(n, 0);
  for (const auto& r : records) ++counts_by_n[static_cast<std::size_t>(r.outcome)];
}

std::vector<std::vector<ComplexOperator>> tomographer_probes(const BipartiteState& R,
                                                             const FiniteQuorum& quorum,
                                                             const NoiseMap* noise) {
  if (quorum.dim != R.dim_tomo) {
    throw DimensionMismatch("tomographer_probes: quorum dimension " + std::to_string(quorum.dim) +
                            " does not match tomographer dimension " + std::to_string(R.dim_tomo));
  }
  if (noise != nullptr && noise->dim != quorum.dim) {
    throw DimensionMismatch("tomographer_probes: noise map dimension mismatch");
  }
  const ComplexOperator id = ComplexOperator::Identity(R.dim_system, R.dim_system);
  std::vector<std::vector<ComplexOperator>> probes(quorum.num_settings());
  for (std::size_t k = 0; k < quorum.num_settings(); ++k) {
    for (std::size_t m = 0; m < quorum.num_results(k); ++m) {
      ComplexOperator pi = quorum.projector(k, m);
      if (noise != nullptr) pi = noise->apply(pi);
      probes[k].push_back(partial_trace_second(tensor_product(id, pi) * R.rho, R.dim_tomo));
    }
  }
  return probes;
}

FiniteJointTable exact_finite_table(const BipartiteState& R, const Povm& povm,
                                    const FiniteQuorum& quorum, const NoiseMap* noise) {
  if (povm.dim != R.dim_system) {
    throw DimensionMismatch("exact_finite_table: POVM dimension does not match system dimension");
  }
  const auto probes = tomographer_probes(R, quorum, noise);
  FiniteJointTable table;
  table.n_outcomes = povm.size();
  for (std::size_t k = 0; k < probes.size(); ++k) {
    RealMatrix p(static_cast<Index>(povm.size()), static_cast<Index>(probes[k].size()));
    for (std::size_t n = 0; n < povm.size(); ++n) {
      for (std::size_t m = 0; m < probes[k].size(); ++m) {
        const double v = (povm.elements[n] * probes[k][m]).trace().real();
        if (v < -1e-10) {
          throw NumericalValidityError("exact_finite_table: p(n=" + std::to_string(n) + ", m=" +
                                       std::to_string(m) + " | k=" + std::to_string(k) +
                                       ") = " + std::to_string(v) + " is negative");
        }
        p(static_cast<Index>(n), static_cast<Index>(m)) = std::max(0.0, v);
      }
    }
    table.prob.push_back(std::move(p));
  }
  return table;
}

Dataset sample_finite(const BipartiteState& R, const Povm& povm, const FiniteQuorum& quorum,
                      std::size_t n_records, std::uint64_t seed, const NoiseMap* noise,
                      const SamplerOptions& options) {
  const FiniteJointTable table = exact_finite_table(R, povm, quorum, noise);
  const std::size_t n_settings = table.prob.size();
  // Row-major flattening over (n, m) per setting.
  std::vector<std::vector<double>> cdfs;
  std::vector<Index> widths;
  for (const auto& p : table.prob) {
    std::vector<double> flat;
    for (Index n = 0; n < p.rows(); ++n) {
      for (Index m = 0; m < p.cols(); ++m) flat.push_back(p(n, m));
    }
    cdfs.push_back(cumulative(flat.data(), flat.size()));
    widths.push_back(p.cols());
  }
  Dataset data;
  data.kind = DatasetKind::finite;
  data.seed = seed;
  data.records = generate_chunked(n_records, seed, options, [&](Rng& rng) {
    const auto k = static_cast<std::size_t>(rng.below(n_settings));
    const std::size_t flat = draw_from_cdf(cdfs[k], rng.uniform());
    const auto n = static_cast<std::int32_t>(flat / static_cast<std::size_t>(widths[k]));
    const auto m = static_cast<double>(flat % static_cast<std::size_t>(widths[k]));
    return JointRecord{n, static_cast<double>(k), m};
  });
  data.recount(povm.size());
  data.parameters = {{"sampler", "finite"},
                     {"n_settings", n_settings},
                     {"n_outcomes", povm.size()},
                     {"noisy_tomographer", noise != nullptr}};
  return data;
}

QuadratureSampler::QuadratureSampler(int max_fock, double step) : max_fock_(max_fock), step_(step) {
  if (max_fock < 0) throw ValidationError("QuadratureSampler: negative Fock cutoff");
  // Beyond the classical turning point sqrt(2m+1)/2 the densities decay like
  // exp(-2 x^2); a margin of 4 leaves no mass worth representing.
  const double half_width = std::sqrt(2.0 * max_fock + 1.0) / 2.0 + 4.0;
  x_min_ = -half_width;
  const auto npts = static_cast<Index>(std::ceil(2.0 * half_width / step)) + 1;
  density_.resize(max_fock + 1, npts);
  cdf_.resize(max_fock + 1, npts);
  std::vector<double> psi(static_cast<std::size_t>(max_fock) + 1);
  for (Index i = 0; i < npts; ++i) {
    fock_quadrature_amplitudes(x_min_ + step * static_cast<double>(i), psi);
    for (int m = 0; m <= max_fock; ++m) density_(m, i) = psi[static_cast<std::size_t>(m)] * psi[static_cast<std::size_t>(m)];
  }
  for (int m = 0; m <= max_fock; ++m) {
    cdf_(m, 0) = 0.0;
    for (Index i = 1; i < npts; ++i) {
      cdf_(m, i) = cdf_(m, i - 1) + 0.5 * step * (density_(m, i - 1) + density_(m, i));
    }
  }
}

double QuadratureSampler::draw(int m, double u) const {
  const Index npts = cdf_.cols();
  const double total = cdf_(m, npts - 1);
  const double target = u * total;
  Index lo = 0, hi = npts - 1;
  while (hi - lo > 1) {
    const Index mid = (lo + hi) / 2;
    if (cdf_(m, mid) <= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // Density is linear inside the cell: solve a t^2 + b t = delta for t in [0,1].
  const double f0 = density_(m, lo);
  const double f1 = density_(m, lo + 1);
  const double delta = (target - cdf_(m, lo)) / step_;
  const double a = 0.5 * (f1 - f0);
  const double b = f0;
  double t;
  const double disc = b * b + 4.0 * a * delta;
  if (disc <= 0.0) {
    t = 0.5;
  } else {
    const double denom = b + std::sqrt(disc);
    t = denom > 0.0 ? 2.0 * delta / denom : 0.5;
  }
  t = std::clamp(t, 0.0, 1.0);
  return x_min_ + step_ * (static_cast<double>(lo) + t);
}

Dataset sample_homodyne_twinbeam(const TwinBeam& R, const Povm& povm, const HomodyneQuorum& hq,
                                 std::size_t n_records, std::uint64_t seed,
                                 const SamplerOptions& options) {
  if (povm.dim != R.dim()) {
    throw DimensionMismatch("sample_homodyne_twinbeam: POVM dimension " +
                            std::to_string(povm.dim) + " does not match twin-beam dimension " +
                            std::to_string(R.dim()));
  }
  if (!povm.is_diagonal()) {
    throw UnsupportedStructure(
        "sample_homodyne_twinbeam: the factorized sampler needs a photon-number diagonal POVM");
  }
  const RealMatrix diag = povm.diagonals();  // (n, m)
  const std::vector<double> pair_cdf = cumulative(R.weights.data(), static_cast<std::size_t>(R.weights.size()));
  std::vector<std::vector<double>> outcome_cdf;
  for (Index m = 0; m < diag.cols(); ++m) {
    const RealVector col = diag.col(m);
    outcome_cdf.push_back(cumulative(col.data(), static_cast<std::size_t>(col.size())));
  }
  const QuadratureSampler quad(R.fock_cutoff);
  const double smear = std::sqrt(hq.smear_sigma2);

  Dataset data;
  data.kind = DatasetKind::homodyne;
  data.seed = seed;
  data.records = generate_chunked(n_records, seed, options, [&](Rng& rng) {
    const std::size_t m = draw_from_cdf(pair_cdf, rng.uniform());
    const std::size_t n = draw_from_cdf(outcome_cdf[m], rng.uniform());
    const double phase = std::numbers::pi * rng.uniform();
    double x = quad.draw(static_cast<int>(m), rng.uniform());
    if (smear > 0.0) x += smear * rng.normal();
    return JointRecord{static_cast<std::int32_t>(n), phase, x};
  });
  data.recount(povm.size());
  data.parameters = {{"sampler", "homodyne_twinbeam"},
                     {"xi", R.xi},
                     {"state_fock_cutoff", R.fock_cutoff},
                     {"eta_h", hq.eta_h},
                     {"n_outcomes", povm.size()}};
  return data;
}

double FrequencyTable::total() const {
  double t = 0.0;
  for (const auto& w : weight) t += w.sum();
  return t;
}

FrequencyTable tabulate(const Dataset& data, std::size_t n_outcomes, const FiniteQuorum& quorum) {
  if (data.kind != DatasetKind::finite) throw UnsupportedStructure("tabulate: homodyne dataset");
  FrequencyTable t;
  t.n_outcomes = n_outcomes;
  t.sample_count = data.size();
  for (std::size_t k = 0; k < quorum.num_settings(); ++k) {
    t.weight.push_back(RealMatrix::Zero(static_cast<Index>(n_outcomes),
                                        static_cast<Index>(quorum.num_results(k))));
  }
  for (const auto& r : data.records) {
    const int k = r.setting_index();
    const int m = r.result_index();
    if (r.outcome < 0 || static_cast<std::size_t>(r.outcome) >= n_outcomes || k < 0 ||
        static_cast<std::size_t>(k) >= t.weight.size() || m < 0 ||
        m >= t.weight[static_cast<std::size_t>(k)].cols()) {
      throw ValidationError("tabulate: record outside the quorum/outcome range");
    }
    t.weight[static_cast<std::size_t>(k)](r.outcome, m) += 1.0;
  }
  return t;
}

FrequencyTable exact_frequencies(const FiniteJointTable& table) {
  FrequencyTable t;
  t.n_outcomes = table.n_outcomes;
  t.sample_count = 0;
  const double inv_k = 1.0 / static_cast<double>(table.prob.size());
  for (const auto& p : table.prob) t.weight.push_back(p * inv_k);
  return t;
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  out << "n,k,result\n";
  for (const auto& r : data.records) {
    out << r.outcome << ',';
    if (data.kind == DatasetKind::finite) {
      out << r.setting_index() << ',' << r.result_index() << '\n';
    } else {
      out << format_double(r.setting) << ',' << format_double(r.result) << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& in, DatasetKind kind) {
  Dataset data;
  data.kind = kind;
  std::string line;
  if (!std::getline(in, line) || line != "n,k,result") {
    throw ValidationError("read_dataset_csv: missing header 'n,k,result'");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    JointRecord r;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto bad = [&] {
      return ValidationError("read_dataset_csv: malformed line " + std::to_string(lineno));
    };
    auto res = std::from_chars(p, end, r.outcome);
    if (res.ec != std::errc{} || res.ptr == end || *res.ptr != ',') throw bad();
    res = std::from_chars(res.ptr + 1, end, r.setting);
    if (res.ec != std::errc{} || res.ptr == end || *res.ptr != ',') throw bad();
    res = std::from_chars(res.ptr + 1, end, r.result);
    if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(r.result)) throw bad();
    data.records.push_back(r);
  }
  data.recount();
  return data;
}

nlohmann::json dataset_sidecar(const Dataset& data) {
  return {{"kind", data.kind == DatasetKind::finite ? "finite" : "homodyne"},
          {"seed", data.seed},
          {"scenario_id", data.scenario_id},
          {"n_records", data.size()},
          {"counts_by_n", data.counts_by_n},
          {"parameters", data.parameters}};
}

void save_dataset(const Dataset& data, const std::filesystem::path& stem) {
  std::ofstream csv(std::filesystem::path(stem).concat(".csv"), std::ios::binary);
  write_dataset_csv(data, csv);
  std::ofstream side(std::filesystem::path(stem).concat(".json"), std::ios::binary);
  side << dataset_sidecar(data).dump(2) << '\n';
  if (!csv || !side) throw Error("save_dataset: failed writing " + stem.string());
}

Dataset load_dataset(const std::filesystem::path& stem) {
  std::ifstream side(std::filesystem::path(stem).concat(".json"));
  if (!side) throw Error("load_dataset: cannot open sidecar for " + stem.string());
  const nlohmann::json meta = nlohmann::json::parse(side);
  const DatasetKind kind =
      meta.at("kind").get<std::string>() == "finite" ? DatasetKind::finite : DatasetKind::homodyne;
  std::ifstream csv(std::filesystem::path(stem).concat(".csv"));
  if (!csv) throw Error("load_dataset: cannot open records for " + stem.string());
  Dataset data = read_dataset_csv(csv, kind);
  data.seed = meta.at("seed").get<std::uint64_t>();
  data.scenario_id = meta.at("scenario_id").get<std::string>();
  data.parameters = meta.at("parameters");
  data.recount(meta.at("counts_by_n").size());
  if (data.size() != meta.at("n_records").get<std::size_t>()) {
    throw ValidationError("load_dataset: record count does not match sidecar");
  }
  return data;
}

}  // namespace qcal
