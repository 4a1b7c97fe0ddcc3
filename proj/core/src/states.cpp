#include "qcal/states.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "qcal/errors.hpp"

namespace qcal {

BipartiteState maximally_entangled(int d) {
  if (d < 2) throw ValidationError("maximally_entangled: dimension must be at least 2");
  ComplexVector psi = ComplexVector::Zero(static_cast<Index>(d) * d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  for (Index i = 0; i < d; ++i) psi(i * d + i) = amp;
  return {d, d, psi * psi.adjoint(), 0.0};
}

BipartiteState product_state(const ComplexOperator& rho_system, const ComplexOperator& rho_tomo) {
  return {rho_system.rows(), rho_tomo.rows(), tensor_product(rho_system, rho_tomo), 0.0};
}

double TwinBeam::mean_photon_number() const {
  double mean = 0.0;
  for (Index m = 0; m < weights.size(); ++m) mean += static_cast<double>(m) * weights(m);
  return mean;
}

BipartiteState TwinBeam::state() const {
  const Index d = dim();
  ComplexVector psi = ComplexVector::Zero(d * d);
  for (Index m = 0; m < d; ++m) psi(m * d + m) = std::sqrt(weights(m));
  return {d, d, psi * psi.adjoint(), truncation_deficit};
}

TwinBeam twin_beam(double xi, int fock_cutoff) {
  if (!(xi >= 0.0)) throw ValidationError("twin_beam: xi must be non-negative");
  if (xi >= 1.0) {
    throw UnnormalizableState("twin_beam: xi = " + std::to_string(xi) +
                              " gives an unnormalizable state (need xi < 1)");
  }
  if (fock_cutoff < 0) throw ValidationError("twin_beam: negative Fock cutoff");
  TwinBeam tb;
  tb.xi = xi;
  tb.fock_cutoff = fock_cutoff;
  tb.weights.resize(fock_cutoff + 1);
  const double x2 = xi * xi;
  double term = 1.0 - x2;
  for (int m = 0; m <= fock_cutoff; ++m) {
    tb.weights(m) = term;
    term *= x2;
  }
  tb.truncation_deficit = std::pow(x2, fock_cutoff + 1);
  tb.weights /= tb.weights.sum();
  return tb;
}

ComplexOperator MapR::apply(const ComplexOperator& x) const {
  return unvectorize(matrix * vectorize(x), dim_tomo);
}

MapR build_map_R(const BipartiteState& R, double svd_tolerance) {
  const Index ds = R.dim_system, dt = R.dim_tomo;
  if (R.rho.rows() != ds * dt) throw DimensionMismatch("build_map_R: rho dimension mismatch");
  MapR map;
  map.dim_system = ds;
  map.dim_tomo = dt;
  map.svd_tolerance = svd_tolerance;
  map.matrix.resize(dt * dt, ds * ds);
  // Tr_1[(X (x) 1) R](p,q) = sum_{i,j} X(i,j) R((j,p),(i,q)).
  for (Index i = 0; i < ds; ++i) {
    for (Index j = 0; j < ds; ++j) {
      for (Index p = 0; p < dt; ++p) {
        for (Index q = 0; q < dt; ++q) {
          map.matrix(p + q * dt, i + j * ds) = R.rho(j * dt + p, i * dt + q);
        }
      }
    }
  }
  PseudoInverse pinv = pseudo_inverse(map.matrix, svd_tolerance);
  map.pseudo_inverse = std::move(pinv.matrix);
  map.singular_values = std::move(pinv.singular_values);
  map.rank = pinv.rank;
  map.condition_number = map.rank == ds * ds ? pinv.condition_number
                                             : std::numeric_limits<double>::infinity();
  return map;
}

ComplexOperator apply_map_R(const BipartiteState& R, const ComplexOperator& x) {
  if (x.rows() != R.dim_system) throw DimensionMismatch("apply_map_R: operator dimension mismatch");
  const ComplexOperator id = ComplexOperator::Identity(R.dim_tomo, R.dim_tomo);
  return partial_trace_first(tensor_product(x, id) * R.rho, R.dim_system);
}

ComplexOperator invert_map_R(const MapR& map, const ComplexOperator& y) {
  if (y.rows() != map.dim_tomo || y.cols() != map.dim_tomo) {
    throw DimensionMismatch("invert_map_R: expected a " + std::to_string(map.dim_tomo) +
                            "-dimensional operator");
  }
  return unvectorize(map.pseudo_inverse * vectorize(y), map.dim_system);
}

RealVector DiagonalMapR::apply(const RealVector& x) const {
  return weights.head(x.size()).cwiseProduct(x);
}

double DiagonalMapR::inverse_weight(Index m) const {
  const double cut = svd_tolerance * weights.maxCoeff();
  const double w = weights(m);
  return (w > cut && w > 0.0) ? 1.0 / w : 0.0;
}

RealVector DiagonalMapR::invert(const RealVector& y) const {
  if (y.size() > weights.size()) throw DimensionMismatch("DiagonalMapR::invert: vector too long");
  RealVector out(y.size());
  for (Index m = 0; m < y.size(); ++m) out(m) = y(m) * inverse_weight(m);
  return out;
}

DiagonalMapR build_diagonal_map_R(const TwinBeam& R, double svd_tolerance) {
  DiagonalMapR map;
  map.weights = R.weights;
  map.svd_tolerance = svd_tolerance;
  const double wmax = R.weights.maxCoeff();
  double wmin = wmax;
  for (Index m = 0; m < R.weights.size(); ++m) {
    if (R.weights(m) > svd_tolerance * wmax && R.weights(m) > 0.0) {
      ++map.rank;
      wmin = std::min(wmin, R.weights(m));
    }
  }
  map.condition_number =
      map.faithful() ? wmax / wmin : std::numeric_limits<double>::infinity();
  return map;
}

}  // namespace qcal
