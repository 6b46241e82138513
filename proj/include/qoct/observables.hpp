#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qoct/grid.hpp"

namespace qoct {

inline RealField density(const ComplexField& psi) {
  RealField n(psi.grid);
  for (std::size_t i = 0; i < psi.size(); ++i) n[i] = std::norm(psi[i]);
  return n;
}

/// Probability current j = Im(conj(psi) grad psi).
inline VectorField current(const ComplexField& psi) {
  VectorField j(psi.grid);
  for (int a = 0; a < psi.grid.dim; ++a) {
    const ComplexField d = derivative(psi, a);
    auto comp = j.component(a);
    for (std::size_t i = 0; i < psi.size(); ++i) comp[i] = (std::conj(psi[i]) * d[i]).imag();
  }
  return j;
}

inline double current_norm_squared(const VectorField& j) {
  double s = detail::pairwise_sum<double>(j.values.size(), [&](std::size_t i) { return j.values[i] * j.values[i]; });
  return s * j.grid.quadrature_weight();
}

/// Max-norm of dn/dt + div j between two snapshots a time dt apart. The
/// current is taken from the midpoint average of the two states.
inline double continuity_residual(const ComplexField& before, const ComplexField& after, double dt) {
  require_same_grid(before.grid, after.grid, "continuity_residual");
  if (!(dt > 0.0)) throw std::invalid_argument("continuity_residual: dt must be positive");
  ComplexField mid = before;
  mid += after;
  mid *= 0.5;
  const RealField div = divergence(current(mid));
  double worst = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double dn = (std::norm(after[i]) - std::norm(before[i])) / dt;
    worst = std::max(worst, std::abs(dn + div[i]));
  }
  return worst;
}

}  // namespace qoct
