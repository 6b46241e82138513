#pragma once

// Target functionals of the final state and the fluence penalty:
//   O1 = -int (sqrt n - sqrt n_tg)^2      density overlap
//   O2 = -w_c int |j|^2                   current suppression
//   F  = -int alpha(t) eps(t)^2 dt        fluence with switch-on/off shape
// and the terminal condition chi(T) = dO/dpsi*.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qoct/control.hpp"
#include "qoct/grid.hpp"
#include "qoct/observables.hpp"

namespace qoct {

inline constexpr double alpha_max = 1e8;
inline constexpr double density_floor = 1e-12;

struct TargetSpec {
  RealField target_density;
  double w_c = 0.0;

  TargetSpec() = default;
  TargetSpec(RealField n_tg, double wc) : target_density(std::move(n_tg)), w_c(wc) {
    if (!(w_c >= 0.0) || !std::isfinite(w_c)) throw std::invalid_argument("target: w_c must be nonnegative");
    for (double v : target_density.values)
      if (!(v >= 0.0)) throw std::invalid_argument("target: density must be nonnegative");
  }
};

struct FunctionalBreakdown {
  double O1 = 0.0;
  double O2 = 0.0;
  double F_penalty = 0.0;
  double J = 0.0;
  double overlap_mapped = 0.0;
};

/// Penalty weight 1 / (2 [erf(t - T/20) - erf(t - 19T/20)]), capped at
/// alpha_max where the bracket vanishes at the endpoints.
inline double alpha(double t, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("alpha: T must be positive");
  if (t < -1e-12 * T || t > T * (1.0 + 1e-12)) throw std::invalid_argument("alpha: t outside [0, T]");
  // Evaluate on the first half only; the shape is symmetric about T/2.
  const double s = std::clamp(std::min(t, T - t), 0.0, 0.5 * T);
  const double a = s - T / 20.0;
  const double b = s - T + T / 20.0;
  // erf(a) - erf(b) with b <= a, written through erfc to keep the tails.
  double diff;
  if (a <= 0.0)
    diff = std::erfc(-a) - std::erfc(-b);
  else
    diff = std::erf(a) + std::erf(-b);
  if (!(diff > 0.0)) return alpha_max;
  return std::min(1.0 / (2.0 * diff), alpha_max);
}

/// Trapezoidal -int alpha eps^2 dt over the field's mesh.
inline double fluence_penalty(const ControlField& field) {
  const TimeMesh& m = field.mesh;
  const double T = m.horizon();
  double s = 0.0;
  for (int i = 0; i <= m.steps; ++i) {
    const double w = (i == 0 || i == m.steps) ? 0.5 : 1.0;
    s += w * alpha(m.time(i), T) * field.samples[i] * field.samples[i];
  }
  return -s * m.dt;
}

namespace detail {
inline double checked_sqrt_density(double v) {
  if (v < -1e-12) throw std::domain_error("density is negative beyond roundoff");
  return std::sqrt(std::max(v, 0.0));
}
}  // namespace detail

inline double o1_density_overlap(const RealField& n, const RealField& n_tg) {
  require_same_grid(n.grid, n_tg.grid, "o1_density_overlap");
  const double s = detail::pairwise_sum<double>(n.size(), [&](std::size_t i) {
    const double d = detail::checked_sqrt_density(n[i]) - detail::checked_sqrt_density(n_tg[i]);
    return d * d;
  });
  return -s * n.grid.quadrature_weight();
}

inline double o1_density_overlap(const RealField& n, const TargetSpec& spec) {
  return o1_density_overlap(n, spec.target_density);
}

inline double o2_current(const VectorField& j, double w_c) {
  if (!(w_c >= 0.0)) throw std::invalid_argument("o2_current: w_c must be nonnegative");
  if (w_c == 0.0) return 0.0;
  return -w_c * current_norm_squared(j);
}

inline double overlap_mapped(double o1) { return 1.0 + 0.5 * o1; }

inline FunctionalBreakdown evaluate_J(const ComplexField& psi_T, const ControlField& field, const TargetSpec& spec) {
  FunctionalBreakdown b;
  b.O1 = o1_density_overlap(density(psi_T), spec);
  b.O2 = o2_current(current(psi_T), spec.w_c);
  b.F_penalty = fluence_penalty(field);
  b.J = b.O1 + b.O2 + b.F_penalty;
  b.overlap_mapped = overlap_mapped(b.O1);
  if (!std::isfinite(b.J)) throw std::domain_error("evaluate_J: non-finite functional");
  return b;
}

/// chi(T) = dO/dpsi* divided by the quadrature weight:
///   psi sqrt(n_tg / n) + i w_c sum_a [j_a D_a psi - D_a^T (j_a psi)],
/// the exact gradient of the discrete O1 + O2. In the continuum the current
/// term is 2 i w_c (j . grad psi) + i w_c psi div j.
///
/// The density ratio uses max(n, density_floor) in the denominator.
inline ComplexField chi_terminal(const ComplexField& psi_T, const TargetSpec& spec) {
  const Grid& g = psi_T.grid;
  require_same_grid(g, spec.target_density.grid, "chi_terminal");
  ComplexField chi(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double n = std::norm(psi_T[i]);
    chi[i] = psi_T[i] * std::sqrt(spec.target_density[i] / std::max(n, density_floor));
  }
  if (spec.w_c > 0.0) {
    const auto grad = gradient(psi_T);
    const VectorField j = current(psi_T);
    const cplx iw{0.0, spec.w_c};
    for (int a = 0; a < g.dim; ++a) {
      const auto ja = j.component(a);
      const auto& da = grad[static_cast<std::size_t>(a)];
      ComplexField jpsi(g);
      for (std::size_t i = 0; i < g.size(); ++i) jpsi[i] = ja[i] * psi_T[i];
      const ComplexField back = derivative_transpose(jpsi, a);
      for (std::size_t i = 0; i < g.size(); ++i) chi[i] += iw * (ja[i] * da[i] - back[i]);
    }
  }
  apply_hard_wall(chi);
  return chi;
}

}  // namespace qoct
