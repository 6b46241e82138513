#pragma once

// Monotonic back-and-forth iteration for the coupled system
//   forward  i dpsi/dt = [H0 - mu eps] psi,  psi(0) = psi0
//   backward i dchi/dt = [H0 - mu eps] chi,  chi(T) = dO/dpsi*(T)
//   field    alpha(t) eps(t) = -Im <chi|mu|psi>
//
// Each sweep co-propagates the partner state instead of storing a
// trajectory; the midpoint stepper is time-reversible, so running psi
// backwards under the previous field reproduces the earlier forward pass.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "qoct/control.hpp"
#include "qoct/objective.hpp"
#include "qoct/observables.hpp"
#include "qoct/propagator.hpp"

namespace qoct {

struct IterationRecord {
  int index = 0;
  double J = 0.0;
  double O1 = 0.0;
  double O2 = 0.0;
  double F_penalty = 0.0;
  double overlap_mapped = 0.0;
  double max_field = 0.0;
  // L2 distance between psi(0) rebuilt by the backward sweep and psi0.
  double reconstruction_error = 0.0;
};

struct OptimizationResult {
  std::vector<IterationRecord> history;
  ControlField best_field;
  ComplexField best_psi_T;
  ComplexField chi0;
  int best_index = 0;
  bool converged = false;
  std::string reason;

  const IterationRecord& best() const { return history[static_cast<std::size_t>(best_index)]; }
};

struct OptimizeOptions {
  double j_tol = 1e-6;
  int max_iter = 200;
  KrylovOptions krylov{};
};

using IterationObserver = std::function<void(const IterationRecord&)>;

/// eps(t) = -Im <chi|mu|psi> / alpha(t).
inline double field_from_pair(const ComplexField& chi, const ComplexField& psi, const DipoleOperator& mu, double t,
                              double T) {
  return -dipole_expectation(chi, psi, mu).imag() / alpha(t, T);
}

namespace detail {

inline double field_from_pair(const Hamiltonian& h, const ComplexField& chi, const ComplexField& psi, double t,
                              double T) {
  return -h.dipole_element(chi, psi).imag() / alpha(t, T);
}

// Field node at the end of a step from the implicit relation
//   alpha eps_new = -Im <chi|mu|psi>(eps_new),
// linearized about the trial step taken with the lagged value. Over one
// step d/d(eps) Im<chi|mu|psi> = dt/2 Re<chi|mu^2|psi> in either direction.
// Using the lagged value alone is an explicit feedback loop with gain
// ~ dt <mu^2> / alpha, which goes unstable on 2D grids.
inline double corrected_node(const Hamiltonian& h, const ComplexField& chi, const ComplexField& psi, double lagged,
                             double t, double T, double dt) {
  const auto m = h.dipole_moments(chi, psi);
  const double a = alpha(t, T);
  const double r = 0.5 * dt * m[1].real();
  const double denom = std::max(a + r, 0.5 * a);
  return (-m[0].imag() + r * lagged) / denom;
}

inline IterationRecord make_record(int index, const FunctionalBreakdown& b, const ControlField& f) {
  IterationRecord r;
  r.index = index;
  r.J = b.J;
  r.O1 = b.O1;
  r.O2 = b.O2;
  r.F_penalty = b.F_penalty;
  r.overlap_mapped = b.overlap_mapped;
  r.max_field = f.max_abs();
  return r;
}

}  // namespace detail

inline OptimizationResult optimize(const Hamiltonian& h, const ComplexField& initial_psi, const ControlField& guess,
                                   const TargetSpec& spec, const OptimizeOptions& opt = {},
                                   const IterationObserver& observer = {}) {
  require_same_grid(initial_psi.grid, h.grid(), "optimize");
  require_same_grid(spec.target_density.grid, h.grid(), "optimize");
  if (!(guess.polarization == h.mu())) throw std::invalid_argument("optimize: guess polarization differs from H");
  const TimeMesh& mesh = guess.mesh;
  const double T = mesh.horizon();
  const double dt = mesh.dt;
  const DipoleOperator& mu = h.mu();

  OptimizationResult res;
  ControlField field = guess;
  ComplexField psi_T = propagate(h, initial_psi, field, Direction::forward, {}, opt.krylov);
  {
    IterationRecord r0 = detail::make_record(0, evaluate_J(psi_T, field, spec), field);
    res.history.push_back(r0);
    if (observer) observer(r0);
  }
  res.best_field = field;
  res.best_psi_T = psi_T;
  res.best_index = 0;
  res.reason = "max_iter";

  ControlField tilde(mesh, mu);
  ControlField next(mesh, mu);
  ComplexField trial(h.grid());

  for (int k = 1; k <= opt.max_iter; ++k) {
    // Backward sweep: chi from the terminal condition under the new field,
    // psi retraced under the previous one.
    ComplexField chi = chi_terminal(psi_T, spec);
    ComplexField psi = psi_T;
    Propagator prop_psi(h, opt.krylov), prop_chi(h, opt.krylov), prop_trial(h, opt.krylov);
    tilde.samples[mesh.steps] = detail::field_from_pair(h, chi, psi, T, T);
    for (int i = mesh.steps - 1; i >= 0; --i) {
      prop_psi.step(psi, field.midpoint(i), -dt);
      const double lagged = tilde.samples[i + 1];
      trial = chi;
      prop_trial.step(trial, lagged, -dt);
      tilde.samples[i] = detail::corrected_node(h, trial, psi, lagged, mesh.time(i), T, dt);
      prop_chi.step(chi, tilde.midpoint(i), -dt, &trial);
    }
    ComplexField diff = psi;
    diff -= initial_psi;
    const double reconstruction = norm(diff);
    res.chi0 = chi;

    // Forward sweep: chi retraced under tilde, psi driven by the new field.
    psi = initial_psi;
    prop_psi.reset_history();
    prop_chi.reset_history();
    prop_trial.reset_history();
    next.samples[0] = detail::field_from_pair(h, chi, psi, 0.0, T);
    for (int i = 0; i < mesh.steps; ++i) {
      prop_chi.step(chi, tilde.midpoint(i), dt);
      const double lagged = next.samples[i];
      trial = psi;
      prop_trial.step(trial, lagged, dt);
      next.samples[i + 1] = detail::corrected_node(h, chi, trial, lagged, mesh.time(i + 1), T, dt);
      prop_psi.step(psi, next.midpoint(i), dt, &trial);
    }
    for (double v : next.samples)
      if (!std::isfinite(v)) throw NumericalError("optimize: non-finite field at iteration " + std::to_string(k));

    field = next;
    psi_T = psi;
    FunctionalBreakdown b;
    try {
      b = evaluate_J(psi_T, field, spec);
    } catch (const std::domain_error& e) {
      throw NumericalError(std::string("optimize: ") + e.what() + " at iteration " + std::to_string(k));
    }
    IterationRecord r = detail::make_record(k, b, field);
    r.reconstruction_error = reconstruction;
    const double previous_J = res.history.back().J;
    res.history.push_back(r);
    if (observer) observer(r);
    if (r.J > res.best().J) {
      res.best_index = k;
      res.best_field = field;
      res.best_psi_T = psi_T;
    }
    if (std::abs(r.J - previous_J) < opt.j_tol) {
      res.converged = true;
      res.reason = "j_tol";
      break;
    }
  }
  return res;
}

struct StabilitySeries {
  std::vector<double> times;
  std::vector<std::array<double, 2>> monitors;     // snapped node coordinates
  std::vector<std::vector<double>> differences;    // [monitor][sample] n - n_tg
  std::vector<double> overlap;                     // overlap_mapped(t)
  std::vector<std::string> warnings;
};

/// Field-free evolution of psi_T, sampling n - n_tg at the monitor points and
/// the mapped overlap at t = 0 and after every step.
inline StabilitySeries stability_probe(const Hamiltonian& h, const ComplexField& psi_T, const TimeMesh& extension,
                                       const TargetSpec& spec, const std::vector<std::array<double, 2>>& monitors,
                                       KrylovOptions kopt = {}) {
  const Grid& g = h.grid();
  require_same_grid(psi_T.grid, g, "stability_probe");
  StabilitySeries out;
  std::vector<std::size_t> nodes;
  for (const auto& m : monitors) {
    const std::size_t idx = g.nearest(m[0], m[1]);
    const auto p = g.point(idx);
    if (!g.contains(m[0], m[1]) || std::abs(p[0] - m[0]) > 1e-9 || std::abs(p[1] - m[1]) > 1e-9)
      out.warnings.push_back("monitor (" + std::to_string(m[0]) + ", " + std::to_string(m[1]) +
                             ") snapped to node (" + std::to_string(p[0]) + ", " + std::to_string(p[1]) + ")");
    nodes.push_back(idx);
    out.monitors.push_back(p);
  }
  out.differences.assign(nodes.size(), {});
  auto record = [&](double t, const ComplexField& psi) {
    out.times.push_back(t);
    for (std::size_t m = 0; m < nodes.size(); ++m)
      out.differences[m].push_back(std::norm(psi[nodes[m]]) - spec.target_density[nodes[m]]);
    out.overlap.push_back(overlap_mapped(o1_density_overlap(density(psi), spec)));
  };
  record(0.0, psi_T);
  Propagator prop(h, kopt);
  ComplexField psi = psi_T;
  for (int i = 0; i < extension.steps; ++i) {
    prop.step(psi, 0.0, extension.dt);
    record(extension.time(i + 1), psi);
  }
  return out;
}

/// Root mean square of a sampled series.
inline double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

/// RMS of 1 - overlap_mapped(t) over a stability series.
inline double overlap_loss_rms(const StabilitySeries& s) {
  std::vector<double> loss(s.overlap.size());
  for (std::size_t i = 0; i < loss.size(); ++i) loss[i] = 1.0 - s.overlap[i];
  return rms(loss);
}

}  // namespace qoct
