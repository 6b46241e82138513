#pragma once

// Crank-Nicolson (implicit midpoint) propagation of
//   i d/dt psi = H(t) psi
// in real time, forwards or backwards, and in imaginary time.

#include <algorithm>
#include <functional>
#include <stdexcept>

#include "qoct/control.hpp"
#include "qoct/krylov.hpp"
#include "qoct/model.hpp"

namespace qoct {

enum class Direction { forward, backward };

/// Observer signature: (mesh node index reached, time, state after the step).
using StepObserver = std::function<void(int, double, const ComplexField&)>;

/// Holds the workspace for repeated steps of one state. The warm start
/// extrapolates from the previous step of the same propagator, so use one
/// Propagator per state being evolved.
class Propagator {
 public:
  explicit Propagator(const Hamiltonian& h, KrylovOptions opt = {})
      : h_(&h), opt_(opt), n_(h.grid().size()), rhs_(n_), guess_(n_), work_(n_), prev_(n_) {}

  const Hamiltonian& hamiltonian() const { return *h_; }
  const KrylovStats& last_stats() const { return stats_; }
  long total_iterations() const { return total_iterations_; }
  void reset_history() { have_prev_ = false; }

  /// One step of (1 + i dt/2 H) psi' = (1 - i dt/2 H) psi; dt may be negative.
  /// `start` optionally overrides the Krylov starting vector.
  void step(ComplexField& psi, double eps_mid, double dt_signed, const ComplexField* start = nullptr) {
    if (!(dt_signed != 0.0) || !std::isfinite(dt_signed)) throw std::invalid_argument("step: dt must be nonzero");
    if (!std::isfinite(eps_mid)) throw std::invalid_argument("step: non-finite field value");
    require_same_grid(psi.grid, h_->grid(), "step");
    const double a = 0.5 * dt_signed;
    // i a w, written out
    auto ia = [a](const cplx& w) { return cplx{-a * w.imag(), a * w.real()}; };
    h_->apply_raw(psi.values.data(), eps_mid, work_.data());
    for (std::size_t i = 0; i < n_; ++i) rhs_[i] = psi[i] - ia(work_[i]);
    if (start) {
      require_same_grid(start->grid, psi.grid, "step");
      std::copy(start->values.begin(), start->values.end(), guess_.begin());
    } else if (have_prev_ && prev_dt_ == dt_signed) {
      for (std::size_t i = 0; i < n_; ++i) guess_[i] = 2.0 * psi[i] - prev_[i];
    } else {
      for (std::size_t i = 0; i < n_; ++i) guess_[i] = psi[i] - 2.0 * ia(work_[i]);
    }
    auto apply = [&](const cplx* x, cplx* y) { h_->apply_raw(x, eps_mid, y); };
    stats_ = solver_.solve(apply, cplx{0.0, a}, rhs_, guess_, opt_);
    total_iterations_ += stats_.iterations;
    prev_.swap(psi.values);
    psi.values.swap(guess_);
    guess_.resize(n_);
    have_prev_ = true;
    prev_dt_ = dt_signed;
  }

  /// Same scheme with t -> -i tau, followed by renormalization.
  void imaginary_step(ComplexField& psi, double dtau) {
    if (!(dtau > 0.0)) throw std::invalid_argument("imaginary_step: dtau must be positive");
    require_same_grid(psi.grid, h_->grid(), "imaginary_step");
    const double a = 0.5 * dtau;
    h_->apply_raw(psi.values.data(), 0.0, work_.data());
    for (std::size_t i = 0; i < n_; ++i) {
      rhs_[i] = psi[i] - a * work_[i];
      guess_[i] = psi[i];
    }
    auto apply = [&](const cplx* x, cplx* y) { h_->apply_raw(x, 0.0, y); };
    stats_ = solver_.solve(apply, cplx{a, 0.0}, rhs_, guess_, opt_);
    total_iterations_ += stats_.iterations;
    psi.values.swap(guess_);
    guess_.resize(n_);
    normalize(psi);
    have_prev_ = false;
  }

 private:
  const Hamiltonian* h_;
  KrylovOptions opt_;
  std::size_t n_;
  std::vector<cplx> rhs_, guess_, work_, prev_;
  bool have_prev_ = false;
  double prev_dt_ = 0.0;
  ShiftedLanczos solver_;
  KrylovStats stats_;
  long total_iterations_ = 0;
};

inline ComplexField step(const ComplexField& psi, const RealField& V, const DipoleOperator& mu, double eps_mid,
                         double dt_signed, KrylovOptions opt = {}) {
  require_same_grid(psi.grid, V.grid, "step");
  Hamiltonian h(V, mu);
  Propagator p(h, opt);
  ComplexField out = psi;
  p.step(out, eps_mid, dt_signed);
  return out;
}

inline ComplexField imaginary_step(const ComplexField& psi, const RealField& V, double dtau, KrylovOptions opt = {}) {
  require_same_grid(psi.grid, V.grid, "imaginary_step");
  Hamiltonian h(V, DipoleOperator{});
  Propagator p(h, opt);
  ComplexField out = psi;
  p.imaginary_step(out, dtau);
  return out;
}

/// Evolves psi0 across the whole mesh of `field`. Forward runs t = 0 -> T,
/// backward runs T -> 0; either way step i <-> i+1 uses field.midpoint(i).
inline ComplexField propagate(const Hamiltonian& h, const ComplexField& psi0, const ControlField& field,
                              Direction direction, const StepObserver& observer = {}, KrylovOptions opt = {}) {
  if (!(field.polarization == h.mu())) throw std::invalid_argument("propagate: field polarization differs from H");
  Propagator p(h, opt);
  ComplexField psi = psi0;
  const TimeMesh& m = field.mesh;
  if (direction == Direction::forward) {
    for (int i = 0; i < m.steps; ++i) {
      p.step(psi, field.midpoint(i), m.dt);
      if (observer) observer(i + 1, m.time(i + 1), psi);
    }
  } else {
    for (int i = m.steps - 1; i >= 0; --i) {
      p.step(psi, field.midpoint(i), -m.dt);
      if (observer) observer(i, m.time(i), psi);
    }
  }
  return psi;
}

}  // namespace qoct
