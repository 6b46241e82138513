#pragma once

// Solver for the shifted systems (1 + s H) x = b of the implicit midpoint
// rule, H Hermitian: s = i dt/2 in real time, s = dtau/2 in imaginary time.
//
// Lanczos on H in the Hermitian inner product with a Galerkin condition,
// carried out as a short LDL^T recurrence (D-Lanczos). The projected matrix
// 1 + s T has a positive definite Hermitian part whenever 1 + Re(s) T is
// positive, so the recurrence cannot break down. One application of H per
// iteration.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "qoct/grid.hpp"

namespace qoct {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KrylovOptions {
  double tolerance = 1e-12;  // on ||r|| / ||b||
  int max_iterations = 1000;
};

struct KrylovStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

class ShiftedLanczos {
 public:
  using cplx = std::complex<double>;

  // apply_h(x, y) must compute y = H x for vectors of length n. x holds the
  // starting guess on entry and the solution on return.
  template <class ApplyH>
  KrylovStats solve(ApplyH&& apply_h, cplx s, const std::vector<cplx>& b, std::vector<cplx>& x,
                    const KrylovOptions& opt) {
    const std::size_t n = b.size();
    v_.resize(n);
    vprev_.resize(n);
    w_.resize(n);
    p_.resize(n);
    KrylovStats st;
    const double bnorm = norm(b);
    if (bnorm == 0.0) {
      std::fill(x.begin(), x.end(), cplx{});
      return st;
    }
    const double target = opt.tolerance * bnorm;
    for (;;) {
      // True residual; the inner loop only tracks an estimate.
      apply_h(x.data(), w_.data());
      for (std::size_t i = 0; i < n; ++i) v_[i] = b[i] - x[i] - detail::mul(s, w_[i]);
      const double rnorm = norm(v_);
      st.relative_residual = rnorm / bnorm;
      if (rnorm <= target) return st;
      if (st.iterations >= opt.max_iterations) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "krylov: no convergence after %d iterations (relative residual %.3g)",
                      st.iterations, st.relative_residual);
        throw NumericalError(buf);
      }
      scale(v_, 1.0 / rnorm);
      std::fill(vprev_.begin(), vprev_.end(), cplx{});
      std::fill(p_.begin(), p_.end(), cplx{});
      double beta = 0.0;
      cplx eta{}, zeta = rnorm;
      while (st.iterations < opt.max_iterations) {
        apply_h(v_.data(), w_.data());
        double alpha = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          w_[i] -= beta * vprev_[i];
          alpha += v_[i].real() * w_[i].real() + v_[i].imag() * w_[i].imag();
        }
        for (std::size_t i = 0; i < n; ++i) w_[i] -= alpha * v_[i];
        const double beta_next = norm(w_);

        const cplx diag = 1.0 + s * alpha;
        const cplx off = s * beta;
        if (st.iterations == 0 || beta == 0.0) {
          eta = diag;
        } else {
          const cplx lambda = off / eta;
          zeta = -lambda * zeta;
          eta = diag - lambda * off;
        }
        if (!(std::abs(eta) > 0.0) || !std::isfinite(std::abs(eta))) throw NumericalError("krylov: breakdown");
        const cplx inv_eta = 1.0 / eta;
        for (std::size_t i = 0; i < n; ++i) {
          p_[i] = detail::mul(v_[i] - detail::mul(off, p_[i]), inv_eta);
          x[i] += detail::mul(zeta, p_[i]);
        }
        ++st.iterations;
        const double estimate = std::abs(s) * beta_next * std::abs(zeta / eta);
        if (estimate <= 0.5 * target || beta_next == 0.0) break;
        vprev_.swap(v_);
        const double inv_beta = 1.0 / beta_next;
        for (std::size_t i = 0; i < n; ++i) v_[i] = w_[i] * inv_beta;
        beta = beta_next;
      }
    }
  }

 private:
  static double norm(const std::vector<cplx>& a) {
    double s = 0.0;
    for (const auto& v : a) s += v.real() * v.real() + v.imag() * v.imag();
    return std::sqrt(s);
  }
  static void scale(std::vector<cplx>& a, double f) {
    for (auto& v : a) v *= f;
  }

  std::vector<cplx> v_, vprev_, w_, p_;
};

}  // namespace qoct
