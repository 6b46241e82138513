#pragma once

// Low-lying eigenstates of H0 by imaginary-time propagation with deflation,
// parity classification, and target densities built from them.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qoct/grid.hpp"
#include "qoct/model.hpp"
#include "qoct/observables.hpp"
#include "qoct/propagator.hpp"

namespace qoct {

struct EigenPair {
  double energy = 0.0;
  ComplexField state;
  double residual = 0.0;  // max |H0 psi - E psi|
};

struct EigenOptions {
  double dtau = 0.0;          // 0 picks 2 / (spectral bound of H0)
  double tolerance = 1e-9;    // on the max-norm residual
  int max_steps = 400000;
  int check_every = 25;
  std::uint64_t seed = 20111;
  KrylovOptions krylov{1e-13, 1000};
};

namespace detail {

inline void project_out(ComplexField& psi, const std::vector<EigenPair>& lower) {
  // Two Gram-Schmidt passes keep the deflation at roundoff level.
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& e : lower) {
      const cplx c = inner_product(e.state, psi);
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] -= c * e.state[i];
    }
}

// Phase so that the first node of (near-)maximal magnitude is real positive.
inline void fix_phase(ComplexField& psi) {
  double m = 0.0;
  for (const auto& v : psi.values) m = std::max(m, std::abs(v));
  for (const auto& v : psi.values) {
    if (std::abs(v) >= (1.0 - 1e-9) * m) {
      const cplx ph = std::conj(v) / std::abs(v);
      for (auto& w : psi.values) w *= ph;
      return;
    }
  }
}

// max |H psi - E psi|, optionally with the deflated states projected out.
// Errors in those states leak into psi only along their span, which the
// final Rayleigh-Ritz step removes.
inline double eigen_residual(const Hamiltonian& h, const ComplexField& psi, double& energy,
                             const std::vector<EigenPair>* deflated = nullptr) {
  ComplexField r = h(psi);
  energy = inner_product(psi, r).real();
  for (std::size_t i = 0; i < psi.size(); ++i) r[i] -= energy * psi[i];
  if (deflated) project_out(r, *deflated);
  double m = 0.0;
  for (const auto& v : r.values) m = std::max(m, std::abs(v));
  return m;
}

// Cyclic Jacobi for a small real symmetric matrix (row-major, n x n).
// Returns eigenvalues; columns of v hold the eigenvectors.
inline std::vector<double> jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& v) {
  v.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-300) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = a[i * n + i];
  return w;
}

// Orthonormalize, diagonalize H0 in the span of the states, and rebuild
// them in energy order. H0 is real and the states stay real, so the
// projected matrix is real symmetric.
inline void rayleigh_ritz(const Hamiltonian& h, std::vector<EigenPair>& states) {
  const std::size_t n = states.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < i; ++j) {
        const cplx c = inner_product(states[j].state, states[i].state);
        for (std::size_t k = 0; k < states[i].state.size(); ++k) states[i].state[k] -= c * states[j].state[k];
      }
    normalize(states[i].state);
  }
  std::vector<ComplexField> hs;
  for (const auto& s : states) hs.push_back(h(s.state));
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = inner_product(states[i].state, hs[j]).real();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a[i * n + j] = a[j * n + i] = 0.5 * (a[i * n + j] + a[j * n + i]);
  std::vector<double> v;
  const std::vector<double> w = jacobi_eigen(a, n, v);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return w[x] < w[y]; });
  std::vector<EigenPair> out;
  for (std::size_t m : order) {
    ComplexField psi(states.front().state.grid);
    for (std::size_t j = 0; j < n; ++j) {
      const double c = v[j * n + m];
      for (std::size_t k = 0; k < psi.size(); ++k) psi[k] += c * states[j].state[k];
    }
    normalize(psi);
    fix_phase(psi);
    double energy = 0.0;
    const double residual = eigen_residual(h, psi, energy);
    out.push_back({energy, std::move(psi), residual});
  }
  states = std::move(out);
}

}  // namespace detail

/// The k lowest eigenpairs of the discrete H0, energies ascending.
inline std::vector<EigenPair> lowest_states(const RealField& V, int k, const EigenOptions& opt = {}) {
  if (k < 1) throw std::invalid_argument("lowest_states: k must be at least 1");
  const Grid& g = V.grid;
  Hamiltonian h(V, DipoleOperator{});
  double dtau = opt.dtau;
  // With dtau/2 * |lambda| <= 1 on the whole spectrum, every step lowers the
  // energy expectation.
  const double bound = std::max(h.spectral_bound(), std::abs(h.potential_minimum()));
  if (dtau <= 0.0 || 0.5 * dtau * bound > 1.0) dtau = 2.0 / bound;
  Propagator prop(h, opt.krylov);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double width = 0.25 * g.half_extent;

  std::vector<EigenPair> found;
  for (int s = 0; s < k; ++s) {
    ComplexField psi(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto p = g.point(i);
      const double r2 = p[0] * p[0] + p[1] * p[1];
      psi[i] = normal(rng) * std::exp(-0.5 * r2 / (width * width));
    }
    apply_hard_wall(psi);
    detail::project_out(psi, found);
    normalize(psi);
    double energy = 0.0;
    double residual = 0.0;
    bool converged = false;
    for (int it = 1; it <= opt.max_steps; ++it) {
      prop.imaginary_step(psi, dtau);
      detail::project_out(psi, found);
      normalize(psi);
      if (it % opt.check_every == 0) {
        residual = detail::eigen_residual(h, psi, energy, &found);
        if (residual <= opt.tolerance) {
          converged = true;
          break;
        }
      }
    }
    if (!converged) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "lowest_states: state %d did not converge after %d steps (residual %.3g)", s,
                    opt.max_steps, residual);
      throw NumericalError(buf);
    }
    found.push_back({energy, std::move(psi), residual});
  }
  detail::rayleigh_ritz(h, found);
  return found;
}

/// <psi| R psi> / <psi|psi> for the mirror x -> -x (axis 0) or y -> -y (axis 1).
inline double parity(const ComplexField& psi, int axis) {
  const Grid& g = psi.grid;
  if (axis >= g.dim) throw std::invalid_argument("parity: axis exceeds grid dimension");
  const auto n = static_cast<std::size_t>(g.points_per_axis);
  cplx s{};
  double nn = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const std::size_t ix = i % n, iy = i / n;
    const std::size_t j = axis == 0 ? (n - 1 - ix) + n * iy : ix + n * (n - 1 - iy);
    s += std::conj(psi[i]) * psi[j];
    nn += std::norm(psi[i]);
  }
  return s.real() / nn;
}

/// |sum_i c_i psi_i|^2.
inline RealField superposition_density(const std::vector<EigenPair>& states, const std::vector<cplx>& coeffs) {
  if (states.empty() || states.size() != coeffs.size())
    throw std::invalid_argument("superposition_density: need one coefficient per state");
  double total = 0.0;
  for (const auto& c : coeffs) total += std::norm(c);
  if (std::abs(total - 1.0) > 1e-10) throw std::invalid_argument("superposition_density: coefficients not normalized");
  ComplexField psi(states.front().state.grid);
  for (std::size_t s = 0; s < states.size(); ++s) {
    require_same_grid(states[s].state.grid, psi.grid, "superposition_density");
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] += coeffs[s] * states[s].state[i];
  }
  return density(psi);
}

/// Lowest-energy pair with the requested mirror parities (within 1e-6).
/// Members of a degenerate cluster (energies within 1e-6) are rotated into
/// parity eigenstates when none of them is one already.
inline EigenPair select_by_symmetry(const std::vector<EigenPair>& pairs, int parity_x,
                                    std::optional<int> parity_y = std::nullopt) {
  if (pairs.empty()) throw std::invalid_argument("select_by_symmetry: empty list");
  const Grid& g = pairs.front().state.grid;
  if (parity_y && g.dim == 1) throw std::invalid_argument("select_by_symmetry: parity_y requested on a 1D grid");
  if (std::abs(parity_x) != 1 || (parity_y && std::abs(*parity_y) != 1))
    throw std::invalid_argument("select_by_symmetry: parities must be +1 or -1");
  constexpr double tol = 1e-6;
  auto matches = [&](const ComplexField& s) {
    if (std::abs(parity(s, 0) - parity_x) > tol) return false;
    return !parity_y || std::abs(parity(s, 1) - *parity_y) <= tol;
  };
  auto mirror = [&](const ComplexField& s, int axis) {
    ComplexField out(g);
    const auto n = static_cast<std::size_t>(g.points_per_axis);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t ix = i % n, iy = i / n;
      out[i] = s[axis == 0 ? (n - 1 - ix) + n * iy : ix + n * (n - 1 - iy)];
    }
    return out;
  };
  auto project = [&](ComplexField s) {
    ComplexField r = mirror(s, 0);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.5 * (s[i] + double(parity_x) * r[i]);
    if (parity_y) {
      r = mirror(s, 1);
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.5 * (s[i] + double(*parity_y) * r[i]);
    }
    return s;
  };

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pairs[a].energy < pairs[b].energy; });

  for (std::size_t o = 0; o < order.size();) {
    std::vector<std::size_t> cluster{order[o]};
    std::size_t next = o + 1;
    while (next < order.size() && pairs[order[next]].energy - pairs[cluster.back()].energy <= tol)
      cluster.push_back(order[next++]);
    for (auto c : cluster)
      if (matches(pairs[c].state)) return pairs[c];
    if (cluster.size() > 1) {
      // Rotate within the cluster: project the member with the largest
      // symmetric component, then re-expand in the cluster basis.
      std::size_t best = cluster.front();
      double best_norm = -1.0;
      for (auto c : cluster) {
        const double pn = norm(project(pairs[c].state));
        if (pn > best_norm) best_norm = pn, best = c;
      }
      if (best_norm > 0.1) {
        const ComplexField p = project(pairs[best].state);
        ComplexField v(g);
        double energy = 0.0, weight = 0.0, residual = 0.0;
        for (auto c : cluster) {
          const cplx coef = inner_product(pairs[c].state, p);
          for (std::size_t i = 0; i < v.size(); ++i) v[i] += coef * pairs[c].state[i];
          weight += std::norm(coef);
          energy += std::norm(coef) * pairs[c].energy;
        }
        energy /= weight;
        for (auto c : cluster) {
          const double cn = std::abs(inner_product(pairs[c].state, p)) / std::sqrt(weight);
          double mx = 0.0;
          for (const auto& w : pairs[c].state.values) mx = std::max(mx, std::abs(w));
          residual += cn * (pairs[c].residual + std::abs(pairs[c].energy - energy) * mx);
        }
        normalize(v);
        detail::fix_phase(v);
        if (matches(v)) return {energy, std::move(v), residual};
      }
    }
    o = next;
  }
  throw std::invalid_argument("select_by_symmetry: no state has the requested parity");
}

}  // namespace qoct
