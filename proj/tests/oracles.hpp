#pragma once

// Reference computations used by the tests. The dense matrices are assembled
// from the stencil definition, not from the operator code under test.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "qoct/grid.hpp"
#include "qoct/objective.hpp"

namespace oracle {

using cplx = std::complex<double>;

/// Interior index map of a grid: the outermost layer is the hard wall.
struct Interior {
  int n = 0;    // points per axis
  int m = 0;    // interior points per axis
  int dim = 1;
  int size() const { return dim == 1 ? m : m * m; }
  std::size_t node(int k) const {
    if (dim == 1) return static_cast<std::size_t>(k + 1);
    const int ix = k % m + 1, iy = k / m + 1;
    return static_cast<std::size_t>(iy) * n + ix;
  }
};

inline Interior interior(const qoct::Grid& g) {
  return {g.points_per_axis, g.points_per_axis - 2, g.dim};
}

/// -1/2 Laplacian (five-point, fourth order) plus V on the interior nodes.
inline Eigen::MatrixXd dense_h0(const qoct::Grid& g, const std::vector<double>& V) {
  const Interior in = interior(g);
  const int m = in.m;
  const double c = -0.5 / (12.0 * g.spacing * g.spacing);
  const double w[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(in.size(), in.size());
  for (int k = 0; k < in.size(); ++k) {
    const int ix = in.dim == 1 ? k : k % m;
    const int iy = in.dim == 1 ? 0 : k / m;
    for (int o = -2; o <= 2; ++o) {
      if (ix + o >= 0 && ix + o < m) H(k, k + o) += c * w[o + 2];
      if (in.dim == 2 && iy + o >= 0 && iy + o < m) H(k, k + o * m) += c * w[o + 2];
    }
    H(k, k) += V[in.node(k)];
  }
  return H;
}

inline Eigen::VectorXd dense_energies(const qoct::Grid& g, const std::vector<double>& V) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_h0(g, V), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Lowest eigenvectors of the dense operator, embedded on the full grid.
inline std::vector<std::vector<double>> dense_states(const qoct::Grid& g, const std::vector<double>& V, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_h0(g, V));
  const Interior in = interior(g);
  const double scale = 1.0 / std::sqrt(g.quadrature_weight());
  std::vector<std::vector<double>> out;
  for (int s = 0; s < k; ++s) {
    std::vector<double> v(g.size(), 0.0);
    for (int i = 0; i < in.size(); ++i) v[in.node(i)] = es.eigenvectors()(i, s) * scale;
    out.push_back(std::move(v));
  }
  return out;
}

/// Plain sequential sum of w * conj(a) b.
inline cplx direct_inner(const std::vector<cplx>& a, const std::vector<cplx>& b, double w) {
  cplx s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * w;
}

/// Smooth random complex field: a few Gaussians with random centres, widths,
/// complex weights and momenta, zero on the wall, normalized.
inline qoct::ComplexField smooth_random_state(const qoct::Grid& g, std::uint64_t seed, int terms = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Blob {
    double x, y, s, kx, ky;
    cplx a;
  };
  const double L = g.half_extent;
  std::vector<Blob> blobs;
  for (int t = 0; t < terms; ++t)
    blobs.push_back({0.3 * L * u(rng), 0.3 * L * u(rng), 0.12 * L * (1.5 + u(rng)), 1.5 * u(rng), 1.5 * u(rng),
                     {u(rng), u(rng)}});
  qoct::ComplexField f(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto p = g.point(i);
    const double y = g.dim == 2 ? p[1] : 0.0;
    cplx v{};
    for (const auto& b : blobs) {
      const double dy = g.dim == 2 ? y - b.y : 0.0;
      const double r2 = (p[0] - b.x) * (p[0] - b.x) + dy * dy;
      v += b.a * std::exp(-r2 / (2.0 * b.s * b.s)) * std::polar(1.0, b.kx * p[0] + b.ky * y);
    }
    f[i] = v;
  }
  qoct::apply_hard_wall(f);
  double s = 0.0;
  for (const auto& v : f.values) s += std::norm(v);
  const double scale = 1.0 / std::sqrt(s * g.quadrature_weight());
  for (auto& v : f.values) v *= scale;
  return f;
}

/// Uniform random values with the wall layer zeroed.
inline qoct::ComplexField random_state(const qoct::Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  qoct::ComplexField f(g);
  for (auto& v : f.values) v = {nd(rng), nd(rng)};
  qoct::apply_hard_wall(f);
  return f;
}

/// Central difference of a functional of psi with respect to the real and
/// imaginary parts at node k. Returns (dO/da, dO/db).
inline std::pair<double, double> central_difference(const std::function<double(const qoct::ComplexField&)>& O,
                                                    qoct::ComplexField psi, std::size_t k, double step) {
  const cplx orig = psi[k];
  psi[k] = orig + step;
  const double ap = O(psi);
  psi[k] = orig - step;
  const double am = O(psi);
  psi[k] = orig + cplx{0.0, step};
  const double bp = O(psi);
  psi[k] = orig - cplx{0.0, step};
  const double bm = O(psi);
  return {(ap - am) / (2.0 * step), (bp - bm) / (2.0 * step)};
}

/// O with the density term written as -2 + 2 int sqrt(n n_tg), the form that
/// agrees with -int (sqrt n - sqrt n_tg)^2 whenever n is normalized.
inline double objective_normalized_form(const qoct::ComplexField& psi, const qoct::RealField& n_tg, double w_c) {
  const qoct::Grid& g = psi.grid;
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += std::sqrt(std::norm(psi[i]) * n_tg[i]);
  const double o1 = -2.0 + 2.0 * s * g.quadrature_weight();
  return o1 + qoct::o2_current(qoct::current(psi), w_c);
}

/// Worst relative mismatch between chi_terminal and the finite-difference
/// derivative at `count` random nodes away from the wall where n is not tiny.
inline double gradient_check(const qoct::Grid& g, double w_c, int count, std::uint64_t seed) {
  using namespace qoct;
  const ComplexField psi = smooth_random_state(g, seed);
  const RealField n_tg = density(smooth_random_state(g, seed + 1000));
  const TargetSpec spec(n_tg, w_c);
  const ComplexField chi = chi_terminal(psi, spec);
  const auto O = [&](const ComplexField& p) { return objective_normalized_form(p, n_tg, w_c); };
  double nmax = 0.0, pmax = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    nmax = std::max(nmax, std::min(std::norm(psi[i]), n_tg[i]));
    pmax = std::max(pmax, std::abs(psi[i]));
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  const int margin = 4;
  double worst = 0.0;
  for (int found = 0; found < count;) {
    const std::size_t k = pick(rng);
    const int ix = static_cast<int>(k % g.points_per_axis), iy = static_cast<int>(k / g.points_per_axis);
    const int n = g.points_per_axis;
    if (ix < margin || ix >= n - margin) continue;
    if (g.dim == 2 && (iy < margin || iy >= n - margin)) continue;
    if (std::min(std::norm(psi[k]), n_tg[k]) < 1e-3 * nmax) continue;
    const auto [da, db] = central_difference(O, psi, k, 1e-5 * pmax);
    const cplx fd = cplx{da, db} / (2.0 * g.quadrature_weight());
    worst = std::max(worst, std::abs(fd - chi[k]) / std::abs(chi[k]));
    ++found;
  }
  return worst;
}

/// Exact psi(x, t) under H = -1/2 d^2/dx^2 for the normalized initial state
/// exp(-(x - x0)^2 / 2 s0^2 + i k0 (x - x0)).
inline cplx free_gaussian(double x, double t, double x0, double s0, double k0) {
  const double pi = std::acos(-1.0);
  const cplx st = cplx{s0 * s0, t};  // s0^2 + i t
  const cplx norm = std::pow(pi, -0.25) * std::sqrt(s0) / std::sqrt(st);
  const double xc = x - x0 - k0 * t;
  return norm * std::exp(-xc * xc / (2.0 * st) + cplx{0.0, k0 * (x - x0) - 0.5 * k0 * k0 * t});
}

/// Width <(x - <x>)^2>^{1/2} of the exact free Gaussian: s0/sqrt2 * sqrt(1 + t^2/s0^4).
inline double free_gaussian_width(double t, double s0) {
  return s0 / std::sqrt(2.0) * std::sqrt(1.0 + t * t / (s0 * s0 * s0 * s0));
}

/// Bhattacharyya coefficient int sqrt(n1 n2) of two normalized 1D Gaussian
/// densities with standard deviations s1, s2 and separation d.
inline double gaussian_overlap(double s1, double s2, double d) {
  const double v = s1 * s1 + s2 * s2;
  return std::sqrt(2.0 * s1 * s2 / v) * std::exp(-d * d / (4.0 * v));
}

}  // namespace oracle
