#pragma once

// Model potentials, the dipole coupling, and H(t) = -1/2 lap + V - (e.r) eps.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qoct/grid.hpp"

namespace qoct {

enum class PotentialTag { well_1d, well_2d, soft_coulomb_2d, custom_polynomial };

inline std::string_view to_string(PotentialTag t) {
  switch (t) {
    case PotentialTag::well_1d: return "well_1d";
    case PotentialTag::well_2d: return "well_2d";
    case PotentialTag::soft_coulomb_2d: return "soft_coulomb_2d";
    case PotentialTag::custom_polynomial: return "custom_polynomial";
  }
  return "?";
}

inline PotentialTag parse_potential_tag(std::string_view s) {
  if (s == "well_1d") return PotentialTag::well_1d;
  if (s == "well_2d") return PotentialTag::well_2d;
  if (s == "soft_coulomb_2d") return PotentialTag::soft_coulomb_2d;
  if (s == "custom_polynomial") return PotentialTag::custom_polynomial;
  throw std::invalid_argument("unknown potential kind '" + std::string(s) + "'");
}

struct PotentialKind {
  PotentialTag tag = PotentialTag::well_1d;
  // custom_polynomial only: V = sum_k cx[k] x^k + sum_k cy[k] y^k.
  std::vector<double> x_coefficients;
  std::vector<double> y_coefficients;

  bool operator==(const PotentialKind&) const = default;
};

namespace detail {
inline double horner(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}
}  // namespace detail

inline double potential_eval(const PotentialKind& kind, double x, double y = 0.0) {
  switch (kind.tag) {
    case PotentialTag::well_1d:
      return x * x * x * x / 64.0 + x * x * x / 256.0 - x * x / 4.0;
    case PotentialTag::well_2d:
      return x * x * x * x / 64.0 + x * x * x / 256.0 - x * x / 4.0 + 0.5 * y * y;
    case PotentialTag::soft_coulomb_2d:
      return -1.0 / std::sqrt(1.0 + x * x + y * y);
    case PotentialTag::custom_polynomial:
      return detail::horner(kind.x_coefficients, x) + detail::horner(kind.y_coefficients, y);
  }
  throw std::invalid_argument("potential_eval: unknown tag");
}

inline RealField potential_field(const PotentialKind& kind, const Grid& g) {
  return sample<double>(g, [&](double x, double y) { return potential_eval(kind, x, y); });
}

/// Dipole operator mu = e . r for a unit polarization vector e.
struct DipoleOperator {
  std::array<double, 2> polarization{1.0, 0.0};

  DipoleOperator() = default;
  explicit DipoleOperator(std::array<double, 2> e) : polarization(e) {
    const double n = std::hypot(e[0], e[1]);
    if (std::abs(n - 1.0) > 1e-12) throw std::invalid_argument("dipole: polarization must be a unit vector");
  }

  double at(double x, double y) const { return polarization[0] * x + polarization[1] * y; }
  bool operator==(const DipoleOperator&) const = default;
};

inline RealField dipole_field(const DipoleOperator& mu, const Grid& g) {
  return sample<double>(g, [&](double x, double y) { return mu.at(x, y); });
}

/// <chi| mu |psi> by grid quadrature.
inline cplx dipole_expectation(const ComplexField& chi, const ComplexField& psi, const DipoleOperator& mu) {
  require_same_grid(chi.grid, psi.grid, "dipole_expectation");
  const Grid& g = psi.grid;
  const cplx s = detail::pairwise_sum<cplx>(psi.size(), [&](std::size_t i) {
    const auto p = g.point(i);
    return mu.at(p[0], p[1]) * detail::conj_mul(chi[i], psi[i]);
  });
  return s * g.quadrature_weight();
}

/// Matrix-free H(eps) = -1/2 lap + V - mu eps restricted to the interior
/// nodes; the outer layer of the output is always zero.
class Hamiltonian {
 public:
  Hamiltonian(RealField potential, DipoleOperator mu)
      : grid_(potential.grid), potential_(std::move(potential)), mu_(mu), dipole_(dipole_field(mu, grid_)) {
    if (grid_.dim == 1 && mu_.polarization[1] != 0.0)
      throw std::invalid_argument("hamiltonian: 1D grid needs polarization along x");
  }

  const Grid& grid() const { return grid_; }
  const RealField& potential() const { return potential_; }
  const RealField& dipole() const { return dipole_; }
  const DipoleOperator& mu() const { return mu_; }

  // out = H(eps) in. The boundary layer of `in` is treated as zero.
  void apply(const ComplexField& in, double eps, ComplexField& out) const {
    apply_raw(in.values.data(), eps, out.values.data());
  }

  void apply_raw(const cplx* in, double eps, cplx* out) const {
    stencil(in, eps, [out](std::size_t k, const cplx& hv) { out[k] = hv; });
  }

  // Calls store(k, (H in)[k]) for every node, with zero on the boundary.
  template <class Store>
  void stencil(const cplx* in, double eps, Store&& store) const {
    const Grid& g = grid_;
    const int n = g.points_per_axis;
    const double h2 = g.spacing * g.spacing;
    const double c = -0.5 / (12.0 * h2);
    const double* v = potential_.values.data();
    const double* d = dipole_.values.data();
    if (g.dim == 1) {
      store(0, cplx{});
      store(static_cast<std::size_t>(n - 1), cplx{});
      auto at = [&](int i) { return (i <= 0 || i >= n - 1) ? cplx{} : in[i]; };
      for (int i : {1, n - 2}) {
        const cplx lap = -at(i - 2) + 16.0 * at(i - 1) - 30.0 * in[i] + 16.0 * at(i + 1) - at(i + 2);
        store(static_cast<std::size_t>(i), c * lap + (v[i] - eps * d[i]) * in[i]);
      }
      for (int i = 2; i < n - 2; ++i) {
        const cplx lap = -in[i - 2] + 16.0 * in[i - 1] - 30.0 * in[i] + 16.0 * in[i + 1] - in[i + 2];
        store(static_cast<std::size_t>(i), c * lap + (v[i] - eps * d[i]) * in[i]);
      }
      return;
    }
    const auto sn = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i < sn; ++i) {
      store(i, cplx{});
      store((sn - 1) * sn + i, cplx{});
    }
    for (int iy = 1; iy < n - 1; ++iy) {
      const std::size_t r = iy * sn;
      const cplx* row = in + r;
      store(r, cplx{});
      store(r + sn - 1, cplx{});
      // Rows on the wall (iy = 0, n-1) or beyond it contribute nothing.
      const cplx* m1 = iy - 1 >= 1 ? row - sn : nullptr;
      const cplx* p1 = iy + 1 <= n - 2 ? row + sn : nullptr;
      const cplx* m2 = iy - 2 >= 1 ? row - 2 * sn : nullptr;
      const cplx* p2 = iy + 2 <= n - 2 ? row + 2 * sn : nullptr;
      auto x_at = [&](int i) { return (i <= 0 || i >= n - 1) ? cplx{} : row[i]; };
      auto y_sum = [&](int ix) {
        cplx acc{};
        if (m1) acc += 16.0 * m1[ix];
        if (p1) acc += 16.0 * p1[ix];
        if (m2) acc -= m2[ix];
        if (p2) acc -= p2[ix];
        return acc;
      };
      auto finish = [&](int ix, const cplx& lapx, const cplx& lapy) {
        const std::size_t k = r + ix;
        store(k, c * (lapx + lapy - 30.0 * row[ix]) + (v[k] - eps * d[k]) * row[ix]);
      };
      for (int ix : {1, n - 2}) {
        const cplx lapx = -x_at(ix - 2) + 16.0 * x_at(ix - 1) - 30.0 * row[ix] + 16.0 * x_at(ix + 1) - x_at(ix + 2);
        finish(ix, lapx, y_sum(ix));
      }
      if (m1 && p1 && m2 && p2) {
        for (int ix = 2; ix < n - 2; ++ix) {
          const cplx lapx = -row[ix - 2] + 16.0 * row[ix - 1] - 30.0 * row[ix] + 16.0 * row[ix + 1] - row[ix + 2];
          const cplx lapy = 16.0 * (m1[ix] + p1[ix]) - (m2[ix] + p2[ix]);
          finish(ix, lapx, lapy);
        }
      } else {
        for (int ix = 2; ix < n - 2; ++ix) {
          const cplx lapx = -row[ix - 2] + 16.0 * row[ix - 1] - 30.0 * row[ix] + 16.0 * row[ix + 1] - row[ix + 2];
          finish(ix, lapx, y_sum(ix));
        }
      }
    }
  }

  // <chi| mu |psi> with the precomputed dipole values.
  cplx dipole_element(const ComplexField& chi, const ComplexField& psi) const {
    const double* d = dipole_.values.data();
    const cplx s = detail::pairwise_sum<cplx>(psi.size(), [&](std::size_t i) { return d[i] * detail::conj_mul(chi[i], psi[i]); });
    return s * grid_.quadrature_weight();
  }

  // {<chi|mu|psi>, <chi|mu^2|psi>} in one pass.
  std::array<cplx, 2> dipole_moments(const ComplexField& chi, const ComplexField& psi) const {
    const double* d = dipole_.values.data();
    struct Pair {
      cplx a, b;
      Pair& operator+=(const Pair& o) { a += o.a; b += o.b; return *this; }
      Pair operator+(const Pair& o) const { return {a + o.a, b + o.b}; }
    };
    const Pair s = detail::pairwise_sum<Pair>(psi.size(), [&](std::size_t i) {
      const cplx c = detail::conj_mul(chi[i], psi[i]);
      return Pair{d[i] * c, d[i] * d[i] * c};
    });
    const double w = grid_.quadrature_weight();
    return {s.a * w, s.b * w};
  }

  ComplexField operator()(const ComplexField& in, double eps = 0.0) const {
    require_same_grid(in.grid, grid_, "hamiltonian");
    ComplexField out(grid_);
    apply(in, eps, out);
    return out;
  }

  // Gershgorin upper bound on the spectrum of H(eps).
  double spectral_bound(double eps = 0.0) const {
    const double kin = 0.5 * grid_.dim * (1.0 + 16.0 + 30.0 + 16.0 + 1.0) / (12.0 * grid_.spacing * grid_.spacing);
    double vmax = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i)
      if (!grid_.on_boundary(i)) vmax = std::max(vmax, std::abs(potential_[i] - eps * dipole_[i]));
    return kin + vmax;
  }

  // Lower bound of V on interior nodes, hence of the spectrum of H(0).
  double potential_minimum() const {
    double vmin = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (grid_.on_boundary(i)) continue;
      if (first || potential_[i] < vmin) vmin = potential_[i];
      first = false;
    }
    return vmin;
  }

 private:
  Grid grid_;
  RealField potential_;
  DipoleOperator mu_;
  RealField dipole_;
};

inline ComplexField apply_hamiltonian(const ComplexField& psi, const RealField& V, const DipoleOperator& mu, double eps) {
  require_same_grid(psi.grid, V.grid, "apply_hamiltonian");
  return Hamiltonian(V, mu)(psi, eps);
}

}  // namespace qoct
