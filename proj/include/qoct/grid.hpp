#pragma once

// Uniform Cartesian grids in one and two dimensions, fields living on them,
// and the 4th-order finite-difference operators used throughout.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qoct {

using cplx = std::complex<double>;

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Square box [-L, L]^dim sampled with equal spacing on every axis.
///
/// The point count per axis is always odd so that the origin is a node.
/// Storage order is x-fastest: index = ix + N * iy.
struct Grid {
  int dim = 1;
  double spacing = 0.0;
  double half_extent = 0.0;
  int points_per_axis = 0;

  std::size_t size() const {
    std::size_t n = static_cast<std::size_t>(points_per_axis);
    return dim == 1 ? n : n * n;
  }
  double quadrature_weight() const { return dim == 1 ? spacing : spacing * spacing; }
  double coord(int i) const { return (i - (points_per_axis - 1) / 2) * spacing; }

  // (x, y) of a flat index; y is 0 in 1D.
  std::array<double, 2> point(std::size_t idx) const {
    const int n = points_per_axis;
    const int ix = static_cast<int>(idx % static_cast<std::size_t>(n));
    const int iy = dim == 2 ? static_cast<int>(idx / static_cast<std::size_t>(n)) : (n - 1) / 2;
    return {coord(ix), dim == 2 ? coord(iy) : 0.0};
  }

  // Flat index of the node closest to (x, y).
  std::size_t nearest(double x, double y = 0.0) const {
    auto snap = [&](double c) {
      long i = std::lround(c / spacing) + (points_per_axis - 1) / 2;
      if (i < 0) i = 0;
      if (i > points_per_axis - 1) i = points_per_axis - 1;
      return static_cast<std::size_t>(i);
    };
    std::size_t ix = snap(x);
    return dim == 1 ? ix : ix + static_cast<std::size_t>(points_per_axis) * snap(y);
  }

  bool contains(double x, double y = 0.0) const {
    const double tol = 1e-12 * half_extent;
    if (std::abs(x) > half_extent + tol) return false;
    return dim == 1 || std::abs(y) <= half_extent + tol;
  }

  // True for nodes on the outermost layer of the box.
  bool on_boundary(std::size_t idx) const {
    const int n = points_per_axis;
    const int ix = static_cast<int>(idx % static_cast<std::size_t>(n));
    if (ix == 0 || ix == n - 1) return true;
    if (dim == 1) return false;
    const int iy = static_cast<int>(idx / static_cast<std::size_t>(n));
    return iy == 0 || iy == n - 1;
  }

  bool operator==(const Grid&) const = default;
};

inline Grid build_grid(int dim, double spacing, double half_extent) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2, got " + std::to_string(dim));
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("grid: spacing must be positive");
  if (!(half_extent >= 4.0 * spacing) || !std::isfinite(half_extent))
    throw std::invalid_argument("grid: half_extent must be at least 4 spacings");
  Grid g;
  g.dim = dim;
  g.spacing = spacing;
  // A small slack keeps L/h = 100 from flooring to 99 through roundoff.
  const int half = static_cast<int>(std::floor(half_extent / spacing + 1e-9));
  g.points_per_axis = 2 * half + 1;
  g.half_extent = half_extent;
  return g;
}

template <class T>
struct Field {
  Grid grid;
  std::vector<T> values;

  Field() = default;
  explicit Field(const Grid& g, T fill = T{}) : grid(g), values(g.size(), fill) {}
  Field(const Grid& g, std::vector<T> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw GridMismatch("field: value count does not match grid");
  }

  std::size_t size() const { return values.size(); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }

  Field& operator+=(const Field& o) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  template <class S>
  Field& operator*=(S s) {
    for (auto& v : values) v *= s;
    return *this;
  }
};

using ComplexField = Field<cplx>;
using RealField = Field<double>;

/// dim real components per node, stored component-major.
struct VectorField {
  Grid grid;
  std::vector<double> values;

  VectorField() = default;
  explicit VectorField(const Grid& g) : grid(g), values(static_cast<std::size_t>(g.dim) * g.size(), 0.0) {}

  std::span<double> component(int c) { return {values.data() + c * grid.size(), grid.size()}; }
  std::span<const double> component(int c) const { return {values.data() + c * grid.size(), grid.size()}; }
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw GridMismatch(std::string(what) + ": fields live on different grids");
}

namespace detail {

// Complex products spelled out: std::complex operator* routes through the
// Annex G NaN-recovery path unless -fcx-limited-range is in effect.
inline cplx mul(const cplx& a, const cplx& b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline cplx conj_mul(const cplx& a, const cplx& b) {
  return {a.real() * b.real() + a.imag() * b.imag(), a.real() * b.imag() - a.imag() * b.real()};
}
inline double conj_mul(double a, double b) { return a * b; }

// Pairwise summation over fixed-size blocks; the reduction tree depends only
// on the length, so results are reproducible.
template <class T, class F>
T pairwise_sum(std::size_t n, F&& term) {
  constexpr std::size_t block = 128;
  constexpr std::size_t max_levels = 64;
  // Binary-counter pairwise reduction: level k holds the sum of 2^k blocks.
  T level[max_levels]{};
  bool used[max_levels]{};
  for (std::size_t start = 0; start < n; start += block) {
    const std::size_t end = std::min(n, start + block);
    T s{};
    for (std::size_t i = start; i < end; ++i) s += term(i);
    std::size_t k = 0;
    while (used[k]) {
      s = level[k] + s;
      used[k] = false;
      ++k;
    }
    level[k] = s;
    used[k] = true;
  }
  T total{};
  bool any = false;
  for (std::size_t k = 0; k < max_levels; ++k) {
    if (!used[k]) continue;
    total = any ? level[k] + total : level[k];
    any = true;
  }
  return total;
}

// Point count and memory stride along one axis.
struct AxisStride {
  int n;
  std::size_t stride;
};

inline AxisStride axis_stride(const Grid& g, int axis) {
  return {g.points_per_axis, axis == 0 ? std::size_t{1} : static_cast<std::size_t>(g.points_per_axis)};
}

inline int axis_index(const Grid& g, std::size_t idx, int axis) {
  const auto n = static_cast<std::size_t>(g.points_per_axis);
  return static_cast<int>(axis == 0 ? idx % n : idx / n);
}

}  // namespace detail

/// Quadrature of conj(a)*b over the grid.
template <class T>
T inner_product(const Field<T>& a, const Field<T>& b) {
  require_same_grid(a.grid, b.grid, "inner_product");
  const T sum = detail::pairwise_sum<T>(a.size(), [&](std::size_t i) { return detail::conj_mul(a[i], b[i]); });
  return sum * a.grid.quadrature_weight();
}

inline double norm_squared(const ComplexField& f) {
  return detail::pairwise_sum<double>(f.size(), [&](std::size_t i) { return std::norm(f[i]); }) *
         f.grid.quadrature_weight();
}

inline double norm(const ComplexField& f) { return std::sqrt(norm_squared(f)); }

inline double integrate(const RealField& f) {
  return detail::pairwise_sum<double>(f.size(), [&](std::size_t i) { return f[i]; }) * f.grid.quadrature_weight();
}

inline void normalize(ComplexField& f) {
  const double n = norm(f);
  if (!(n > 0.0)) throw std::runtime_error("normalize: zero field");
  f *= 1.0 / n;
}

/// First derivative along one axis.
///
/// Fourth-order central differences in the interior, fourth-order one-sided
/// closures on the two outermost layers.
template <class T>
Field<T> derivative(const Field<T>& f, int axis) {
  const Grid& g = f.grid;
  if (axis < 0 || axis >= g.dim) throw std::invalid_argument("derivative: axis out of range");
  const auto [n, s] = detail::axis_stride(g, axis);
  if (n < 5) throw std::invalid_argument("derivative: need at least 5 points per axis");
  const double inv = 1.0 / (12.0 * g.spacing);
  Field<T> out(g);
  const T* v = f.values.data();
  for (std::size_t idx = 0; idx < f.size(); ++idx) {
    const int i = detail::axis_index(g, idx, axis);
    T d;
    if (i >= 2 && i <= n - 3) {
      d = (v[idx - 2 * s] - 8.0 * v[idx - s] + 8.0 * v[idx + s] - v[idx + 2 * s]);
    } else if (i == 0) {
      d = (-25.0 * v[idx] + 48.0 * v[idx + s] - 36.0 * v[idx + 2 * s] + 16.0 * v[idx + 3 * s] - 3.0 * v[idx + 4 * s]);
    } else if (i == 1) {
      d = (-3.0 * v[idx - s] - 10.0 * v[idx] + 18.0 * v[idx + s] - 6.0 * v[idx + 2 * s] + v[idx + 3 * s]);
    } else if (i == n - 2) {
      d = (3.0 * v[idx + s] + 10.0 * v[idx] - 18.0 * v[idx - s] + 6.0 * v[idx - 2 * s] - v[idx - 3 * s]);
    } else {
      d = (25.0 * v[idx] - 48.0 * v[idx - s] + 36.0 * v[idx - 2 * s] - 16.0 * v[idx - 3 * s] + 3.0 * v[idx - 4 * s]);
    }
    out[idx] = d * inv;
  }
  return out;
}

/// Transpose of derivative() as a matrix: out_k = sum_i D_ik f_i. Equal to
/// -derivative(f) away from the two outermost layers.
template <class T>
Field<T> derivative_transpose(const Field<T>& f, int axis) {
  const Grid& g = f.grid;
  if (axis < 0 || axis >= g.dim) throw std::invalid_argument("derivative_transpose: axis out of range");
  const auto [n, s] = detail::axis_stride(g, axis);
  if (n < 5) throw std::invalid_argument("derivative_transpose: need at least 5 points per axis");
  static constexpr double rows[5][5] = {
      {-25.0, 48.0, -36.0, 16.0, -3.0},  // i = 0, offsets 0..4
      {-3.0, -10.0, 18.0, -6.0, 1.0},    // i = 1, offsets -1..3
      {1.0, -8.0, 0.0, 8.0, -1.0},       // interior, offsets -2..2
      {-1.0, 6.0, -18.0, 10.0, 3.0},     // i = n-2, offsets -3..1
      {3.0, -16.0, 36.0, -48.0, 25.0},   // i = n-1, offsets -4..0
  };
  const double inv = 1.0 / (12.0 * g.spacing);
  Field<T> out(g);
  const T* v = f.values.data();
  T* o = out.values.data();
  for (std::size_t idx = 0; idx < f.size(); ++idx) {
    const int i = detail::axis_index(g, idx, axis);
    int row = 2, first = -2;
    if (i == 0) row = 0, first = 0;
    else if (i == 1) row = 1, first = -1;
    else if (i == n - 2) row = 3, first = -3;
    else if (i == n - 1) row = 4, first = -4;
    const T w = v[idx] * inv;
    for (int c = 0; c < 5; ++c) {
      const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(idx) + static_cast<std::ptrdiff_t>(first + c) * static_cast<std::ptrdiff_t>(s);
      o[k] += rows[row][c] * w;
    }
  }
  return out;
}

template <class T>
std::vector<Field<T>> gradient(const Field<T>& f) {
  std::vector<Field<T>> out;
  out.reserve(static_cast<std::size_t>(f.grid.dim));
  for (int a = 0; a < f.grid.dim; ++a) out.push_back(derivative(f, a));
  return out;
}

inline RealField divergence(const VectorField& v) {
  const Grid& g = v.grid;
  if (v.values.size() != static_cast<std::size_t>(g.dim) * g.size())
    throw GridMismatch("divergence: component count does not match grid");
  RealField out(g);
  for (int a = 0; a < g.dim; ++a) {
    RealField comp(g, std::vector<double>(v.component(a).begin(), v.component(a).end()));
    out += derivative(comp, a);
  }
  return out;
}

namespace detail {

// Accumulates coef * d^2 f / d axis^2 into out with a 5-point central
// stencil; neighbours beyond the box read as zero (hard wall).
template <class T>
void add_second_derivative(const Grid& g, const T* f, T* out, int axis, double coef) {
  const int n = g.points_per_axis;
  const double c = coef / (12.0 * g.spacing * g.spacing);
  const std::size_t total = g.size();
  if (axis == 0) {
    const std::size_t rows = total / static_cast<std::size_t>(n);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* a = f + r * n;
      T* o = out + r * n;
      auto at = [&](int i) { return (i < 0 || i >= n) ? T{} : a[i]; };
      for (int i : {0, 1}) o[i] += c * (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * a[i] + 16.0 * at(i + 1) - at(i + 2));
      for (int i = 2; i < n - 2; ++i)
        o[i] += c * (-a[i - 2] + 16.0 * a[i - 1] - 30.0 * a[i] + 16.0 * a[i + 1] - a[i + 2]);
      for (int i : {n - 2, n - 1})
        o[i] += c * (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * a[i] + 16.0 * at(i + 1) - at(i + 2));
    }
  } else {
    const auto sn = static_cast<std::size_t>(n);
    for (int iy = 0; iy < n; ++iy) {
      const T* row = f + iy * sn;
      const T* m1 = iy >= 1 ? row - sn : nullptr;
      const T* m2 = iy >= 2 ? row - 2 * sn : nullptr;
      const T* p1 = iy + 1 < n ? row + sn : nullptr;
      const T* p2 = iy + 2 < n ? row + 2 * sn : nullptr;
      T* o = out + iy * sn;
      for (std::size_t ix = 0; ix < sn; ++ix) {
        T acc = -30.0 * row[ix];
        if (m1) acc += 16.0 * m1[ix];
        if (p1) acc += 16.0 * p1[ix];
        if (m2) acc -= m2[ix];
        if (p2) acc -= p2[ix];
        o[ix] += c * acc;
      }
    }
  }
}

}  // namespace detail

/// Fourth-order Laplacian with zero values assumed beyond the box. As a
/// matrix it is symmetric, which makes H Hermitian on fields that vanish on
/// the outer layer.
template <class T>
Field<T> laplacian(const Field<T>& f) {
  Field<T> out(f.grid);
  for (int a = 0; a < f.grid.dim; ++a) detail::add_second_derivative(f.grid, f.values.data(), out.values.data(), a, 1.0);
  return out;
}

/// Zeroes the outermost layer.
template <class T>
void apply_hard_wall(Field<T>& f) {
  const Grid& g = f.grid;
  const int n = g.points_per_axis;
  if (g.dim == 1) {
    f[0] = T{};
    f[n - 1] = T{};
    return;
  }
  const auto sn = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i < sn; ++i) {
    f[i] = T{};
    f[(sn - 1) * sn + i] = T{};
    f[i * sn] = T{};
    f[i * sn + sn - 1] = T{};
  }
}

/// Samples fn(x, y) at every node.
template <class T, class Fn>
Field<T> sample(const Grid& g, Fn&& fn) {
  Field<T> out(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto p = g.point(i);
    out[i] = static_cast<T>(fn(p[0], p[1]));
  }
  return out;
}

}  // namespace qoct
