#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qoct/objective.hpp"
#include "qoct/spectrum.hpp"

using namespace qoct;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
RealField gaussian_density(const Grid& g, double x0, double s) {
  RealField n = sample<double>(g, [&](double x, double) {
    return std::exp(-(x - x0) * (x - x0) / (2 * s * s)) / (std::sqrt(2 * std::acos(-1.0)) * s);
  });
  return n;
}

}  // namespace

TEST_CASE("alpha", "[objective]") {
  CHECK_THAT(alpha(150.0, 300.0), WithinAbs(0.25, 1e-12));
  CHECK(alpha(0.0, 300.0) == alpha_max);
  CHECK(alpha(300.0, 300.0) == alpha_max);
  for (double t = 0.0; t <= 300.0; t += 0.37) {
    CHECK_THAT(alpha(t, 300.0), WithinRel(alpha(300.0 - t, 300.0), 1e-12));
    CHECK(alpha(t, 300.0) >= 0.25);
    CHECK(alpha(t, 300.0) <= alpha_max);
  }
  // Monotone ramp-down towards the plateau.
  for (double t = 0.5; t < 150.0; t += 0.5) CHECK(alpha(t, 300.0) <= alpha(t - 0.5, 300.0));
  CHECK_THROWS_AS(alpha(-1.0, 300.0), std::invalid_argument);
  CHECK_THROWS_AS(alpha(301.0, 300.0), std::invalid_argument);
  CHECK_THROWS_AS(alpha(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("fluence penalty", "[objective]") {
  const TimeMesh m = TimeMesh::covering(300.0, 0.1);
  const ControlField zero(m, DipoleOperator{});
  CHECK(fluence_penalty(zero) == 0.0);

  const ControlField f = sine_squared_guess(m, DipoleOperator{}, 0.03, 0.2);
  ControlField f2 = f;
  for (auto& v : f2.samples) v *= 2.0;
  CHECK(fluence_penalty(f) < 0.0);
  CHECK_THAT(fluence_penalty(f2), WithinRel(4.0 * fluence_penalty(f), 1e-12));

  // Box pulse on the plateau: alpha ~ 1/4 there.
  ControlField box(m, DipoleOperator{});
  const double e0 = 0.02;
  for (int i = 0; i <= m.steps; ++i)
    if (m.time(i) >= 30.0 - 1e-9 && m.time(i) <= 270.0 + 1e-9) box.samples[i] = e0;
  CHECK_THAT(fluence_penalty(box), WithinRel(-e0 * e0 * 240.0 / 4.0, 0.01));
}

TEST_CASE("density overlap O1", "[objective]") {
  const Grid g = build_grid(1, 0.05, 15.0);
  const RealField a = gaussian_density(g, -0.5, 1.0);
  const RealField b = gaussian_density(g, 0.5, 1.5);

  CHECK(o1_density_overlap(a, a) == 0.0);
  CHECK_THAT(o1_density_overlap(a, b), WithinAbs(o1_density_overlap(b, a), 1e-15));
  CHECK_THAT(overlap_mapped(o1_density_overlap(a, b)), WithinAbs(oracle::gaussian_overlap(1.0, 1.5, 1.0), 1e-6));

  RealField left(g), right(g);
  for (std::size_t i = 0; i < g.size(); ++i) (g.point(i)[0] < 0 ? left[i] : right[i]) = 1.0;
  left *= 1.0 / integrate(left);
  right *= 1.0 / integrate(right);
  CHECK_THAT(integrate(left), WithinAbs(1.0, 1e-12));
  CHECK_THAT(integrate(right), WithinAbs(1.0, 1e-12));
  CHECK_THAT(o1_density_overlap(left, right), WithinAbs(-2.0, 1e-12));

  const double o1 = o1_density_overlap(a, b);
  CHECK(o1 <= 0.0);
  CHECK(o1 >= -2.0);

  RealField tiny = a;
  tiny[3] = -5e-13;
  CHECK_NOTHROW(o1_density_overlap(tiny, b));
  tiny[3] = -1e-9;
  CHECK_THROWS_AS(o1_density_overlap(tiny, b), std::domain_error);
  CHECK_THROWS_AS(o1_density_overlap(a, RealField(build_grid(1, 0.1, 15.0))), GridMismatch);
}

TEST_CASE("current penalty O2", "[objective]") {
  const Grid g = build_grid(1, 0.05, 10.0);
  ComplexField phi = sample<cplx>(g, [](double x, double) { return std::exp(-x * x / 2.0); });
  apply_hard_wall(phi);
  normalize(phi);
  CHECK(o2_current(current(phi), 10.0) == 0.0);

  const double k = 0.7, w_c = 10.0;
  ComplexField psi = phi;
  for (std::size_t i = 0; i < g.size(); ++i) psi[i] *= std::polar(1.0, k * g.point(i)[0]);
  double phi4 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) phi4 += std::pow(std::norm(phi[i]), 2) * g.spacing;
  CHECK_THAT(o2_current(current(psi), w_c), WithinRel(-w_c * k * k * phi4, 2e-5));
  CHECK(o2_current(current(psi), 0.0) == 0.0);
  CHECK_THROWS_AS(o2_current(current(psi), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(TargetSpec(density(psi), -1.0), std::invalid_argument);
}

TEST_CASE("evaluate_J", "[objective]") {
  const Grid g = build_grid(2, 0.3, 6.9);
  const auto s = lowest_states(potential_field(PotentialKind{PotentialTag::well_2d, {}, {}}, g), 2);
  const ControlField zero(TimeMesh::covering(300.0, 0.1), DipoleOperator{});

  const FunctionalBreakdown at_max = evaluate_J(s[0].state, zero, TargetSpec(density(s[0].state), 20.0));
  CHECK_THAT(at_max.J, WithinAbs(0.0, 1e-14));
  CHECK_THAT(at_max.overlap_mapped, WithinAbs(1.0, 1e-14));

  const RealField n0 = density(s[0].state), n1 = density(s[1].state);
  double bc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) bc += std::sqrt(n0[i] * n1[i]) * g.quadrature_weight();
  const ControlField f = sine_squared_guess(zero.mesh, DipoleOperator{}, 0.05, 0.157);
  const FunctionalBreakdown b = evaluate_J(s[0].state, f, TargetSpec(n1, 20.0));
  CHECK_THAT(b.overlap_mapped, WithinAbs(bc, 1e-10));
  CHECK(b.overlap_mapped == 1.0 + 0.5 * b.O1);
  CHECK_THAT(b.J, WithinAbs(b.O1 + b.O2 + b.F_penalty, 1e-12));
  CHECK(b.F_penalty < 0.0);
  CHECK(b.O2 <= 0.0);
}

TEST_CASE("chi_terminal special cases", "[objective]") {
  const Grid g = build_grid(2, 0.2, 5.0);
  const ComplexField psi = oracle::smooth_random_state(g, 5);

  const ComplexField same = chi_terminal(psi, TargetSpec(density(psi), 0.0));
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::norm(psi[i]) >= density_floor) CHECK(std::abs(same[i] - psi[i]) <= 1e-15 * std::abs(psi[i]));

  ComplexField real(g);
  for (std::size_t i = 0; i < g.size(); ++i) real[i] = psi[i].real();
  normalize(real);
  const RealField n_tg = density(oracle::smooth_random_state(g, 6));
  const ComplexField c = chi_terminal(real, TargetSpec(n_tg, 40.0));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double n = std::norm(real[i]);
    const cplx want = g.on_boundary(i) ? cplx{} : real[i] * std::sqrt(n_tg[i] / std::max(n, density_floor));
    CHECK(std::abs(c[i] - want) <= 1e-14 * (std::abs(want) + 1e-300));
  }

  // The floor caps the ratio at nodes of psi.
  ComplexField holed = psi;
  holed[g.nearest(0.0, 0.0)] = 0.0;
  const ComplexField ch = chi_terminal(holed, TargetSpec(n_tg, 0.0));
  for (const auto& v : ch.values) CHECK(std::isfinite(std::abs(v)));
  CHECK(ch[g.nearest(0.0, 0.0)] == cplx{});
}

TEST_CASE("chi_terminal matches finite differences of O", "[objective]") {
  for (double w_c : {0.0, 10.0}) {
    INFO("w_c = " << w_c);
    CHECK(oracle::gradient_check(build_grid(1, 0.05, 8.0), w_c, 20, 101) <= 1e-5);
    CHECK(oracle::gradient_check(build_grid(2, 0.1, 5.0), w_c, 20, 202) <= 1e-5);
  }
}

TEST_CASE("current terms of chi scale linearly with w_c", "[objective]") {
  const Grid g = build_grid(2, 0.2, 5.0);
  const ComplexField psi = oracle::smooth_random_state(g, 7);
  const RealField n_tg = density(oracle::smooth_random_state(g, 8));
  const ComplexField base = chi_terminal(psi, TargetSpec(n_tg, 0.0));
  std::vector<ComplexField> diff;
  for (double w : {1.0, 2.0, 4.0}) {
    ComplexField c = chi_terminal(psi, TargetSpec(n_tg, w));
    c -= base;
    diff.push_back(c);
  }
  double scale = 0.0;
  for (const auto& v : diff[0].values) scale = std::max(scale, std::abs(v));
  REQUIRE(scale > 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::abs(diff[1][i] - 2.0 * diff[0][i]) <= 1e-12 * scale);
    CHECK(std::abs(diff[2][i] - 4.0 * diff[0][i]) <= 1e-12 * scale);
  }
}
