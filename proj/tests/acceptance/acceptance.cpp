// qoct_acceptance <group> <work_dir>
//
// Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
// Groups: fast, well1d, well2d, hydrogen, repro.

#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "qoct/run.hpp"

using namespace qoct;
namespace fs = std::filesystem;

namespace {

const fs::path preset_dir = QOCT_PRESET_DIR;
int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("%s %-8s %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

__attribute__((format(printf, 1, 2))) std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs a preset with overrides into dir and returns its summary.
nlohmann::json run_preset(const std::string& preset, const ConfigOverrides& ov, const fs::path& dir) {
  RunConfig c = parse_config(preset_dir / (preset + ".cfg"), ov);
  c.output_directory = dir.string();
  fs::remove_all(dir);
  RunOptions o;
  o.threads = 1;
  const auto t0 = std::chrono::steady_clock::now();
  int last = -1;
  o.log = [&](const std::string& s) {
    if (s.rfind("iteration ", 0) == 0) {
      const int k = std::stoi(s.substr(10));
      if (k / 25 == last / 25 && k != 0) return;
      last = k;
    }
    progress(preset + ": " + s);
  };
  const ExitCode code = run(c, o);
  progress(preset + fmt(": %.0f s", seconds_since(t0)));
  if (code != ExitCode::ok) {
    const auto err = nlohmann::json::parse(slurp(dir / "error.json"));
    throw std::runtime_error(preset + " run failed: " + err["message"].get<std::string>());
  }
  return nlohmann::json::parse(slurp(dir / "summary.json"));
}

double monitor_rms(const nlohmann::json& summary, double x, double y) {
  for (const auto& m : summary["stability"]["monitors"])
    if (std::abs(m["x"].get<double>() - x) < 1e-9 && std::abs(m["y"].get<double>() - y) < 1e-9)
      return m["rms"].get<double>();
  throw std::runtime_error("no monitor at the requested point");
}

double loss(const nlohmann::json& s) { return s["stability"]["overlap_loss_rms"].get<double>(); }
double overlap(const nlohmann::json& s) { return s["optimize"]["overlap_mapped"].get<double>(); }

// ---------------------------------------------------------------- fast

void ac1() {
  double worst = 0.0;
  struct Case {
    int dim;
    double h, L;
    PotentialKind v;
    int k;
  };
  const Case cases[] = {
      {1, 0.05, 9.95, {PotentialTag::well_1d, {}, {}}, 4},
      {2, 0.3, 8.7, {PotentialTag::well_2d, {}, {}}, 3},
      {2, 0.5, 14.5, {PotentialTag::soft_coulomb_2d, {}, {}}, 4},
  };
  for (const Case& c : cases) {
    const Grid g = build_grid(c.dim, c.h, c.L);
    const RealField V = potential_field(c.v, g);
    const auto s = lowest_states(V, c.k);
    const auto dense = oracle::dense_energies(g, V.values);
    for (int k = 0; k < c.k; ++k) worst = std::max(worst, std::abs(s[k].energy - dense[k]) / std::abs(dense[k]));
  }
  const Grid g = build_grid(1, 0.05, 8.0);
  const RealField V = potential_field(PotentialKind{PotentialTag::custom_polynomial, {0.0, 0.0, 0.5}, {}}, g);
  const double e0 = lowest_states(V, 1)[0].energy;
  report("AC1", worst <= 1e-8 && std::abs(e0 - 0.5) <= 1e-5,
         fmt("dense oracle rel %.2e (tol 1e-8); oscillator E0 - 1/2 = %.2e (tol 1e-5)", worst, e0 - 0.5));
}

void ac2() {
  const Grid g = build_grid(1, 0.2, 10.0);
  const RealField V = potential_field(PotentialKind{PotentialTag::well_1d, {}, {}}, g);
  const Hamiltonian h(V, DipoleOperator{});
  const auto s = lowest_states(V, 2);
  const double gap = s[1].energy - s[0].energy;

  const ControlField long_field = sine_squared_guess(TimeMesh(0.05, 10000), DipoleOperator{}, 0.05, gap);
  const ComplexField fwd = propagate(h, s[0].state, long_field, Direction::forward);
  const double drift = std::abs(norm_squared(fwd) - 1.0);
  ComplexField back = propagate(h, fwd, long_field, Direction::backward);
  back -= s[0].state;
  const double recovery = norm(back);

  // Fixed horizon; dt, dt/2 against dt/8, field sampled on each mesh.
  const double T = 20.0, dt = 0.1;
  auto run_dt = [&](double step) {
    return propagate(h, s[0].state, sine_squared_guess(TimeMesh::covering(T, step), DipoleOperator{}, 0.2, gap),
                     Direction::forward);
  };
  const ComplexField ref = run_dt(dt / 8);
  ComplexField e1 = run_dt(dt), e2 = run_dt(dt / 2);
  e1 -= ref;
  e2 -= ref;
  const double ratio = norm(e1) / norm(e2);
  report("AC2", drift <= 1e-9 && recovery <= 1e-8 && ratio >= 3.5 && ratio <= 4.5,
         fmt("norm drift %.2e over 1e4 steps (tol 1e-9); recovery %.2e (tol 1e-8); dt-halving ratio %.3f "
             "(3.5-4.5)",
             drift, recovery, ratio));
}

void ac3() {
  double worst = 0.0;
  for (double w_c : {0.0, 10.0}) {
    worst = std::max(worst, oracle::gradient_check(build_grid(1, 0.05, 8.0), w_c, 20, 11));
    worst = std::max(worst, oracle::gradient_check(build_grid(2, 0.1, 5.0), w_c, 20, 12));
  }
  report("AC3", worst <= 1e-5, fmt("chi(T) vs central differences, 20 points, w_c in {0, 10}: rel %.2e (tol 1e-5)", worst));
}

void ac4() {
  auto worst = [](double h, double dt) {
    const Grid g = build_grid(1, h, 10.0);
    const RealField V = potential_field(PotentialKind{PotentialTag::well_1d, {}, {}}, g);
    const Hamiltonian ham(V, DipoleOperator{});
    ComplexField psi = sample<cplx>(g, [](double x, double) {
      return std::exp(-(x + 1.0) * (x + 1.0) / 1.28) * std::polar(1.0, 1.5 * x);
    });
    apply_hard_wall(psi);
    normalize(psi);
    const ControlField f = sine_squared_guess(TimeMesh::covering(4.0, dt), DipoleOperator{}, 0.1, 0.5);
    ComplexField before = psi;
    double w = 0.0;
    propagate(ham, psi, f, Direction::forward, [&](int, double, const ComplexField& now) {
      w = std::max(w, continuity_residual(before, now, dt));
      before = now;
    });
    return w;
  };
  const double coarse = worst(0.2, 0.05), fine = worst(0.1, 0.025);
  report("AC4", coarse / fine >= 3.0,
         fmt("continuity residual %.3e -> %.3e, ratio %.2f (tol >= 3)", coarse, fine, coarse / fine));
}

void ac8() {
  bool ok = true;
  std::string detail;
  // O1 range and endpoints.
  const Grid g = build_grid(1, 0.1, 8.0);
  const RealField left = sample<double>(g, [](double x, double) { return x < -0.05 ? std::exp(-(x + 4) * (x + 4)) : 0.0; });
  const RealField right = sample<double>(g, [](double x, double) { return x > 0.05 ? std::exp(-(x - 4) * (x - 4)) : 0.0; });
  RealField l = left, r = right;
  l *= 1.0 / integrate(left);
  r *= 1.0 / integrate(right);
  const double same = o1_density_overlap(l, l), disjoint = o1_density_overlap(l, r);
  ok = ok && same == 0.0 && std::abs(disjoint + 2.0) <= 1e-12;
  double lo = 0.0, hi = -2.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const RealField a = density(oracle::smooth_random_state(g, seed)), b = density(oracle::smooth_random_state(g, seed + 99));
    const double o = o1_density_overlap(a, b);
    lo = std::min(lo, o);
    hi = std::max(hi, o);
    ok = ok && overlap_mapped(o) == 1.0 + 0.5 * o;
  }
  ok = ok && lo >= -2.0 && hi <= 0.0;
  detail += fmt("O1 identical %.1e, disjoint %.12f, random in [%.3f, %.3f]; ", same, disjoint, lo, hi);

  // alpha symmetry and plateau.
  double asym = 0.0;
  for (double t = 0.0; t <= 300.0; t += 0.25)
    asym = std::max(asym, std::abs(alpha(t, 300.0) - alpha(300.0 - t, 300.0)) / alpha(t, 300.0));
  const double plateau = alpha(150.0, 300.0);
  ok = ok && asym <= 1e-12 && std::abs(plateau - 0.25) <= 1e-12;
  detail += fmt("alpha asym %.1e, plateau %.15f; ", asym, plateau);

  // F(2 eps) = 4 F(eps).
  const ControlField f = sine_squared_guess(TimeMesh::covering(300.0, 0.1), DipoleOperator{}, 0.03, 0.15);
  ControlField f2 = f;
  for (auto& v : f2.samples) v *= 2.0;
  const double fr = fluence_penalty(f2) / fluence_penalty(f);
  ok = ok && std::abs(fr - 4.0) <= 1e-12;
  detail += fmt("F(2e)/F(e) = %.15f; ", fr);

  // J bookkeeping at every iteration of a short optimization.
  const RealField V = potential_field(PotentialKind{PotentialTag::well_1d, {}, {}}, build_grid(1, 0.2, 10.0));
  const auto s = lowest_states(V, 2);
  const Hamiltonian h(V, DipoleOperator{});
  OptimizeOptions opt;
  opt.max_iter = 10;
  opt.j_tol = 0.0;
  const auto res = optimize(h, s[0].state,
                            sine_squared_guess(TimeMesh::covering(100.0, 0.1), DipoleOperator{}, 0.02,
                                               s[1].energy - s[0].energy),
                            TargetSpec(superposition_density(s, {std::sqrt(0.5), std::sqrt(0.5)}), 10.0), opt);
  double book = 0.0;
  for (const auto& it : res.history) book = std::max(book, std::abs(it.J - (it.O1 + it.O2 + it.F_penalty)));
  ok = ok && book <= 1e-12;
  detail += fmt("J - (O1 + O2 + F) max %.1e over %g iterations", book, double(res.history.size()));
  report("AC8", ok, detail);
}

// ------------------------------------------------------------ experiments

void well1d(const fs::path& work) {
  const auto a = run_preset("well1d", {{"w_c", "10"}}, work / "well1d" / "w_c=10");
  const auto b = run_preset("well1d", {{"w_c", "0"}}, work / "well1d" / "w_c=0");
  const double ja = a["optimize"]["terminal_current_norm"], jb = b["optimize"]["terminal_current_norm"];
  report("AC5", overlap(a) >= 0.995 && overlap(b) >= 0.995 && ja <= 0.5 * jb,
         fmt("overlap w_c=10 %.6f, w_c=0 %.6f (tol >= 0.995); |j(T)| ratio %.3f (tol <= 0.5)", overlap(a), overlap(b),
             ja / jb));
  report("AC6-1D", loss(a) < loss(b),
         fmt("post-pulse rms(1 - overlap) w_c=10 %.3e vs w_c=0 %.3e (ratio %.3f)", loss(a), loss(b), loss(a) / loss(b)));
}

void well2d(const fs::path& work) {
  const auto a = run_preset("well2d", {{"w_c", "20"}}, work / "well2d" / "w_c=20");
  const auto b = run_preset("well2d", {{"w_c", "0"}}, work / "well2d" / "w_c=0");
  report("AC6-2D", loss(a) < loss(b),
         fmt("post-pulse rms(1 - overlap) w_c=20 %.3e vs w_c=0 %.3e (ratio %.4f); overlaps %.5f, %.5f", loss(a),
             loss(b), loss(a) / loss(b), overlap(a), overlap(b)));
  const double ea = a["optimize"]["max_abs_field"], eb = b["optimize"]["max_abs_field"];
  report("AC7", ea <= 1.1 * eb, fmt("max|eps| w_c=20 %.4e vs w_c=0 %.4e, ratio %.3f (fail above 1.1)", ea, eb, ea / eb));
}

void hydrogen(const fs::path& work) {
  const auto a = run_preset("hydrogen2d", {{"w_c", "40"}}, work / "hydrogen" / "w_c=40");
  const auto b = run_preset("hydrogen2d", {{"w_c", "0"}}, work / "hydrogen" / "w_c=0");
  const double ma = monitor_rms(a, 0.0, 0.0), mb = monitor_rms(b, 0.0, 0.0);
  report("AC6-H", loss(a) < loss(b) && mb >= 2.0 * ma,
         fmt("post-pulse rms(1 - overlap) w_c=40 %.3e vs w_c=0 %.3e; node monitor rms %.3e vs %.3e", loss(a), loss(b),
             ma, mb) +
             fmt(" (improvement %.2fx, tol >= 2); overlaps %.5f, %.5f", mb / ma, overlap(a), overlap(b)));
}

void repro(const fs::path& work) {
  struct Case {
    const char* preset;
    ConfigOverrides ov;
  };
  const Case cases[] = {
      {"well1d", {}},
      {"well2d", {{"optimizer.max_iter", "3"}, {"stability.extension", "1"}}},
      {"hydrogen2d", {{"optimizer.max_iter", "1"}, {"stability.extension", "1"}}},
  };
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    const fs::path a = work / "repro" / (std::string(c.preset) + "_a"), b = work / "repro" / (std::string(c.preset) + "_b");
    run_preset(c.preset, c.ov, a);
    run_preset(c.preset, c.ov, b);
    bool same = true;
    for (const char* f : {"iterations.tsv", "field.tsv"}) {
      const std::string x = slurp(a / f);
      same = same && !x.empty() && x == slurp(b / f);
    }
    ok = ok && same;
    detail += std::string(c.preset) + (same ? " identical; " : " DIFFERS; ");
  }
  report("AC9", ok, detail + "iterations.tsv and field.tsv compared byte for byte");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: qoct_acceptance <fast|well1d|well2d|hydrogen|repro> <work_dir>\n");
    return 2;
  }
  const std::string group = argv[1];
  const fs::path work = fs::absolute(argv[2]);
  fs::create_directories(work);
  try {
    if (group == "fast") {
      ac1();
      ac2();
      ac3();
      ac4();
      ac8();
    } else if (group == "well1d") {
      well1d(work);
    } else if (group == "well2d") {
      well2d(work);
    } else if (group == "hydrogen") {
      hydrogen(work);
    } else if (group == "repro") {
      repro(work);
    } else {
      std::fprintf(stderr, "unknown group '%s'\n", group.c_str());
      return 2;
    }
  } catch (const std::exception& e) {
    report(group, false, std::string("aborted: ") + e.what());
  }
  return failures == 0 ? 0 : 1;
}
