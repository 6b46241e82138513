#pragma once

// Orchestrates one configured run and writes its artifacts:
//   eigensolve  eigenstates.tsv
//   optimize    iterations.tsv field.tsv density_T.tsv psi_T.tsv
//               stability.tsv monitor_<x>_<y>.tsv [seeds.tsv]
//   propagate   field.tsv observables.tsv density_T.tsv psi_T.tsv
//   stability   stability.tsv monitor_<x>_<y>.tsv
// plus summary.json, and a DONE file once everything is on disk.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qoct/config.hpp"
#include "qoct/io.hpp"
#include "qoct/optimizer.hpp"
#include "qoct/spectrum.hpp"

namespace qoct {

struct RunOptions {
  std::function<void(const std::string&)> log;
  unsigned threads = 0;  // guess seeds optimized in parallel; 0: hardware concurrency
};

enum class ExitCode { ok = 0, config = 2, numerical = 3 };

namespace detail {

inline void say(const RunOptions& o, const std::string& s) {
  if (o.log) o.log(s);
}

struct Problem {
  Grid grid;
  RealField V;
  std::vector<EigenPair> states;
  RealField target;
  bool has_target = false;
  double target_energy = std::numeric_limits<double>::quiet_NaN();
};

inline int eigen_count(const RunConfig& c) {
  if (c.eigen_count > 0) return c.eigen_count;
  switch (c.target) {
    case TargetKind::superposition:
      return c.target_states.empty() ? 1 : *std::max_element(c.target_states.begin(), c.target_states.end()) + 1;
    case TargetKind::symmetry: return 4;
    case TargetKind::file: return 1;
  }
  return 1;
}

inline Problem set_up(const RunConfig& c, const RunOptions& o) {
  Problem p{build_grid(c.dim, c.spacing, c.half_extent), {}, {}, {}, false};
  p.V = potential_field(c.potential, p.grid);
  EigenOptions eo;
  eo.tolerance = c.eigen_tolerance;
  eo.max_steps = c.eigen_max_steps;
  eo.seed = c.eigen_seed;
  const int k = eigen_count(c);
  say(o, "eigensolve: " + std::to_string(k) + " state(s) on " + std::to_string(p.grid.size()) + " points");
  p.states = lowest_states(p.V, k, eo);

  const bool targeted = !c.target_states.empty() || c.parity_x != 0 || !c.density_file.empty();
  if (!targeted) return p;
  p.has_target = true;
  switch (c.target) {
    case TargetKind::superposition: {
      std::vector<EigenPair> picked;
      std::vector<cplx> coeffs;
      for (std::size_t i = 0; i < c.target_states.size(); ++i) {
        const auto s = static_cast<std::size_t>(c.target_states[i]);
        picked.push_back(p.states.at(s));
        const double phase = c.target_phases.empty() ? 0.0 : c.target_phases[i];
        coeffs.push_back(std::polar(c.target_coefficients[i], phase));
        if (c.target_coefficients[i] != 0.0 && s > 0) p.target_energy = p.states[s].energy;
      }
      p.target = superposition_density(picked, coeffs);
      break;
    }
    case TargetKind::symmetry: {
      const auto py = c.dim == 2 ? std::optional<int>(c.parity_y) : std::nullopt;
      const EigenPair e = select_by_symmetry(p.states, c.parity_x, py);
      p.target = density(e.state);
      p.target_energy = e.energy;
      break;
    }
    case TargetKind::file:
      try {
        p.target = read_density(c.density_file, p.grid);
      } catch (const TsvError& e) {
        throw ConfigError("target.density_file", 0, e.what());
      }
      break;
  }
  return p;
}

inline Hamiltonian hamiltonian(const RunConfig& c, const Problem& p) {
  return Hamiltonian(p.V, DipoleOperator{c.polarization});
}

inline TimeMesh mesh(const RunConfig& c) { return TimeMesh::covering(c.T, c.dt); }

inline TimeMesh extension_mesh(const RunConfig& c) {
  return TimeMesh::covering(c.stability_extension > 0.0 ? c.stability_extension : c.T, c.dt);
}

struct GuessSpec {
  std::uint64_t seed = 0;
  bool jittered = false;
  double amplitude = 0.0;
  double omega = 0.0;
};

inline double base_omega(const RunConfig& c, const Problem& p) {
  if (c.guess_omega) return *c.guess_omega;
  if (std::isnan(p.target_energy)) return 0.0;
  return p.target_energy - p.states.front().energy;
}

// Seed s draws A (1 + 0.1 u1), omega (1 + 0.05 u2) with u uniform in [-1, 1].
inline std::vector<GuessSpec> guesses(const RunConfig& c, const Problem& p) {
  const double A = c.guess_sign * c.guess_amplitude;
  const double w = base_omega(c, p);
  if (c.guess_seeds.empty()) return {{0, false, A, w}};
  std::vector<GuessSpec> out;
  for (auto s : c.guess_seeds) {
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double u1 = u(rng);
    const double u2 = u(rng);
    out.push_back({s, true, A * (1.0 + 0.1 * u1), w * (1.0 + 0.05 * u2)});
  }
  return out;
}

inline ControlField guess_field(const RunConfig& c, const GuessSpec& g) {
  const DipoleOperator pol{c.polarization};
  if (!c.guess_field_file.empty()) {
    try {
      return read_field(c.guess_field_file, mesh(c), pol);
    } catch (const TsvError& e) {
      throw ConfigError("guess.field_file", 0, e.what());
    }
  }
  return sine_squared_guess(mesh(c), pol, g.amplitude, g.omega);
}

inline std::string monitor_name(const std::array<double, 2>& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "monitor_%g_%g.tsv", p[0], p[1]);
  return buf;
}

inline void write_stability(const std::filesystem::path& dir, const StabilitySeries& s, nlohmann::json& summary,
                            double offset) {
  Table rows;
  for (std::size_t i = 0; i < s.times.size(); ++i) rows.push_back({offset + s.times[i], s.overlap[i]});
  write_tsv(dir / "stability.tsv", {"field-free evolution after the pulse"}, {"t[a.u.]", "overlap_mapped"}, rows);
  summary["stability"]["overlap_loss_rms"] = overlap_loss_rms(s);
  summary["stability"]["monitors"] = nlohmann::json::array();
  for (std::size_t m = 0; m < s.monitors.size(); ++m) {
    Table mr;
    for (std::size_t i = 0; i < s.times.size(); ++i) mr.push_back({offset + s.times[i], s.differences[m][i]});
    const auto name = monitor_name(s.monitors[m]);
    write_tsv(dir / name,
              {"n - n_tg at (" + format_double(s.monitors[m][0]) + ", " + format_double(s.monitors[m][1]) + ")"},
              {"t[a.u.]", "n_minus_n_tg[a.u.]"}, mr);
    summary["stability"]["monitors"].push_back({{"x", s.monitors[m][0]},
                                                {"y", s.monitors[m][1]},
                                                {"file", name},
                                                {"rms", rms(s.differences[m])}});
  }
  summary["stability"]["warnings"] = s.warnings;
}

inline void write_iterations(const std::filesystem::path& path, const std::vector<IterationRecord>& h) {
  Table rows;
  for (const auto& r : h)
    rows.push_back({double(r.index), r.J, r.O1, r.O2, r.F_penalty, r.overlap_mapped, r.max_field,
                    r.reconstruction_error});
  write_tsv(path, {"J = O1 + O2 + F per iteration; overlap_mapped = 1 + O1/2"},
            {"index", "J", "O1", "O2", "F", "overlap_mapped", "max_abs_eps[a.u.]", "reconstruction_error"}, rows);
}

inline nlohmann::json eigen_summary(const Problem& p) {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& s : p.states) e.push_back({{"energy", s.energy}, {"residual", s.residual}});
  return e;
}

inline void run_eigensolve(const RunConfig& c, const std::filesystem::path& dir, nlohmann::json& summary,
                           const RunOptions& o) {
  const Problem p = set_up(c, o);
  Table rows;
  std::vector<std::string> cols{"index", "energy[Ha]", "residual", "parity_x"};
  if (c.dim == 2) cols.push_back("parity_y");
  for (std::size_t i = 0; i < p.states.size(); ++i) {
    std::vector<double> r{double(i), p.states[i].energy, p.states[i].residual, parity(p.states[i].state, 0)};
    if (c.dim == 2) r.push_back(parity(p.states[i].state, 1));
    rows.push_back(std::move(r));
  }
  write_tsv(dir / "eigenstates.tsv", {"lowest eigenpairs of H0, residual = max |H0 psi - E psi|"}, cols, rows);
  summary["states"] = eigen_summary(p);
}

inline void run_optimize(const RunConfig& c, const std::filesystem::path& dir, nlohmann::json& summary,
                         const RunOptions& o) {
  const Problem p = set_up(c, o);
  const Hamiltonian h = hamiltonian(c, p);
  const TargetSpec spec(p.target, c.w_c);
  const auto specs = guesses(c, p);
  OptimizeOptions opt;
  opt.j_tol = c.j_tol;
  opt.max_iter = c.max_iter;

  std::vector<OptimizationResult> results(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  std::mutex log_mutex;
  auto work = [&](std::size_t k) {
    try {
      const ControlField guess = guess_field(c, specs[k]);
      const std::string tag = specs.size() > 1 ? "seed " + std::to_string(specs[k].seed) + " " : "";
      results[k] = optimize(h, p.states.front().state, guess, spec, opt, [&](const IterationRecord& r) {
        if (!o.log) return;
        char buf[200];
        std::snprintf(buf, sizeof buf, "%siteration %d  J = %.10g  overlap = %.8f  max|eps| = %.4g", tag.c_str(),
                      r.index, r.J, r.overlap_mapped, r.max_field);
        std::lock_guard<std::mutex> lock(log_mutex);
        o.log(buf);
      });
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  unsigned workers = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(specs.size()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < specs.size(); ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k; (k = next++) < specs.size();) work(k);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::size_t best = 0;
  for (std::size_t k = 1; k < results.size(); ++k)
    if (results[k].best().J > results[best].best().J) best = k;
  const OptimizationResult& r = results[best];

  if (specs.size() > 1) {
    Table rows;
    for (std::size_t k = 0; k < specs.size(); ++k)
      rows.push_back({double(specs[k].seed), specs[k].amplitude, specs[k].omega, results[k].best().J,
                      results[k].best().overlap_mapped});
    write_tsv(dir / "seeds.tsv", {"guess sweep; the run with the largest J is reported"},
              {"seed", "amplitude[a.u.]", "omega[Ha]", "best_J", "overlap_mapped"}, rows);
  }
  write_iterations(dir / "iterations.tsv", r.history);
  write_field(dir / "field.tsv", r.best_field);
  const RealField n = density(r.best_psi_T);
  write_densities(dir / "density_T.tsv", n, &p.target);
  write_state(dir / "psi_T.tsv", r.best_psi_T);

  const IterationRecord& b = r.best();
  summary["states"] = eigen_summary(p);
  summary["guess"] = {{"seed", specs[best].seed}, {"amplitude", specs[best].amplitude}, {"omega", specs[best].omega}};
  summary["optimize"] = {{"iterations", static_cast<int>(r.history.size()) - 1},
                         {"best_index", r.best_index},
                         {"converged", r.converged},
                         {"reason", r.reason},
                         {"J", b.J},
                         {"O1", b.O1},
                         {"O2", b.O2},
                         {"F", b.F_penalty},
                         {"overlap_mapped", b.overlap_mapped},
                         {"max_abs_field", b.max_field},
                         {"guess_J", r.history.front().J},
                         {"terminal_current_norm", std::sqrt(current_norm_squared(current(r.best_psi_T)))}};

  say(o, "stability probe over " + format_double(extension_mesh(c).horizon()) + " a.u.");
  const StabilitySeries s = stability_probe(h, r.best_psi_T, extension_mesh(c), spec, c.monitors);
  write_stability(dir, s, summary, c.T);
}

inline void run_propagate(const RunConfig& c, const std::filesystem::path& dir, nlohmann::json& summary,
                          const RunOptions& o) {
  const Problem p = set_up(c, o);
  const Hamiltonian h = hamiltonian(c, p);
  const ControlField field = guess_field(c, guesses(c, p).front());
  const ComplexField& psi0 = p.states.front().state;
  Table rows;
  ComplexField before = psi0;
  double worst_continuity = 0.0;
  auto record = [&](double t, const ComplexField& psi, double continuity) {
    const double nrm = norm_squared(psi);
    rows.push_back({t, nrm, dipole_expectation(psi, psi, h.mu()).real() / nrm, continuity});
  };
  record(0.0, psi0, 0.0);
  const ComplexField psi_T = propagate(h, psi0, field, Direction::forward, [&](int, double t, const ComplexField& psi) {
    const double r = continuity_residual(before, psi, field.mesh.dt);
    worst_continuity = std::max(worst_continuity, r);
    record(t, psi, r);
    before = psi;
  });
  write_field(dir / "field.tsv", field);
  write_tsv(dir / "observables.tsv", {"continuity = max |dn/dt + div j| over the step"},
            {"t[a.u.]", "norm", "dipole[a.u.]", "continuity"}, rows);
  write_densities(dir / "density_T.tsv", density(psi_T), p.has_target ? &p.target : nullptr);
  write_state(dir / "psi_T.tsv", psi_T);
  summary["states"] = eigen_summary(p);
  summary["propagate"] = {{"norm_drift", std::abs(norm_squared(psi_T) - norm_squared(psi0))},
                          {"max_continuity_residual", worst_continuity},
                          {"terminal_current_norm", std::sqrt(current_norm_squared(current(psi_T)))}};
  if (p.has_target)
    summary["propagate"]["overlap_mapped"] = overlap_mapped(o1_density_overlap(density(psi_T), p.target));
}

inline void run_stability(const RunConfig& c, const std::filesystem::path& dir, nlohmann::json& summary,
                          const RunOptions& o) {
  const Problem p = set_up(c, o);
  const Hamiltonian h = hamiltonian(c, p);
  ComplexField psi;
  try {
    psi = read_state(c.psi_file, p.grid);
  } catch (const TsvError& e) {
    throw ConfigError("stability.psi_file", 0, e.what());
  }
  const TargetSpec spec(p.target, c.w_c);
  summary["terminal_current_norm"] = std::sqrt(current_norm_squared(current(psi)));
  const StabilitySeries s = stability_probe(h, psi, extension_mesh(c), spec, c.monitors);
  write_stability(dir, s, summary, c.T);
}

}  // namespace detail

/// Machine-readable record of a failed run.
inline nlohmann::json error_record(ExitCode code, const std::string& message, const std::string& key = {},
                                   int line = 0) {
  nlohmann::json j{{"status", "error"},
                   {"exit_code", static_cast<int>(code)},
                   {"category", code == ExitCode::config ? "config" : "numerical"},
                   {"message", message}};
  if (!key.empty()) j["key"] = key;
  if (line > 0) j["line"] = line;
  return j;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TsvError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Runs the configured mode into c.output_directory. Returns the exit code;
/// on failure error.json describes the problem and DONE is absent.
inline ExitCode run(const RunConfig& c, const RunOptions& o = {}) {
  const std::filesystem::path dir(c.output_directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    detail::say(o, "cannot create " + dir.string() + ": " + ec.message());
    return ExitCode::config;
  }
  for (const char* stale : {"DONE", "error.json"}) std::filesystem::remove(dir / stale, ec);

  nlohmann::json summary{{"mode", to_string(c.mode)}};
  ExitCode code = ExitCode::ok;
  nlohmann::json err;
  try {
    {
      std::ofstream cfg(dir / "config.cfg", std::ios::binary | std::ios::trunc);
      cfg << serialize_config(c);
    }
    switch (c.mode) {
      case Mode::eigensolve: detail::run_eigensolve(c, dir, summary, o); break;
      case Mode::optimize: detail::run_optimize(c, dir, summary, o); break;
      case Mode::propagate: detail::run_propagate(c, dir, summary, o); break;
      case Mode::stability: detail::run_stability(c, dir, summary, o); break;
    }
    write_json(dir / "summary.json", summary);
    std::ofstream(dir / "DONE") << "ok\n";
    return ExitCode::ok;
  } catch (const ConfigError& e) {
    code = ExitCode::config;
    err = error_record(code, e.what(), e.key(), e.line());
  } catch (const std::invalid_argument& e) {
    code = ExitCode::config;
    err = error_record(code, e.what());
  } catch (const std::exception& e) {
    code = ExitCode::numerical;
    err = error_record(code, e.what());
  }
  detail::say(o, err["message"].get<std::string>());
  try {
    write_json(dir / "error.json", err);
  } catch (const std::exception&) {
  }
  return code;
}

/// One sweep dimension: key and the values it takes.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

/// Parses "key=v1,v2,...".
inline SweepAxis parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("", 0, "sweep '" + text + "' must look like key=v1,v2");
  SweepAxis a{detail::trim(text.substr(0, eq)), {}};
  std::stringstream ss(text.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ',')) a.values.push_back(detail::trim(v));
  if (a.key.empty() || a.values.empty()) throw ConfigError(a.key, 0, "sweep needs a key and at least one value");
  return a;
}

struct SweepPoint {
  std::string label;  // subdirectory name, e.g. "w_c=10"
  ConfigOverrides overrides;
};

/// Cartesian product of the sweep axes.
inline std::vector<SweepPoint> expand_sweep(const std::vector<SweepAxis>& axes) {
  std::vector<SweepPoint> points{{"", {}}};
  for (const auto& a : axes) {
    std::vector<SweepPoint> next;
    for (const auto& p : points)
      for (const auto& v : a.values) {
        SweepPoint q = p;
        q.label += (q.label.empty() ? "" : ",") + a.key + "=" + v;
        q.overrides.emplace_back(a.key, v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  return points;
}

}  // namespace qoct
