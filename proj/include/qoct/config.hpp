#pragma once

// Run configuration: flat `key = value` text with `#` comments and dotted
// section prefixes.
//
//   grid.dim = 1
//   grid.spacing = 0.1        # a.u.
//   potential.kind = well_1d
//   w_c = 10
//
// Every key is validated before anything runs; unknown keys are errors.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qoct/model.hpp"

namespace qoct {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, int line, const std::string& message)
      : std::runtime_error(describe(key, line, message)), key_(std::move(key)), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }  // 0 when the key is absent from the file

 private:
  static std::string describe(const std::string& key, int line, const std::string& message) {
    std::string s;
    if (line > 0) s += "line " + std::to_string(line) + ": ";
    if (!key.empty()) s += "'" + key + "': ";
    return s + message;
  }

  std::string key_;
  int line_;
};

enum class Mode { eigensolve, optimize, propagate, stability };
enum class TargetKind { superposition, symmetry, file };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::eigensolve: return "eigensolve";
    case Mode::optimize: return "optimize";
    case Mode::propagate: return "propagate";
    case Mode::stability: return "stability";
  }
  return {};
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::eigensolve, Mode::optimize, Mode::propagate, Mode::stability})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline std::string to_string(TargetKind k) {
  switch (k) {
    case TargetKind::superposition: return "superposition";
    case TargetKind::symmetry: return "symmetry";
    case TargetKind::file: return "file";
  }
  return {};
}

struct RunConfig {
  Mode mode = Mode::optimize;

  int dim = 1;
  double spacing = 0.0;
  double half_extent = 0.0;

  PotentialKind potential;
  std::array<double, 2> polarization{1.0, 0.0};

  double T = 0.0;
  double dt = 0.0;
  double w_c = 0.0;

  TargetKind target = TargetKind::superposition;
  std::vector<int> target_states;
  std::vector<double> target_coefficients;
  std::vector<double> target_phases;
  int parity_x = 0;  // 0: unset
  int parity_y = 0;
  std::string density_file;

  int eigen_count = 0;  // 0: as many as the target needs
  double eigen_tolerance = 1e-9;
  int eigen_max_steps = 400000;
  std::uint64_t eigen_seed = 20111;

  double guess_amplitude = 0.0;
  std::optional<double> guess_omega;  // nullopt: gap to the target state
  int guess_sign = 1;
  std::vector<std::uint64_t> guess_seeds;
  std::string guess_field_file;

  double j_tol = 1e-6;
  int max_iter = 200;

  double stability_extension = 0.0;  // 0: one horizon T
  std::vector<std::array<double, 2>> monitors;
  std::string psi_file;

  std::string output_directory = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Shortest round-trip text for a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "mode",
      "grid.dim", "grid.spacing", "grid.half_extent",
      "potential.kind", "potential.x_coefficients", "potential.y_coefficients",
      "dipole.polarization",
      "time.T", "time.dt",
      "w_c",
      "target.kind", "target.states", "target.coefficients", "target.phases",
      "target.parity_x", "target.parity_y", "target.density_file",
      "eigen.count", "eigen.tolerance", "eigen.max_steps", "eigen.seed",
      "guess.amplitude", "guess.omega", "guess.sign", "guess.seeds", "guess.field_file",
      "optimizer.j_tol", "optimizer.max_iter",
      "stability.extension", "stability.monitors", "stability.psi_file",
      "output.directory",
  };
  return keys;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
 public:
  Reader(std::map<std::string, Entry> entries, std::filesystem::path base)
      : entries_(std::move(entries)), base_(std::move(base)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  int line(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(key, line(key), message);
  }

  const std::string& raw(const std::string& key) const {
    if (!has(key)) fail(key, "missing required key");
    return entries_.at(key).value;
  }

  double number(const std::string& key) const { return parse_number(key, raw(key)); }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key) const { return parse_integer(key, raw(key)); }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key, char sep = ',') const {
    std::vector<double> out;
    for (const auto& item : split(raw(key), sep)) out.push_back(parse_number(key, item));
    return out;
  }

  std::vector<long long> integers(const std::string& key) const {
    std::vector<long long> out;
    for (const auto& item : split(raw(key), ',')) out.push_back(parse_integer(key, item));
    return out;
  }

  std::string path(const std::string& key) const {
    const std::filesystem::path p(raw(key));
    if (p.empty()) fail(key, "empty path");
    return (p.is_absolute() ? p : base_ / p).lexically_normal().string();
  }

  std::vector<std::string> split(const std::string& s, char sep) const {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
  }

 private:
  double parse_number(const std::string& key, const std::string& text) const {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty()) fail(key, "expected a number, got '" + text + "'");
    if (!std::isfinite(v)) fail(key, "value must be finite");
    return v;
  }

  long long parse_integer(const std::string& key, const std::string& text) const {
    long long v = 0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty()) fail(key, "expected an integer, got '" + text + "'");
    return v;
  }

  std::map<std::string, Entry> entries_;
  std::filesystem::path base_;
};

inline std::map<std::string, Entry> tokenize(std::string_view text) {
  std::map<std::string, Entry> entries;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(std::string_view(raw).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("", line, "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("", line, "missing key before '='");
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      std::string best;
      std::size_t best_d = 3;
      for (const auto& k : keys) {
        // Compare against the full key and its last segment.
        const auto dot = k.rfind('.');
        const std::size_t d = std::min(edit_distance(key, k),
                                       dot == std::string::npos ? edit_distance(key, k)
                                                                : edit_distance(key, k.substr(dot + 1)) + 1);
        if (d < best_d) best_d = d, best = k;
      }
      throw ConfigError(key, line, best.empty() ? "unknown key" : "unknown key (did you mean '" + best + "'?)");
    }
    if (entries.count(key)) throw ConfigError(key, line, "duplicate key (first set on line " +
                                                             std::to_string(entries[key].line) + ")");
    entries[key] = {value, line};
  }
  return entries;
}

inline int parity_value(const Reader& r, const std::string& key) {
  const long long p = r.integer(key);
  if (p != 1 && p != -1) r.fail(key, "must be +1 or -1");
  return static_cast<int>(p);
}

}  // namespace detail

/// key=value overrides applied on top of the file (used by --sweep).
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

inline RunConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir,
                                   const ConfigOverrides& overrides = {}) {
  auto entries = detail::tokenize(text);
  for (const auto& [k, v] : overrides) {
    const auto& keys = detail::known_keys();
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError(k, 0, "unknown key in override");
    entries[k] = {v, entries.count(k) ? entries[k].line : 0};
  }
  const detail::Reader r(std::move(entries), base_dir);
  RunConfig c;

  if (r.has("mode")) {
    const auto m = parse_mode(r.raw("mode"));
    if (!m) r.fail("mode", "expected eigensolve, optimize, propagate or stability");
    c.mode = *m;
  }

  const long long dim = r.integer("grid.dim");
  if (dim != 1 && dim != 2) r.fail("grid.dim", "must be 1 or 2");
  c.dim = static_cast<int>(dim);
  c.spacing = r.number("grid.spacing");
  if (!(c.spacing > 0.0)) r.fail("grid.spacing", "must be positive");
  c.half_extent = r.number("grid.half_extent");
  if (!(c.half_extent >= 4.0 * c.spacing)) r.fail("grid.half_extent", "must be at least 4 grid spacings");

  try {
    c.potential.tag = parse_potential_tag(r.raw("potential.kind"));
  } catch (const std::invalid_argument&) {
    r.fail("potential.kind", "expected well_1d, well_2d, soft_coulomb_2d or custom_polynomial");
  }
  if (c.potential.tag == PotentialTag::custom_polynomial) {
    c.potential.x_coefficients = r.numbers("potential.x_coefficients");
    if (r.has("potential.y_coefficients")) c.potential.y_coefficients = r.numbers("potential.y_coefficients");
    if (c.potential.x_coefficients.empty()) r.fail("potential.x_coefficients", "needs at least one coefficient");
    if (c.dim == 1 && !c.potential.y_coefficients.empty())
      r.fail("potential.y_coefficients", "not allowed on a 1D grid");
  } else {
    for (const char* k : {"potential.x_coefficients", "potential.y_coefficients"})
      if (r.has(k)) r.fail(k, "only used with potential.kind = custom_polynomial");
    const bool two_d = c.potential.tag != PotentialTag::well_1d;
    if (two_d != (c.dim == 2)) r.fail("potential.kind", "does not match grid.dim");
  }

  if (r.has("dipole.polarization")) {
    const auto p = r.numbers("dipole.polarization");
    if (p.size() != 2) r.fail("dipole.polarization", "expected two components");
    if (std::abs(std::hypot(p[0], p[1]) - 1.0) > 1e-12) r.fail("dipole.polarization", "must be a unit vector");
    if (c.dim == 1 && p[1] != 0.0) r.fail("dipole.polarization", "y component must be 0 on a 1D grid");
    c.polarization = {p[0], p[1]};
  }

  c.w_c = r.number("w_c", 0.0);
  if (!(c.w_c >= 0.0)) r.fail("w_c", "must be nonnegative");

  const bool timed = c.mode != Mode::eigensolve;
  if (timed || r.has("time.T")) {
    c.T = r.number("time.T");
    if (!(c.T > 0.0)) r.fail("time.T", "must be positive");
    c.dt = r.number("time.dt");
    if (!(c.dt > 0.0)) r.fail("time.dt", "must be positive");
    const double steps = c.T / c.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps) r.fail("time.dt", "must divide time.T");
  }

  const bool targeted = c.mode == Mode::optimize || c.mode == Mode::stability;
  if (targeted || r.has("target.kind")) {
    const std::string kind = r.raw("target.kind");
    if (kind == "superposition") {
      c.target = TargetKind::superposition;
      for (long long s : r.integers("target.states")) {
        if (s < 0) r.fail("target.states", "state indices must be nonnegative");
        c.target_states.push_back(static_cast<int>(s));
      }
      if (c.target_states.empty()) r.fail("target.states", "needs at least one state");
      if (r.has("target.coefficients")) {
        c.target_coefficients = r.numbers("target.coefficients");
      } else {
        if (c.target_states.size() != 1) r.fail("target.coefficients", "missing required key");
        c.target_coefficients = {1.0};
      }
      if (c.target_coefficients.size() != c.target_states.size())
        r.fail("target.coefficients", "needs one coefficient per target state");
      double total = 0.0;
      for (double v : c.target_coefficients) total += v * v;
      if (std::abs(total - 1.0) > 1e-10) r.fail("target.coefficients", "squares must sum to 1");
      if (r.has("target.phases")) {
        c.target_phases = r.numbers("target.phases");
        if (c.target_phases.size() != c.target_states.size())
          r.fail("target.phases", "needs one phase per target state");
      }
    } else if (kind == "symmetry") {
      c.target = TargetKind::symmetry;
      c.parity_x = detail::parity_value(r, "target.parity_x");
      if (c.dim == 2) c.parity_y = detail::parity_value(r, "target.parity_y");
      else if (r.has("target.parity_y")) r.fail("target.parity_y", "not allowed on a 1D grid");
    } else if (kind == "file") {
      c.target = TargetKind::file;
      c.density_file = r.path("target.density_file");
    } else {
      r.fail("target.kind", "expected superposition, symmetry or file");
    }
    const std::pair<const char*, bool> usage[] = {
        {"target.states", c.target == TargetKind::superposition},
        {"target.coefficients", c.target == TargetKind::superposition},
        {"target.phases", c.target == TargetKind::superposition},
        {"target.parity_x", c.target == TargetKind::symmetry},
        {"target.parity_y", c.target == TargetKind::symmetry},
        {"target.density_file", c.target == TargetKind::file},
    };
    for (const auto& [k, used] : usage)
      if (!used && r.has(k)) r.fail(k, "not used with target.kind = " + kind);
  }

  c.eigen_count = static_cast<int>(r.integer("eigen.count", 0));
  if (c.eigen_count < 0) r.fail("eigen.count", "must be nonnegative");
  if (c.mode == Mode::eigensolve && c.eigen_count == 0) c.eigen_count = 2;
  if (c.target == TargetKind::superposition && !c.target_states.empty()) {
    const int need = *std::max_element(c.target_states.begin(), c.target_states.end()) + 1;
    if (c.eigen_count != 0 && c.eigen_count < need)
      r.fail("eigen.count", "must cover target state " + std::to_string(need - 1));
  }
  c.eigen_tolerance = r.number("eigen.tolerance", c.eigen_tolerance);
  if (!(c.eigen_tolerance > 0.0)) r.fail("eigen.tolerance", "must be positive");
  c.eigen_max_steps = static_cast<int>(r.integer("eigen.max_steps", c.eigen_max_steps));
  if (c.eigen_max_steps < 1) r.fail("eigen.max_steps", "must be positive");
  const long long seed = r.integer("eigen.seed", static_cast<long long>(c.eigen_seed));
  if (seed < 0) r.fail("eigen.seed", "must be nonnegative");
  c.eigen_seed = static_cast<std::uint64_t>(seed);

  const bool driven = c.mode == Mode::optimize || c.mode == Mode::propagate;
  if (r.has("guess.field_file")) c.guess_field_file = r.path("guess.field_file");
  if (driven && c.guess_field_file.empty()) {
    c.guess_amplitude = r.number("guess.amplitude");
  } else {
    c.guess_amplitude = r.number("guess.amplitude", 0.0);
  }
  if (!(c.guess_amplitude >= 0.0)) r.fail("guess.amplitude", "must be nonnegative");
  if (r.has("guess.omega") && r.raw("guess.omega") != "auto") {
    c.guess_omega = r.number("guess.omega");
    if (!(*c.guess_omega >= 0.0)) r.fail("guess.omega", "must be nonnegative");
  }
  if (driven && !c.guess_omega && c.guess_field_file.empty() && c.target == TargetKind::file)
    r.fail("guess.omega", "'auto' needs an eigenstate target; give a frequency");
  const long long sign = r.integer("guess.sign", 1);
  if (sign != 1 && sign != -1) r.fail("guess.sign", "must be +1 or -1");
  c.guess_sign = static_cast<int>(sign);
  if (r.has("guess.seeds")) {
    for (long long s : r.integers("guess.seeds")) {
      if (s < 0) r.fail("guess.seeds", "seeds must be nonnegative");
      c.guess_seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (!c.guess_field_file.empty() && !c.guess_seeds.empty())
      r.fail("guess.seeds", "cannot jitter a guess read from guess.field_file");
  }

  c.j_tol = r.number("optimizer.j_tol", c.j_tol);
  if (!(c.j_tol >= 0.0)) r.fail("optimizer.j_tol", "must be nonnegative");
  c.max_iter = static_cast<int>(r.integer("optimizer.max_iter", c.max_iter));
  if (c.max_iter < 0) r.fail("optimizer.max_iter", "must be nonnegative");

  c.stability_extension = r.number("stability.extension", 0.0);
  if (!(c.stability_extension >= 0.0)) r.fail("stability.extension", "must be nonnegative");
  if (c.stability_extension > 0.0 && c.dt > 0.0) {
    const double steps = c.stability_extension / c.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps)
      r.fail("stability.extension", "must be a multiple of time.dt");
  }
  if (r.has("stability.monitors")) {
    for (const auto& point : r.split(r.raw("stability.monitors"), ';')) {
      const auto xy = r.split(point, ' ');
      std::vector<double> v;
      for (const auto& s : xy) {
        if (s.empty()) continue;
        double d = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (ec != std::errc() || ptr != s.data() + s.size()) r.fail("stability.monitors", "bad coordinate '" + s + "'");
        v.push_back(d);
      }
      if (v.size() != static_cast<std::size_t>(c.dim))
        r.fail("stability.monitors", "each point needs " + std::to_string(c.dim) + " coordinate(s)");
      c.monitors.push_back({v[0], c.dim == 2 ? v[1] : 0.0});
    }
  }
  if (c.mode == Mode::stability) c.psi_file = r.path("stability.psi_file");
  else if (r.has("stability.psi_file")) c.psi_file = r.path("stability.psi_file");

  c.output_directory = r.has("output.directory") ? r.path("output.directory") : (base_dir / "out").lexically_normal().string();
  return c;
}

inline RunConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto base = std::filesystem::absolute(path).parent_path();
  return parse_config_text(ss.str(), base, overrides);
}

/// Text that parse_config_text reads back into an identical RunConfig.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  auto list = [](const auto& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ", ";
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(v[i])>>)
        s += format_double(v[i]);
      else
        s += std::to_string(v[i]);
    }
    return s;
  };
  o << "mode = " << to_string(c.mode) << "\n";
  o << "grid.dim = " << c.dim << "\n";
  o << "grid.spacing = " << format_double(c.spacing) << "\n";
  o << "grid.half_extent = " << format_double(c.half_extent) << "\n";
  o << "potential.kind = " << to_string(c.potential.tag) << "\n";
  if (!c.potential.x_coefficients.empty()) o << "potential.x_coefficients = " << list(c.potential.x_coefficients) << "\n";
  if (!c.potential.y_coefficients.empty()) o << "potential.y_coefficients = " << list(c.potential.y_coefficients) << "\n";
  o << "dipole.polarization = " << format_double(c.polarization[0]) << ", " << format_double(c.polarization[1]) << "\n";
  if (c.T > 0.0) {
    o << "time.T = " << format_double(c.T) << "\n";
    o << "time.dt = " << format_double(c.dt) << "\n";
  }
  o << "w_c = " << format_double(c.w_c) << "\n";
  const bool has_target = !c.target_states.empty() || c.parity_x != 0 || !c.density_file.empty();
  if (has_target) {
    o << "target.kind = " << to_string(c.target) << "\n";
    switch (c.target) {
      case TargetKind::superposition:
        o << "target.states = " << list(c.target_states) << "\n";
        o << "target.coefficients = " << list(c.target_coefficients) << "\n";
        if (!c.target_phases.empty()) o << "target.phases = " << list(c.target_phases) << "\n";
        break;
      case TargetKind::symmetry:
        o << "target.parity_x = " << c.parity_x << "\n";
        if (c.parity_y != 0) o << "target.parity_y = " << c.parity_y << "\n";
        break;
      case TargetKind::file:
        o << "target.density_file = " << c.density_file << "\n";
        break;
    }
  }
  o << "eigen.count = " << c.eigen_count << "\n";
  o << "eigen.tolerance = " << format_double(c.eigen_tolerance) << "\n";
  o << "eigen.max_steps = " << c.eigen_max_steps << "\n";
  o << "eigen.seed = " << c.eigen_seed << "\n";
  o << "guess.amplitude = " << format_double(c.guess_amplitude) << "\n";
  o << "guess.omega = " << (c.guess_omega ? format_double(*c.guess_omega) : std::string("auto")) << "\n";
  o << "guess.sign = " << c.guess_sign << "\n";
  if (!c.guess_seeds.empty()) o << "guess.seeds = " << list(c.guess_seeds) << "\n";
  if (!c.guess_field_file.empty()) o << "guess.field_file = " << c.guess_field_file << "\n";
  o << "optimizer.j_tol = " << format_double(c.j_tol) << "\n";
  o << "optimizer.max_iter = " << c.max_iter << "\n";
  o << "stability.extension = " << format_double(c.stability_extension) << "\n";
  if (!c.monitors.empty()) {
    o << "stability.monitors = ";
    for (std::size_t i = 0; i < c.monitors.size(); ++i) {
      if (i) o << "; ";
      o << format_double(c.monitors[i][0]);
      if (c.dim == 2) o << " " << format_double(c.monitors[i][1]);
    }
    o << "\n";
  }
  if (!c.psi_file.empty()) o << "stability.psi_file = " << c.psi_file << "\n";
  o << "output.directory = " << c.output_directory << "\n";
  return o.str();
}

}  // namespace qoct
