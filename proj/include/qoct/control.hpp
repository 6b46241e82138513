#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qoct/model.hpp"

namespace qoct {

/// Uniform time mesh t_i = i * dt, i = 0..steps.
struct TimeMesh {
  double dt = 0.0;
  int steps = 0;

  TimeMesh() = default;
  TimeMesh(double dt_, int steps_) : dt(dt_), steps(steps_) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time mesh: dt must be positive");
    if (steps < 1) throw std::invalid_argument("time mesh: need at least one step");
  }

  // Mesh covering [0, T]; T must be an integer multiple of dt to 1e-9.
  static TimeMesh covering(double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("time mesh: T and dt must be positive");
    const double ratio = T / dt;
    const long steps = std::lround(ratio);
    if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio))
      throw std::invalid_argument("time mesh: T must be a multiple of dt");
    return TimeMesh(dt, static_cast<int>(steps));
  }

  double horizon() const { return dt * steps; }
  double time(int i) const { return dt * i; }
  bool operator==(const TimeMesh&) const = default;
};

/// Laser amplitude sampled on the nodes of a time mesh. A propagation step
/// i -> i+1 uses the average of the two node values.
struct ControlField {
  TimeMesh mesh;
  std::vector<double> samples;
  DipoleOperator polarization;

  ControlField() = default;
  ControlField(TimeMesh m, DipoleOperator pol) : mesh(m), samples(static_cast<std::size_t>(m.steps) + 1, 0.0), polarization(pol) {}
  ControlField(TimeMesh m, std::vector<double> s, DipoleOperator pol) : mesh(m), samples(std::move(s)), polarization(pol) {
    if (samples.size() != static_cast<std::size_t>(mesh.steps) + 1)
      throw std::invalid_argument("control field: need steps + 1 samples");
    for (double v : samples)
      if (!std::isfinite(v)) throw std::invalid_argument("control field: non-finite sample");
  }

  double midpoint(int step) const { return 0.5 * (samples[step] + samples[step + 1]); }

  double max_abs() const {
    double m = 0.0;
    for (double v : samples) m = std::max(m, std::abs(v));
    return m;
  }
};

/// A sin^2(pi t / T) sin(omega t), the default starting guess.
inline ControlField sine_squared_guess(TimeMesh mesh, DipoleOperator pol, double amplitude, double omega) {
  ControlField f(mesh, pol);
  const double T = mesh.horizon();
  const double pi = std::acos(-1.0);
  for (int i = 0; i <= mesh.steps; ++i) {
    const double t = mesh.time(i);
    const double s = std::sin(pi * t / T);
    f.samples[i] = amplitude * s * s * std::sin(omega * t);
  }
  return f;
}

}  // namespace qoct
