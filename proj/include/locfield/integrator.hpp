#pragma once

// Explicit Runge–Kutta integration of probability flows: the Dormand–Prince
// 5(4) pair with PI step-size control, plus a fixed-step classical RK4
// fallback. After every accepted step the state is projected back onto the
// probability simplex (tiny negative entries clamped, then renormalized); an
// adaptive step that undershoots zero by more than the clamp tolerance is
// retried with a smaller step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "locfield/errors.hpp"

namespace locfield {

struct SolverOptions {
  double atol = 1e-8;
  double rtol = 1e-6;
  double initial_step = 0.0;  // 0 picks a step from the initial derivative
  double max_step = 0.0;      // 0 means unbounded
  double min_step = 1e-12;
  std::size_t max_steps = 10'000'000;
  bool fixed_step = false;  // classical RK4 with step `fixed_dt`
  double fixed_dt = 1e-3;
  bool record_steps = false;  // also keep every accepted adaptive step
  double clamp_tolerance = 1e-10;
  bool project_simplex = true;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  std::size_t clamp_events = 0;
  double clamped_mass = 0.0;
  double most_negative = 0.0;  // smallest entry seen below -clamp_tolerance, if any
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  IntegrationStats stats;
};

/// Uniform grid 0, step, 2*step, ..., horizon (the horizon is always included).
inline std::vector<double> uniform_grid(double horizon, double step) {
  if (!(horizon >= 0.0) || !(step > 0.0)) throw IntegratorError("uniform_grid: bad horizon/step");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(std::min(horizon, i * step));
  if (horizon - out.back() > 1e-12 * std::max(1.0, horizon)) out.push_back(horizon);
  return out;
}

namespace detail {

// Clamp entries in [-tol, 0) to zero and renormalize to unit mass.
inline bool project_to_simplex(std::vector<double>& y, double tol, IntegrationStats& stats,
                               bool enabled = true) {
  if (!enabled) return false;
  bool changed = false;
  for (double& v : y) {
    if (v < 0.0) {
      if (v >= -tol) {
        stats.clamped_mass += -v;
        ++stats.clamp_events;
        v = 0.0;
        changed = true;
      } else {
        stats.most_negative = std::min(stats.most_negative, v);
      }
    }
  }
  double total = 0.0;
  for (double v : y) total += v;
  if (total > 0.0 && total != 1.0) {
    for (double& v : y) v /= total;
  }
  return changed;
}

inline double error_norm(std::span<const double> err, std::span<const double> y0,
                         std::span<const double> y1, double atol, double rtol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / scale;
    acc += r * r;
  }
  return err.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace detail

/// Integrates y' = rhs(t, y) from output_times.front() through every output
/// time. `rhs(t, span<const double> y, span<double> dy)` writes the derivative.
template <class Rhs>
Trajectory integrate_probability_flow(Rhs&& rhs, std::vector<double> y,
                                      std::span<const double> output_times,
                                      const SolverOptions& opts = {}) {
  Trajectory out;
  if (output_times.empty()) return out;
  for (std::size_t i = 1; i < output_times.size(); ++i) {
    if (!(output_times[i] > output_times[i - 1])) {
      throw IntegratorError("output times must be strictly increasing");
    }
  }
  auto& stats = out.stats;
  const std::size_t n = y.size();
  auto f = [&](double t, const std::vector<double>& state, std::vector<double>& dy) {
    ++stats.rhs_evaluations;
    rhs(t, std::span<const double>(state), std::span<double>(dy));
  };

  double t = output_times.front();
  detail::project_to_simplex(y, opts.clamp_tolerance, stats, opts.project_simplex);
  out.times.push_back(t);
  out.states.push_back(y);

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n), err(n);

  if (opts.fixed_step) {
    if (!(opts.fixed_dt > 0.0)) throw IntegratorError("fixed_dt must be positive");
    for (std::size_t target = 1; target < output_times.size(); ++target) {
      const double t_out = output_times[target];
      while (t < t_out) {
        const double h = std::min(opts.fixed_dt, t_out - t);
        f(t, y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        f(t + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        f(t + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
        f(t + h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i) {
          y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = (t_out - t - h <= 1e-14 * std::max(1.0, std::abs(t_out))) ? t_out : t + h;
        detail::project_to_simplex(y, opts.clamp_tolerance, stats, opts.project_simplex);
        ++stats.accepted;
      }
      out.times.push_back(t);
      out.states.push_back(y);
    }
    return out;
  }

  // Dormand–Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double t_end = output_times.back();
  f(t, y, k1);
  double h = opts.initial_step;
  if (!(h > 0.0)) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opts.atol + opts.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / std::max<std::size_t>(n, 1));
    d1 = std::sqrt(d1 / std::max<std::size_t>(n, 1));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, t_end - t);
  }
  if (opts.max_step > 0.0) h = std::min(h, opts.max_step);

  double err_prev = 1e-4;
  std::size_t next_out = 1;
  std::size_t steps = 0;
  while (next_out < output_times.size()) {
    if (++steps > opts.max_steps) {
      throw IntegratorError("maximum number of steps exceeded at t=" + std::to_string(t));
    }
    const double t_out = output_times[next_out];
    bool hits_output = false;
    double step = h;
    if (t + step >= t_out - 1e-14 * std::max(1.0, std::abs(t_out))) {
      step = t_out - t;
      hits_output = true;
    }

    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * a21 * k1[i];
    f(t + c2 * step, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * step, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    }
    f(t + c4 * step, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    }
    f(t + c5 * step, tmp, k5);
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    }
    f(t + step, tmp, k6);
    for (std::size_t i = 0; i < n; ++i) {
      y_new[i] = y[i] + step * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    }
    f(t + step, y_new, k7);
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }
    const double err_norm = detail::error_norm(err, y, y_new, opts.atol, opts.rtol);
    const bool undershoot =
        opts.project_simplex &&
        std::any_of(y_new.begin(), y_new.end(), [&](double v) { return v < -opts.clamp_tolerance; });

    if (!std::isfinite(err_norm)) {
      ++stats.rejected;
      h = 0.25 * step;
    } else if (undershoot) {
      ++stats.rejected;
      h = 0.5 * step;
    } else if (err_norm <= 1.0) {
      // PI controller (Hairer & Wanner, beta = 0.04).
      const double e = std::max(err_norm, 1e-10);
      double factor = 0.9 * std::pow(e, -0.17) * std::pow(err_prev, 0.04);
      factor = std::clamp(factor, 0.2, 5.0);
      err_prev = std::max(err_norm, 1e-4);
      ++stats.accepted;
      t = hits_output ? t_out : t + step;
      y.swap(y_new);
      if (detail::project_to_simplex(y, opts.clamp_tolerance, stats, opts.project_simplex)) {
        f(t, y, k1);
      } else {
        k1.swap(k7);
      }
      const double proposed = step * factor;
      // An output time may have shortened this step; do not let that shrink the next one.
      h = step < h ? std::max(h, proposed) : proposed;
      if (opts.max_step > 0.0) h = std::min(h, opts.max_step);
      if (hits_output) {
        out.times.push_back(t);
        out.states.push_back(y);
        ++next_out;
      } else if (opts.record_steps) {
        out.times.push_back(t);
        out.states.push_back(y);
      }
      continue;
    } else {
      ++stats.rejected;
      const double factor = std::max(0.2, 0.9 * std::pow(err_norm, -0.2));
      h = step * factor;
    }
    if (h < opts.min_step * std::max(1.0, std::abs(t))) {
      std::ostringstream msg;
      msg << "step size underflow at t=" << t << " (h=" << h << ", error norm=" << err_norm
          << ", accepted=" << stats.accepted << ", rejected=" << stats.rejected << ")";
      throw IntegratorError(msg.str());
    }
  }
  return out;
}

}  // namespace locfield
