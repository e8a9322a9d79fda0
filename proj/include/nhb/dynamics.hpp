#pragma once

// Hamiltonian and nonholonomic vector fields, Lagrange multipliers, and
// fixed-step RK4 integration on M.
//
// Two independent constructions of the constrained field:
//   multiplier route   dq = dH/dp,  dp = -dH/dq - mu^T lambda,
//                      lambda = A^{-1} (dc . X_H)  (keeps c = mu G^{-1} p constant)
//   projection route   X_nh = P X_H
// They agree on M; dynamics tests compare them pointwise.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nhb/brackets.hpp"
#include "nhb/errors.hpp"
#include "nhb/geometry.hpp"
#include "nhb/numdiff.hpp"
#include "nhb/system.hpp"

namespace nhb {

struct PhaseVelocity {
  std::vector<double> dq;
  std::vector<double> dp;

  std::vector<double> flat() const {
    std::vector<double> v = dq;
    v.insert(v.end(), dp.begin(), dp.end());
    return v;
  }
  static PhaseVelocity from_flat(std::span<const double> v) {
    auto x = PhasePoint::from_flat(v);
    return {std::move(x.q), std::move(x.p)};
  }
};

namespace detail {

inline std::vector<double> hamiltonian_gradient(const SystemDefinition& sys, std::span<const double> x) {
  return gradient([&](std::span<const Dual<double>> y) { return hamiltonian_value(sys, y); }, x).gradient;
}

struct FieldParts {
  std::vector<double> xh;      // X_H
  std::vector<double> lambda;  // multipliers
  Matrix<double> mu;
};

// No on-M check: also used at RK4 stages, which sit slightly off M.
inline FieldParts field_parts(const SystemDefinition& sys, std::span<const double> x) {
  const std::size_t n = sys.dim();
  auto grad = hamiltonian_gradient(sys, x);
  auto xh = hamiltonian_vector(std::span<const double>(grad));
  Matrix<double> dc = jacobian([&](std::span<const Dual<double>> y) { return constraint_residual(sys, y); }, x);
  auto rate = dc * xh;
  auto kernel = point_kernel(sys, config_part(x, n));
  auto lambda = kernel.gram_lu.solve(rate);
  return {std::move(xh), std::move(lambda), std::move(kernel.mu)};
}

inline std::vector<double> multiplier_field_flat(const SystemDefinition& sys, std::span<const double> x) {
  const std::size_t n = sys.dim();
  auto parts = field_parts(sys, x);
  auto v = std::move(parts.xh);
  for (std::size_t a = 0; a < parts.mu.rows(); ++a)
    for (std::size_t j = 0; j < n; ++j) v[n + j] -= parts.mu(a, j) * parts.lambda[a];
  return v;
}

}  // namespace detail

inline PhaseVelocity hamiltonian_field(const SystemDefinition& sys, const PhasePoint& x) {
  check_dimension(sys, x.q.size(), "q");
  check_dimension(sys, x.p.size(), "p");
  auto v = x.flat();
  auto grad = detail::hamiltonian_gradient(sys, v);
  auto xh = hamiltonian_vector(std::span<const double>(grad));
  return PhaseVelocity::from_flat(xh);
}

inline std::vector<double> multipliers(const SystemDefinition& sys, const PhasePoint& x, const Settings& settings = {}) {
  require_on_manifold(sys, x, settings);
  auto v = x.flat();
  return detail::field_parts(sys, v).lambda;
}

inline PhaseVelocity nonholonomic_field_multiplier(const SystemDefinition& sys, const PhasePoint& x,
                                                   const Settings& settings = {}) {
  require_on_manifold(sys, x, settings);
  auto v = x.flat();
  return PhaseVelocity::from_flat(detail::multiplier_field_flat(sys, v));
}

inline PhaseVelocity nonholonomic_field_projection(const SystemDefinition& sys, const PhasePoint& x,
                                                   const Settings& settings = {}) {
  auto p = tangent_projector(sys, x, settings);
  auto xh = hamiltonian_field(sys, x).flat();
  return PhaseVelocity::from_flat(p * xh);
}

// ---------------------------------------------------------------------------
// Integration

struct TrajectoryRecord {
  double t = 0.0;
  PhasePoint x;
  double H = 0.0;
  std::vector<double> c;
  std::vector<double> lambda;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
};

class StepFailure : public Error {
 public:
  StepFailure(const std::string& msg, Trajectory partial) : Error(msg), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

struct IntegrateOptions {
  /// Replace p by gamma_q(p) after every step.
  bool project_each_step = true;
  Settings settings;
};

namespace detail {

inline TrajectoryRecord make_record(const SystemDefinition& sys, double t, std::span<const double> x) {
  const std::size_t n = sys.dim();
  auto parts = field_parts(sys, x);
  auto kernel = point_kernel(sys, config_part(x, n));
  TrajectoryRecord r;
  r.t = t;
  r.x = PhasePoint::from_flat(x);
  r.H = hamiltonian_value(sys, x);
  r.c = kernel.residual(momentum_part(x, n));
  r.lambda = std::move(parts.lambda);
  return r;
}

inline std::vector<double> axpy(std::span<const double> x, double h, std::span<const double> k) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += h * k[i];
  return out;
}

inline std::vector<double> rk4_step(const SystemDefinition& sys, std::span<const double> x, double h) {
  auto k1 = multiplier_field_flat(sys, x);
  auto k2 = multiplier_field_flat(sys, axpy(x, 0.5 * h, k1));
  auto k3 = multiplier_field_flat(sys, axpy(x, 0.5 * h, k2));
  auto k4 = multiplier_field_flat(sys, axpy(x, h, k3));
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace detail

/// Number of uniform steps covering |t1 - t0| with step at most dt (up to
/// rounding in the ratio).
inline std::size_t step_count(double t0, double t1, double dt) {
  const double ratio = std::abs(t1 - t0) / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(ratio));
}

/// Classical RK4 on the multiplier field from t0 to t1 (t1 < t0 integrates
/// backwards).  The step is (t1 - t0) / N with N = step_count(t0, t1, dt).
inline Trajectory integrate(const SystemDefinition& sys, const PhasePoint& x0, double t0, double t1, double dt,
                            const IntegrateOptions& options = {}) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("dt must be positive and finite");
  if (!std::isfinite(t0) || !std::isfinite(t1)) throw Error("t0 and t1 must be finite");
  require_on_manifold(sys, x0, options.settings);
  check_dimension(sys, x0.p.size(), "p");

  const std::size_t n = sys.dim();
  const std::size_t steps = step_count(t0, t1, dt);
  const double h = steps == 0 ? 0.0 : (t1 - t0) / static_cast<double>(steps);
  Trajectory traj;
  traj.records.reserve(steps + 1);
  std::vector<double> x = x0.flat();
  traj.records.push_back(detail::make_record(sys, t0, x));

  for (std::size_t i = 1; i <= steps; ++i) {
    const double t = i == steps ? t1 : t0 + static_cast<double>(i) * h;
    try {
      x = detail::rk4_step(sys, x, h);
      for (double v : x)
        if (!std::isfinite(v)) throw DomainError("step", "non-finite state");
      if (options.project_each_step) {
        auto q = config_part(std::span<const double>(x), n);
        auto gp = point_kernel(sys, q).eden(momentum_part(std::span<const double>(x), n));
        std::copy(gp.begin(), gp.end(), x.begin() + static_cast<std::ptrdiff_t>(n));
      }
      auto rec = detail::make_record(sys, t, x);
      const double drift = max_abs(std::span<const double>(rec.c));
      if (!(drift <= options.settings.on_manifold_tolerance))
        throw NotOnM("state left M: max |c| = " + format_double(drift));
      traj.records.push_back(std::move(rec));
    } catch (const Error& e) {
      throw StepFailure("step " + std::to_string(i) + " (t = " + format_double(t) + ") failed: " + e.what(),
                        std::move(traj));
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Observable evolution along a trajectory

struct EvolutionCheck {
  /// max over interior samples of |centered df/dt - {f, H o gamma^}_E|.
  double max_deviation = 0.0;
  /// max over interior samples of |{f, H o gamma^}_E - nhb2(f, raw H)|.
  double max_hamiltonian_form_gap = 0.0;
};

inline EvolutionCheck observable_evolution_check(const SystemDefinition& sys, const Trajectory& traj,
                                                 const Observable& f, const Settings& settings = {}) {
  const auto& r = traj.records;
  EvolutionCheck out;
  if (r.size() < 3) return out;
  const auto h = Observable::hamiltonian();
  auto ff = bind_observable(sys, f);
  auto hh = bind_observable(sys, h);
  for (std::size_t i = 1; i + 1 < r.size(); ++i) {
    const double rate = (f(sys, r[i + 1].x) - f(sys, r[i - 1].x)) / (r[i + 1].t - r[i - 1].t);
    require_on_manifold(sys, r[i].x, settings);
    auto v = r[i].x.flat();
    std::span<const double> s(v);
    const double eden = eden_bracket_at(sys, ff, hh, s);
    const double nh2 = nonholonomic_bracket_extensions_at(sys, gamma_extension_of(sys, ff), hh, s, NhForm::OneProjected);
    out.max_deviation = std::max(out.max_deviation, std::abs(rate - eden));
    out.max_hamiltonian_form_gap = std::max(out.max_hamiltonian_form_gap, std::abs(eden - nh2));
  }
  return out;
}

}  // namespace nhb
