#pragma once

// Property sweeps over seeded points of M.  Each sample point is processed
// independently (possibly on a worker thread) into a PointResult; results
// are reduced in sample-index order, so reports do not depend on the
// number of workers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nhb/brackets.hpp"
#include "nhb/catalog.hpp"
#include "nhb/dynamics.hpp"
#include "nhb/geometry.hpp"
#include "nhb/system.hpp"

namespace nhb {

struct VerifyOptions {
  std::size_t count = 100;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  /// Replaces every upper-bound tolerance when set.
  std::optional<double> tolerance;
  /// Points (a prefix of the sample) used for Jacobiator probes.
  std::size_t jacobiator_points = 20;
  /// Points used for the two-route dynamics comparison.
  std::size_t dynamics_points = 200;
  Settings settings;
};

struct SuiteResult {
  std::string name;
  /// "<=": value must not exceed tolerance; ">": value must exceed it;
  /// "report": informational, never fails.
  std::string check = "<=";
  double tolerance = 0.0;
  double value = 0.0;
  bool passed = true;
  std::vector<std::pair<std::string, std::string>> details;
};

struct VerifyReport {
  std::string system;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  bool integrable = false;
  std::vector<SuiteResult> suites;

  bool passed() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
  }
};

/// Run fn(i) for i in [0, count) on `workers` threads; exceptions are
/// rethrown for the lowest failing index.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < count; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Max over sampled q of |mu [E_a, E_b]| for default-frame fields: a
/// nonzero value shows D is not involutive.
inline double distribution_non_involutivity(const SystemDefinition& sys, const std::vector<PhasePoint>& points) {
  double worst = 0.0;
  for (const auto& x : points) {
    auto c = constraints_at(sys, x.q);
    for (std::size_t a = 0; a < sys.rank(); ++a)
      for (std::size_t b = a + 1; b < sys.rank(); ++b) {
        auto br = lie_bracket_at(frame_field(sys, a), frame_field(sys, b), std::span<const double>(x.q));
        worst = std::max(worst, max_abs(std::span<const double>(c.mu * br)));
      }
  }
  return worst;
}

inline constexpr double kInvolutivityThreshold = 1e-6;

namespace detail {

inline constexpr std::array<BracketKind, 4> kAllKinds = {BracketKind::Canonical, BracketKind::Eden,
                                                         BracketKind::Nonholonomic, BracketKind::DStar};

struct Witness {
  double magnitude = 0.0;
  std::size_t point = 0;
  std::array<std::size_t, 3> triple{};
};

struct PointResult {
  double coincidence = 0.0;
  double skew = 0.0;
  double skew_nh2 = 0.0;
  double leibniz = 0.0;
  double extension = 0.0;
  double nh_forms = 0.0;
  double tgamma = 0.0;
  double tgamma_base_in_d = 0.0;
  double q_kills = 0.0;
  double base_in_d = 0.0;
  double jac_canonical = 0.0;
  std::array<double, 3> jac_constrained{};  // eden, nh, dstar
  Witness witness;
};

inline PointResult analyse_point(const SystemDefinition& sys, const PhasePoint& x,
                                 const std::vector<Observable>& obs, bool probe_jacobiator, std::size_t index,
                                 const Settings& settings) {
  PointResult r;
  BracketProbe probe(sys, x, settings);
  const std::size_t m = obs.size();
  const std::size_t n = sys.dim();

  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      auto rep = probe.compare(obs[i], obs[j]);
      r.coincidence = std::max(r.coincidence, rep.max_pairwise_gap);
      r.nh_forms = std::max(r.nh_forms, std::abs(rep.value_nh - rep.value_nh2));
      if (j > i) {
        for (auto k : kAllKinds)
          r.skew = std::max(r.skew, std::abs(probe.value(k, obs[i], obs[j]) + probe.value(k, obs[j], obs[i])));
        r.skew_nh2 = std::max(r.skew_nh2, std::abs(probe.nh2(obs[i], obs[j]) + probe.nh2(obs[j], obs[i])));
      }
    }

  for (std::size_t i = 0; i + 1 < m; ++i) {
    const auto prod = Observable::product(obs[i], obs[i + 1]);
    const double fa = obs[i](sys, x), fb = obs[i + 1](sys, x);
    for (std::size_t j = 0; j < m; ++j)
      for (auto k : kAllKinds) {
        const double lhs = probe.value(k, prod, obs[j]);
        const double rhs = fa * probe.value(k, obs[i + 1], obs[j]) + fb * probe.value(k, obs[i], obs[j]);
        r.leibniz = std::max(r.leibniz, std::abs(lhs - rhs));
      }
  }

  // Extension independence: f o gamma^ + s c_1 for s in {1, -1, 10}.
  {
    const auto& split = probe.splitting();
    auto flat_x = x.flat();
    std::span<const double> s(flat_x);
    auto residual = [&sys]<class T>(std::span<const T> y) -> T { return constraint_residual(sys, y)[0]; };
    std::vector<std::array<std::vector<double>, 4>> fields(m);  // P X for s = 0, 1, -1, 10
    constexpr std::array<double, 4> scales = {0.0, 1.0, -1.0, 10.0};
    for (std::size_t i = 0; i < m; ++i) {
      auto ext = gamma_extension_of(sys, bind_observable(sys, obs[i]));
      for (std::size_t t = 0; t < scales.size(); ++t) {
        const double sc = scales[t];
        auto perturbed = [&ext, &residual, sc]<class T>(std::span<const T> y) -> T {
          return ext(y) + T(sc) * residual(y);
        };
        auto grad = GradientOf<decltype(perturbed)>{perturbed}(s);
        fields[i][t] = split.P * hamiltonian_vector(std::span<const double>(grad));
      }
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double base = omega(std::span<const double>(fields[i][0]), std::span<const double>(fields[j][0]));
        for (std::size_t t = 1; t < scales.size(); ++t) {
          r.extension = std::max(r.extension, std::abs(omega(std::span<const double>(fields[i][t]),
                                                             std::span<const double>(fields[j][0])) - base));
          r.extension = std::max(r.extension, std::abs(omega(std::span<const double>(fields[i][0]),
                                                             std::span<const double>(fields[j][t])) - base));
          r.extension = std::max(r.extension, std::abs(omega(std::span<const double>(fields[i][t]),
                                                             std::span<const double>(fields[j][t])) - base));
        }
      }
  }

  // T gamma^ against P on T^D M, and X_{f o gamma^} in T^D M.
  {
    const auto& split = probe.splitting();
    auto tg = eden_lift_jacobian(sys, x);
    r.tgamma = tgamma_vs_projector_gap(tg, split.P, tdm_basis(split));
    r.tgamma_base_in_d = tgamma_vs_projector_gap(tg, split.P, base_in_d_basis(sys, x));
    auto mu = constraint_matrix(sys, std::span<const double>(x.q));
    for (const auto& f : obs) {
      const auto& xf = probe.extension_field(f);
      r.q_kills = std::max(r.q_kills, max_abs(std::span<const double>(split.Q * xf)));
      auto base = std::span<const double>(xf).subspan(0, n);
      r.base_in_d = std::max(r.base_in_d, max_abs(std::span<const double>(mu * base)));
    }
  }

  if (probe_jacobiator) {
    const std::size_t basic = 2 * n;  // coordinates and momenta
    for (std::size_t a = 0; a < basic; ++a)
      for (std::size_t b = a + 1; b < basic; ++b)
        for (std::size_t c = b + 1; c < basic; ++c) {
          r.jac_canonical = std::max(
              r.jac_canonical, std::abs(jacobiator(sys, BracketKind::Canonical, obs[a], obs[b], obs[c], x, settings)));
          for (std::size_t k = 0; k < 3; ++k) {
            const double j = jacobiator(sys, kAllKinds[k + 1], obs[a], obs[b], obs[c], x, settings);
            r.jac_constrained[k] = std::max(r.jac_constrained[k], std::abs(j));
            if (k == 0 && std::abs(j) > r.witness.magnitude) r.witness = {std::abs(j), index, {a, b, c}};
          }
        }
  }
  return r;
}

struct DynamicsResult {
  double routes = 0.0;
  double tangency = 0.0;
};

inline DynamicsResult analyse_dynamics(const SystemDefinition& sys, const PhasePoint& x, const Settings& settings) {
  auto a = nonholonomic_field_multiplier(sys, x, settings).flat();
  auto b = nonholonomic_field_projection(sys, x, settings).flat();
  DynamicsResult r;
  for (std::size_t i = 0; i < a.size(); ++i) r.routes = std::max(r.routes, std::abs(a[i] - b[i]));
  auto flat_x = x.flat();
  Matrix<double> dc = jacobian([&](std::span<const Dual<double>> y) { return constraint_residual(sys, y); },
                               std::span<const double>(flat_x));
  r.tangency = max_abs(std::span<const double>(dc * a));
  return r;
}

}  // namespace detail

struct SuiteTolerances {
  double coincidence = 1e-9;
  double skew = 1e-12;
  double leibniz = 1e-10;
  double extension = 1e-9;
  double nh_forms = 1e-9;
  double prop62 = 1e-9;
  double jacobi = 1e-8;
  double witness = 1e-3;
  double dynamics = 1e-9;
};

inline VerifyReport verify_system(const SystemDefinition& sys, const std::vector<std::pair<double, double>>& region,
                                  double momentum_scale, const VerifyOptions& options) {
  const auto obs = observable_test_set(sys);
  const auto points = sample_m_points(sys, region, momentum_scale, options.count, options.seed);
  const std::size_t jac_points = std::min(options.jacobiator_points, points.size());

  std::vector<detail::PointResult> results(points.size());
  parallel_for(points.size(), options.workers, [&](std::size_t i) {
    results[i] = detail::analyse_point(sys, points[i], obs, i < jac_points, i, options.settings);
  });

  const std::size_t dyn_count = std::max<std::size_t>(1, options.dynamics_points);
  const auto dyn_points = sample_m_points(sys, region, momentum_scale, dyn_count, options.seed);
  std::vector<detail::DynamicsResult> dyn(dyn_points.size());
  parallel_for(dyn_points.size(), options.workers,
               [&](std::size_t i) { dyn[i] = detail::analyse_dynamics(sys, dyn_points[i], options.settings); });

  detail::PointResult agg;
  for (const auto& r : results) {
    agg.coincidence = std::max(agg.coincidence, r.coincidence);
    agg.skew = std::max(agg.skew, r.skew);
    agg.skew_nh2 = std::max(agg.skew_nh2, r.skew_nh2);
    agg.leibniz = std::max(agg.leibniz, r.leibniz);
    agg.extension = std::max(agg.extension, r.extension);
    agg.nh_forms = std::max(agg.nh_forms, r.nh_forms);
    agg.tgamma = std::max(agg.tgamma, r.tgamma);
    agg.tgamma_base_in_d = std::max(agg.tgamma_base_in_d, r.tgamma_base_in_d);
    agg.q_kills = std::max(agg.q_kills, r.q_kills);
    agg.base_in_d = std::max(agg.base_in_d, r.base_in_d);
    agg.jac_canonical = std::max(agg.jac_canonical, r.jac_canonical);
    for (std::size_t k = 0; k < 3; ++k) agg.jac_constrained[k] = std::max(agg.jac_constrained[k], r.jac_constrained[k]);
    if (r.witness.magnitude > agg.witness.magnitude) agg.witness = r.witness;
  }
  detail::DynamicsResult dagg;
  for (const auto& d : dyn) {
    dagg.routes = std::max(dagg.routes, d.routes);
    dagg.tangency = std::max(dagg.tangency, d.tangency);
  }

  const double involutivity = distribution_non_involutivity(
      sys, std::vector<PhasePoint>(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(jac_points)));

  VerifyReport rep;
  rep.system = sys.name();
  rep.seed = options.seed;
  rep.count = options.count;
  rep.integrable = involutivity <= kInvolutivityThreshold;

  const SuiteTolerances tol;
  auto upper = [&](std::string name, double bound, double value) {
    SuiteResult s;
    s.name = std::move(name);
    s.tolerance = options.tolerance.value_or(bound);
    s.value = value;
    s.passed = value <= s.tolerance;
    rep.suites.push_back(std::move(s));
    return &rep.suites.back();
  };
  auto report = [&](std::string name, double value) {
    SuiteResult s;
    s.name = std::move(name);
    s.check = "report";
    s.value = value;
    rep.suites.push_back(std::move(s));
  };

  upper("bracket_coincidence", tol.coincidence, agg.coincidence);
  upper("skew_symmetry", tol.skew, std::max(agg.skew, agg.skew_nh2));
  upper("leibniz", tol.leibniz, agg.leibniz);
  upper("extension_independence", tol.extension, agg.extension);
  upper("nhb_forms_agree", tol.nh_forms, agg.nh_forms);
  upper("tgamma_equals_projector_on_tdm", tol.prop62, agg.tgamma);
  upper("extension_fields_base_in_d", tol.prop62, agg.base_in_d);
  // X_{f o gamma^} is generally not tangent to M (f = y on the holonomic
  // control system gives -d/dp_y), so Q X_{f o gamma^} = 0 is only reported.
  report("complement_projector_on_extension_fields", agg.q_kills);
  report("tgamma_equals_projector_on_base_in_d", agg.tgamma_base_in_d);
  upper("jacobiator_canonical", tol.jacobi, agg.jac_canonical);
  report("distribution_non_involutivity", involutivity);
  const double jac_max = std::max({agg.jac_constrained[0], agg.jac_constrained[1], agg.jac_constrained[2]});
  if (rep.integrable) {
    upper("jacobiator_constrained_zero", tol.jacobi, jac_max);
  } else {
    SuiteResult s;
    s.name = "jacobiator_witness";
    s.check = ">";
    s.tolerance = tol.witness;
    s.value = agg.witness.magnitude;
    s.passed = s.value > s.tolerance;
    const auto& w = agg.witness;
    s.details = {{"seed", std::to_string(options.seed)},
                 {"point_index", std::to_string(w.point)},
                 {"f", obs[w.triple[0]].id()},
                 {"g", obs[w.triple[1]].id()},
                 {"h", obs[w.triple[2]].id()}};
    rep.suites.push_back(std::move(s));
  }
  upper("dynamics_two_routes", tol.dynamics, dagg.routes);
  upper("dynamics_tangency", tol.dynamics, dagg.tangency);
  return rep;
}

}  // namespace nhb
