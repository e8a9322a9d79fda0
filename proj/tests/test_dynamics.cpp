#include <gtest/gtest.h>

#include <cmath>

#include "nhb/catalog.hpp"
#include "nhb/dynamics.hpp"
#include "oracles.hpp"

using Vec = std::vector<double>;

namespace {

nhb::SystemDefinition planar(const std::string& potential) {
  return nhb::dsl::parse_system(
      "[system]\nname = planar\ndim = 2\ncoords = x, y\n[metric]\nrow1 = 1, 0\nrow2 = 0, 1\n"
      "[potential]\nV = " + potential + "\n[constraint]\nform = 0, 1\n");
}

void expect_near(const Vec& a, const Vec& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

double max_energy_drift(const nhb::Trajectory& t) {
  double d = 0.0;
  for (const auto& r : t.records) d = std::max(d, std::abs(r.H - t.records.front().H));
  return d;
}

double max_residual(const nhb::Trajectory& t) {
  double d = 0.0;
  for (const auto& r : t.records) d = std::max(d, nhb::max_abs(std::span<const double>(r.c)));
  return d;
}

}  // namespace

TEST(HamiltonianField, Examples) {
  auto a = nhb::catalog_system("holonomic_control");
  auto v = nhb::hamiltonian_field(a, {{0.2, 0.3}, {1, 0}});
  EXPECT_EQ(v.dq, (Vec{1, 0}));
  EXPECT_EQ(v.dp, (Vec{0, 0}));

  auto force = nhb::hamiltonian_field(planar("x"), {{0.5, 0}, {0, 0}});
  EXPECT_EQ(force.dq, (Vec{0, 0}));
  EXPECT_EQ(force.dp, (Vec{-1, 0}));

  auto b = nhb::catalog_system("nonholonomic_particle");
  auto vb = nhb::hamiltonian_field(b, {{0, 1, 0}, {1, 0, 1}});
  EXPECT_EQ(vb.dq, (Vec{1, 0, 1}));
  EXPECT_EQ(vb.dp, (Vec{0, 0, 0}));
}

TEST(Multipliers, Examples) {
  auto a = nhb::catalog_system("holonomic_control");
  for (const auto& x : nhb::sample_m_points(a, nhb::catalog_entry("holonomic_control"), 20, 1))
    EXPECT_EQ(nhb::multipliers(a, x), Vec{0.0});

  auto b = nhb::catalog_system("nonholonomic_particle");
  EXPECT_NEAR(nhb::multipliers(b, {{0, 1, 0}, {1, 0, 1}})[0], 0.0, 1e-15);
  EXPECT_NEAR(nhb::multipliers(b, {{0, 1, 0}, {1, 1, 1}})[0], 0.5, 1e-15);
  EXPECT_THROW(nhb::multipliers(b, {{0, 1, 0}, {1, 1, 0}}), nhb::NotOnM);
}

TEST(Multipliers, MatchHandDerivedFormula) {
  auto b = nhb::catalog_system("nonholonomic_particle");
  for (const auto& x : nhb::sample_m_points(b, nhb::catalog_entry("nonholonomic_particle"), 100, 2))
    EXPECT_NEAR(nhb::multipliers(b, x)[0], oracle::particle::lambda(x.q, x.p), 1e-13);
}

TEST(Multipliers, KeepConstraintConstantByFiniteDifferences) {
  // c(x + s X_nh) = O(s^2) when lambda is right.
  for (const char* id : {"nonholonomic_particle", "chaplygin_sleigh", "vertical_rolling_disk"}) {
    auto sys = nhb::catalog_system(id);
    for (const auto& x : nhb::sample_m_points(sys, nhb::catalog_entry(id), 20, 3)) {
      auto v = nhb::nonholonomic_field_multiplier(sys, x).flat();
      auto base = x.flat();
      const double s = 1e-5;
      auto plus = nhb::detail::axpy(base, s, v);
      auto minus = nhb::detail::axpy(base, -s, v);
      auto cp = nhb::constraint_residual(sys, std::span<const double>(plus));
      auto cm = nhb::constraint_residual(sys, std::span<const double>(minus));
      for (std::size_t a = 0; a < cp.size(); ++a) EXPECT_NEAR((cp[a] - cm[a]) / (2 * s), 0.0, 1e-8) << id;
    }
  }
}

TEST(NonholonomicField, Examples) {
  auto a = nhb::catalog_system("holonomic_control");
  auto va = nhb::nonholonomic_field_multiplier(a, {{0.2, 0.3}, {1, 0}});
  EXPECT_EQ(va.dq, (Vec{1, 0}));
  EXPECT_EQ(va.dp, (Vec{0, 0}));
  auto pa = nhb::nonholonomic_field_projection(a, {{0.2, 0.3}, {1, 0}});
  expect_near(pa.flat(), Vec{1, 0, 0, 0}, 1e-15);

  auto b = nhb::catalog_system("nonholonomic_particle");
  auto v0 = nhb::nonholonomic_field_multiplier(b, {{0, 1, 0}, {1, 0, 1}});
  expect_near(v0.dq, Vec{1, 0, 1}, 1e-15);
  expect_near(v0.dp, Vec{0, 0, 0}, 1e-15);
  auto v1 = nhb::nonholonomic_field_multiplier(b, {{0, 1, 0}, {1, 1, 1}});
  expect_near(v1.dq, Vec{1, 1, 1}, 1e-15);
  expect_near(v1.dp, Vec{-0.5, 0, 0.5}, 1e-15);
}

TEST(NonholonomicField, RoutesAgreeAndAreTangent) {
  for (const auto& e : nhb::catalog_systems()) {
    auto sys = nhb::catalog_system(e.id);
    for (const auto& x : nhb::sample_m_points(sys, e, 200, 4)) {
      auto m = nhb::nonholonomic_field_multiplier(sys, x).flat();
      auto p = nhb::nonholonomic_field_projection(sys, x).flat();
      for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], p[i], 1e-9) << e.id;

      auto flat_x = x.flat();
      auto dc = nhb::jacobian(
          [&](std::span<const nhb::Dual<double>> y) { return nhb::constraint_residual(sys, y); },
          std::span<const double>(flat_x));
      EXPECT_LE(nhb::max_abs(std::span<const double>(dc * m)), 1e-9) << e.id;

      // Q X_nh = 0
      auto proj = nhb::tangent_projector(sys, x);
      auto again = proj * p;
      for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(again[i], p[i], 1e-10) << e.id;
    }
  }
}

TEST(Integrate, FreeLine) {
  auto a = nhb::catalog_system("holonomic_control");
  auto t = nhb::integrate(a, {{0, 0}, {1, 0}}, 0.0, 1.0, 1e-3);
  ASSERT_EQ(t.records.size(), 1001u);
  EXPECT_EQ(t.records.back().t, 1.0);
  expect_near(t.records.back().x.q, Vec{1, 0}, 1e-10);
  for (std::size_t i = 1; i < t.records.size(); ++i) EXPECT_GT(t.records[i].t, t.records[i - 1].t);
}

TEST(Integrate, ParticleConservesEnergyAndConstraint) {
  auto b = nhb::catalog_system("nonholonomic_particle");
  auto x0 = nhb::sample_m_points(b, nhb::catalog_entry("nonholonomic_particle"), 1, 5)[0];
  auto t = nhb::integrate(b, x0, 0.0, 10.0, 1e-3);
  EXPECT_LE(max_energy_drift(t), 1e-8);
  EXPECT_LE(max_residual(t), 1e-8);
  for (const auto& r : t.records) EXPECT_NEAR(r.lambda[0], oracle::particle::lambda(r.x.q, r.x.p), 1e-12);
}

TEST(Integrate, FourthOrderEnergyDrift) {
  for (const char* id : {"nonholonomic_particle", "chaplygin_sleigh"}) {
    auto sys = nhb::catalog_system(id);
    auto x0 = nhb::sample_m_points(sys, nhb::catalog_entry(id), 1, 1)[0];
    nhb::IntegrateOptions raw;
    raw.project_each_step = false;
    raw.settings.on_manifold_tolerance = 1e-6;
    const double coarse = max_energy_drift(nhb::integrate(sys, x0, 0.0, 10.0, 0.1, raw));
    const double fine = max_energy_drift(nhb::integrate(sys, x0, 0.0, 10.0, 0.05, raw));
    EXPECT_GE(coarse / fine, 12.0) << id;
  }
}

TEST(Integrate, Reversible) {
  for (const char* id : {"nonholonomic_particle", "chaplygin_sleigh"}) {
    auto sys = nhb::catalog_system(id);
    auto x0 = nhb::sample_m_points(sys, nhb::catalog_entry(id), 1, 6)[0];
    auto fwd = nhb::integrate(sys, x0, 0.0, 1.0, 1e-3);
    auto back = nhb::integrate(sys, fwd.records.back().x, 1.0, 0.0, 1e-3);
    EXPECT_EQ(back.records.back().t, 0.0);
    expect_near(back.records.back().x.flat(), x0.flat(), 1e-7);
  }
}

TEST(Integrate, StepCount) {
  EXPECT_EQ(nhb::step_count(0, 1, 1e-3), 1000u);
  EXPECT_EQ(nhb::step_count(0, 10, 1e-3), 10000u);
  EXPECT_EQ(nhb::step_count(0, 1, 0.3), 4u);
  EXPECT_EQ(nhb::step_count(1, 0, 0.25), 4u);
  EXPECT_EQ(nhb::step_count(0, 0, 0.1), 0u);
}

TEST(Integrate, Errors) {
  auto a = nhb::catalog_system("holonomic_control");
  EXPECT_THROW(nhb::integrate(a, {{0, 0}, {1, 0}}, 0, 1, 0.0), nhb::Error);
  EXPECT_THROW(nhb::integrate(a, {{0, 0}, {1, 0}}, 0, 1, -1e-3), nhb::Error);
  EXPECT_THROW(nhb::integrate(a, {{0, 0}, {1, 1}}, 0, 1, 1e-3), nhb::NotOnM);
}

TEST(Integrate, StepFailureKeepsPartialTrajectory) {
  auto sys = planar("sqrt(x)");
  try {
    nhb::integrate(sys, {{0.5, 0}, {-1, 0}}, 0.0, 2.0, 1e-2);
    FAIL() << "expected StepFailure";
  } catch (const nhb::StepFailure& e) {
    const auto& recs = e.partial().records;
    ASSERT_GE(recs.size(), 2u);
    EXPECT_LT(recs.back().t, 2.0);
    EXPECT_GT(recs.back().x.q[0], 0.0);
    EXPECT_NE(std::string(e.what()).find("failed"), std::string::npos);
  }
}

TEST(Integrate, UnprojectedDriftBeyondToleranceFails) {
  auto c = nhb::catalog_system("chaplygin_sleigh");
  auto x0 = nhb::sample_m_points(c, nhb::catalog_entry("chaplygin_sleigh"), 1, 1)[0];
  nhb::IntegrateOptions raw;
  raw.project_each_step = false;
  raw.settings.on_manifold_tolerance = 1e-12;
  EXPECT_THROW(nhb::integrate(c, x0, 0.0, 10.0, 0.2, raw), nhb::StepFailure);
  raw.settings.on_manifold_tolerance = 1e-6;
  EXPECT_NO_THROW(nhb::integrate(c, x0, 0.0, 10.0, 0.2, raw));
}

TEST(EvolutionCheck, Examples) {
  auto b = nhb::catalog_system("nonholonomic_particle");
  auto x0 = nhb::sample_m_points(b, nhb::catalog_entry("nonholonomic_particle"), 1, 7)[0];
  auto t = nhb::integrate(b, x0, 0.0, 1.0, 1e-3);
  EXPECT_LE(nhb::observable_evolution_check(b, t, nhb::Observable::expression(b, "3")).max_deviation, 1e-12);
  auto h = nhb::observable_evolution_check(b, t, nhb::Observable::hamiltonian());
  EXPECT_LE(h.max_deviation, 1e-6);
  for (const char* f : {"x", "y", "z", "p_x", "x*p_y"}) {
    auto r = nhb::observable_evolution_check(b, t, nhb::Observable::expression(b, f));
    EXPECT_LE(r.max_deviation, 1e-5) << f;
    EXPECT_LE(r.max_hamiltonian_form_gap, 1e-9) << f;
  }
}
