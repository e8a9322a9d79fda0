// Acceptance gate: one PASS/FAIL line per criterion.  Exit status is 0 when
// every criterion passes except those marked KNOWN-RED, which are printed as
// failures with the reason and do not affect the status.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "nhb/brackets.hpp"
#include "nhb/catalog.hpp"
#include "nhb/dsl/parser.hpp"
#include "nhb/dynamics.hpp"
#include "nhb/numdiff.hpp"
#include "nhb/verify.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using D = nhb::Dual<double>;
using nhb::format_double;

struct Outcome {
  Outcome(bool p = false, std::string d = {}, std::string k = {})
      : pass(p), detail(std::move(d)), known_red(std::move(k)) {}
  bool pass;
  std::string detail;
  std::string known_red;  // non-empty: expected failure and why
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Shared verify runs (seed 1, 100 points, 200 dynamics points) per system.
const std::vector<nhb::VerifyReport>& verify_reports() {
  static const std::vector<nhb::VerifyReport> reports = [] {
    std::vector<nhb::VerifyReport> out;
    for (const auto& e : nhb::catalog_systems()) {
      nhb::VerifyOptions o;
      o.count = 100;
      o.seed = 1;
      o.dynamics_points = 200;
      out.push_back(nhb::verify_system(nhb::catalog_system(e.id), e.sample_region, e.momentum_scale, o));
    }
    return out;
  }();
  return reports;
}

double suite_value(const nhb::VerifyReport& r, const std::string& name) {
  for (const auto& s : r.suites)
    if (s.name == name) return s.value;
  throw std::runtime_error("missing suite " + name);
}

const nhb::SuiteResult& suite(const nhb::VerifyReport& r, const std::string& name) {
  for (const auto& s : r.suites)
    if (s.name == name) return s;
  throw std::runtime_error("missing suite " + name);
}

// Max over systems of a verify suite, with a per-system listing.
Outcome bound_over_systems(const std::vector<std::string>& names, double tol) {
  Outcome o{true, ""};
  const auto& reps = verify_reports();
  for (const auto& name : names) {
    o.detail += name + " [";
    for (std::size_t i = 0; i < reps.size(); ++i) {
      const double v = suite_value(reps[i], name);
      o.pass = o.pass && v <= tol;
      o.detail += (i ? " " : "") + nhb::catalog_systems()[i].label + "=" + fmt(v);
    }
    o.detail += "] ";
  }
  o.detail += "<= " + fmt(tol);
  return o;
}

// 1 ------------------------------------------------------------------------
Outcome coincidence() {
  constexpr double tol = 1e-9;
  const auto start = Clock::now();
  Outcome o{true, ""};
  for (const auto& e : nhb::catalog_systems()) {
    auto sys = nhb::catalog_system(e.id);
    auto obs = nhb::observable_test_set(sys);
    double gap = 0.0;
    std::size_t pairs = 0;
    for (const auto& x : nhb::sample_m_points(sys, e, 100, 1)) {
      nhb::BracketProbe probe(sys, x);
      for (const auto& f : obs)
        for (const auto& g : obs) {
          gap = std::max(gap, probe.compare(f, g).max_pairwise_gap);
          ++pairs;
        }
    }
    o.pass = o.pass && gap <= tol;
    o.detail += e.label + "=" + fmt(gap) + " (" + std::to_string(pairs) + " pairs) ";
  }
  const double t = seconds_since(start);
  o.pass = o.pass && t < 60.0;
  o.detail += "<= " + fmt(tol) + "; " + fmt(t) + " s < 60 s";
  return o;
}

// 2 ------------------------------------------------------------------------
Outcome two_routes() { return bound_over_systems({"dynamics_two_routes"}, 1e-9); }

// 3 ------------------------------------------------------------------------
Outcome axioms() {
  auto skew = bound_over_systems({"skew_symmetry"}, 1e-12);
  auto leib = bound_over_systems({"leibniz"}, 1e-10);
  return {skew.pass && leib.pass, skew.detail + "; " + leib.detail};
}

// 4 ------------------------------------------------------------------------
Outcome jacobi() {
  const auto& reps = verify_reports();
  Outcome o{true, ""};
  double canon = 0.0;
  for (const auto& r : reps) canon = std::max(canon, suite_value(r, "jacobiator_canonical"));
  o.pass = canon <= 1e-8;
  o.detail = "canonical max=" + fmt(canon) + " <= 1e-8; ";

  const double a = suite_value(reps[0], "jacobiator_constrained_zero");
  o.pass = o.pass && a <= 1e-8 && reps[0].integrable;
  o.detail += "SYS-A eden/nh/dstar max=" + fmt(a) + " <= 1e-8; ";

  // Replay the SYS-B witness from its recorded seed, point index and triple.
  const auto& w = suite(reps[1], "jacobiator_witness");
  std::map<std::string, std::string> d(w.details.begin(), w.details.end());
  const auto& e = nhb::catalog_entry("nonholonomic_particle");
  auto sys = nhb::catalog_system(e.id);
  const auto index = std::stoul(d.at("point_index"));
  auto pts = nhb::sample_m_points(sys, e, index + 1, std::stoull(d.at("seed")));
  auto obs = [&](const std::string& id) {
    return id == "H" ? nhb::Observable::hamiltonian() : nhb::Observable::expression(sys, id);
  };
  const double replay = nhb::jacobiator(sys, nhb::BracketKind::Eden, obs(d.at("f")), obs(d.at("g")), obs(d.at("h")),
                                        pts[index]);
  o.pass = o.pass && std::abs(replay) > 1e-3 && std::abs(std::abs(replay) - w.value) <= 1e-12;
  o.detail += "SYS-B witness seed=" + d.at("seed") + " point=" + d.at("point_index") + " (" + d.at("f") + ", " +
              d.at("g") + ", " + d.at("h") + ") |J|=" + fmt(w.value) + " replay=" + fmt(std::abs(replay)) + " > 1e-3";
  return o;
}

// 5 ------------------------------------------------------------------------
Outcome tangent_lift() {
  auto tg = bound_over_systems({"tgamma_equals_projector_on_tdm"}, 1e-9);
  auto qx = bound_over_systems({"complement_projector_on_extension_fields"}, 1e-9);
  Outcome o{tg.pass && qx.pass, tg.detail + "; " + qx.detail};
  if (tg.pass && !qx.pass)
    o.known_red =
        "Q X_{f o gamma^} is not zero in general: on SYS-A with f = y, X_y = -d/dp_y is not tangent to M, so "
        "P X_y = 0 and |Q X_y| = 1. The T gamma^ = P part on T^D M holds.";
  return o;
}

// 6 ------------------------------------------------------------------------
Outcome conservation() {
  Outcome o{true, ""};
  for (const char* id : {"nonholonomic_particle", "chaplygin_sleigh"}) {
    const auto& e = nhb::catalog_entry(id);
    auto sys = nhb::catalog_system(id);
    auto x0 = nhb::sample_m_points(sys, e, 1, 1)[0];
    auto traj = nhb::integrate(sys, x0, 0.0, 10.0, 1e-3);
    double drift = 0.0, resid = 0.0;
    for (const auto& r : traj.records) {
      drift = std::max(drift, std::abs(r.H - traj.records.front().H));
      resid = std::max(resid, nhb::max_abs(std::span<const double>(r.c)));
    }
    // Order check at a step where truncation error dominates rounding; at
    // dt = 1e-3 the unprojected drift is already at rounding level.
    nhb::IntegrateOptions raw;
    raw.project_each_step = false;
    raw.settings.on_manifold_tolerance = 1e-6;
    auto unprojected_drift = [&](double dt) {
      auto t = nhb::integrate(sys, x0, 0.0, 10.0, dt, raw);
      double d = 0.0;
      for (const auto& r : t.records) d = std::max(d, std::abs(r.H - t.records.front().H));
      return d;
    };
    const double coarse = unprojected_drift(0.1), fine = unprojected_drift(0.05);
    const double ratio = coarse / fine;
    o.pass = o.pass && drift <= 1e-8 && resid <= 1e-8 && ratio >= 12.0;
    o.detail += e.label + ": |dH|=" + fmt(drift) + " max|c|=" + fmt(resid) + " drift(0.1)/drift(0.05)=" +
                fmt(ratio) + "; ";
  }
  o.detail += "bounds 1e-8, 1e-8, ratio >= 12";
  return o;
}

// 7 ------------------------------------------------------------------------
Outcome evolution() {
  const auto& e = nhb::catalog_entry("nonholonomic_particle");
  auto sys = nhb::catalog_system(e.id);
  auto x0 = nhb::sample_m_points(sys, e, 1, 1)[0];
  auto traj = nhb::integrate(sys, x0, 0.0, 1.0, 1e-3);
  std::vector<nhb::Observable> fs;
  for (const auto& q : sys.coords()) fs.push_back(nhb::Observable::expression(sys, q));
  fs.push_back(nhb::Observable::hamiltonian());
  Outcome o{true, ""};
  for (const auto& f : fs) {
    const double dev = nhb::observable_evolution_check(sys, traj, f).max_deviation;
    o.pass = o.pass && dev <= 1e-5;
    o.detail += f.id() + "=" + fmt(dev) + " ";
  }
  o.detail += "<= 1e-5 (t in [0, 1], dt = 1e-3)";
  return o;
}

// 8 ------------------------------------------------------------------------
Outcome extension() { return bound_over_systems({"extension_independence", "nhb_forms_agree"}, 1e-9); }

// 9 ------------------------------------------------------------------------
Outcome differentiation() {
  nhb::SplitMix64 rng(9);
  double worst_rel = 0.0;
  std::size_t checked = 0;
  for (const auto& c : test_support::catalog_corpus()) {
    const auto& entry = nhb::catalog_entry(c.system);
    for (int trial = 0; trial < 20; ++trial) {
      auto q = test_support::random_point(rng, entry.sample_region);
      auto ad = nhb::gradient([&](std::span<const D> y) { return c.expr(y); }, q).gradient;
      auto fd = oracle::central_gradient([&](const std::vector<double>& y) { return c.expr(y); }, q);
      for (std::size_t i = 0; i < q.size(); ++i)
        worst_rel = std::max(worst_rel, std::abs(ad[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
      ++checked;
    }
  }
  // Observables of the test set, including H, on phase points.
  for (const auto& e : nhb::catalog_systems()) {
    auto sys = nhb::catalog_system(e.id);
    for (const auto& f : nhb::observable_test_set(sys)) {
      for (const auto& x : nhb::sample_m_points(sys, e, 5, 9)) {
        auto v = x.flat();
        auto ad = nhb::gradient([&](std::span<const D> y) { return f(sys, y); }, std::span<const double>(v)).gradient;
        auto fd = oracle::central_gradient([&](const std::vector<double>& y) { return f(sys, std::span<const double>(y)); }, v);
        for (std::size_t i = 0; i < v.size(); ++i)
          worst_rel = std::max(worst_rel, std::abs(ad[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
        ++checked;
      }
    }
  }

  // Chain rule: J(F o G) = JF(G(x)) JG(x).
  auto G = [](std::span<const D> x) { return std::vector<D>{x[0] * x[1], sin(x[0]) + x[1], exp(x[1] * D(0.5))}; };
  auto F = [](std::span<const D> u) { return std::vector<D>{u[0] + u[1] * u[2], cos(u[0]) * u[2]}; };
  double chain = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto composite = nhb::jacobian([&](std::span<const D> y) { auto u = G(y); return F(std::span<const D>(u)); }, x);
    auto jg = nhb::jacobian(G, x);
    const auto seeded = nhb::lift(x);
    auto u = nhb::values_of(G(std::span<const D>(seeded)));
    auto product = nhb::jacobian(F, u) * jg;
    chain = std::max(chain, nhb::max_abs(composite - product));
  }
  return {worst_rel <= 1e-6 && chain <= 1e-12,
          "dual vs central FD worst relative=" + fmt(worst_rel) + " <= 1e-6 over " + std::to_string(checked) +
              " gradients; chain rule=" + fmt(chain) + " <= 1e-12"};
}

// 10 -----------------------------------------------------------------------
Outcome parser() {
  namespace dsl = nhb::dsl;
  bool golden_ok = true;
  for (const auto& e : nhb::catalog_systems()) {
    const auto golden = read_file("golden/" + e.id + ".sys");
    golden_ok = golden_ok && golden == e.text;
    auto sys = dsl::parse_system(golden);
    const auto& src = sys.source();
    std::vector<dsl::ExprPtr> all;
    for (const auto& row : src.metric) all.insert(all.end(), row.begin(), row.end());
    for (const auto& row : src.constraints) all.insert(all.end(), row.begin(), row.end());
    all.push_back(src.potential);
    for (const auto& t : all) golden_ok = golden_ok && dsl::same_tree(*dsl::parse_expression(dsl::to_string(*t)), *t);
  }

  nhb::SplitMix64 rng(10);
  const std::string alphabet = "0123456789.eE+-*/^() \tabcxyzsincotaexplgqrt_,#\x01\xff";
  std::size_t parsed = 0, rejected = 0;
  const auto start = Clock::now();
  for (int i = 0; i < 100000; ++i) {
    const std::size_t len = rng.next() % 24;
    std::string s;
    for (std::size_t k = 0; k < len; ++k)
      s.push_back(i % 2 ? static_cast<char>(rng.next() & 0xff) : alphabet[rng.next() % alphabet.size()]);
    try {
      (void)dsl::to_string(*dsl::parse_expression(s));
      ++parsed;
    } catch (const nhb::Error&) {
      ++rejected;
    }
  }
  const double fuzz_time = seconds_since(start);
  const bool fuzz_ok = parsed + rejected == 100000 && fuzz_time < 30.0;

  auto eval = [](const std::string& text, std::map<std::string, double> env) {
    return dsl::evaluate(*dsl::parse_expression(text), env);
  };
  const bool prec_ok = eval("-q1^2", {{"q1", 3.0}}) == -9.0 && eval("2^3^2", {}) == 512.0 &&
                       eval("2^-1", {}) == 0.5 && eval("(-2)^2", {}) == 4.0 && eval("8/4/2", {}) == 1.0;
  return {golden_ok && fuzz_ok && prec_ok,
          std::string("golden round trips ") + (golden_ok ? "ok" : "MISMATCH") + "; fuzz 1e5 inputs (" +
              std::to_string(parsed) + " parsed, " + std::to_string(rejected) + " rejected) in " + fmt(fuzz_time) +
              " s; precedence fixtures " + (prec_ok ? "exact" : "WRONG") + " (-q1^2 = -9 at q1 = 3)"};
}

// 11 -----------------------------------------------------------------------
Outcome determinism() {
  auto run = [](const std::string& id, const char* workers) {
    const std::vector<std::string> args = {"nhb", "verify", "--system", "catalog:" + id, "--seed", "1", "--workers", workers};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = nhb::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return std::make_pair(code, out.str());
  };
  Outcome o{true, ""};
  for (const auto& e : nhb::catalog_systems()) {
    auto a = run(e.id, "1"), b = run(e.id, "1"), c = run(e.id, "8");
    const bool same = a.second == b.second && a.second == c.second && !a.second.empty();
    o.pass = o.pass && same && a.first == 0;
    o.detail += e.label + (same ? " identical" : " DIFFERS") + " (exit " + std::to_string(a.first) + ", " +
                std::to_string(a.second.size()) + " bytes) ";
  }
  o.detail += "across two runs and workers 1 vs 8";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"three-bracket coincidence", coincidence},
      {"two-route dynamics", two_routes},
      {"almost-Poisson axioms", axioms},
      {"Jacobi dichotomy", jacobi},
      {"tangent lift vs symplectic projector", tangent_lift},
      {"conservation along flow", conservation},
      {"evolution identity", evolution},
      {"extension independence and nh forms", extension},
      {"differentiation engine", differentiation},
      {"parser", parser},
      {"determinism", determinism},
  };
  int unexpected = 0, known = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const char* tag = o.pass ? "PASS" : (o.known_red.empty() ? "FAIL" : "FAIL (KNOWN-RED)");
    std::printf("[%s] %zu %s: %s\n", tag, i + 1, criteria[i].first.c_str(), o.detail.c_str());
    if (!o.pass && !o.known_red.empty()) std::printf("       reason: %s\n", o.known_red.c_str());
    std::fflush(stdout);
    if (!o.pass) (o.known_red.empty() ? unexpected : known)++;
  }
  std::printf("%d unexpected failure(s), %d known-red\n", unexpected, known);
  return unexpected == 0 ? 0 : 1;
}
