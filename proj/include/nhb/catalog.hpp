#pragma once

// Built-in systems, the shared observable test set, and seeded sampling of M.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nhb/dsl/system_file.hpp"
#include "nhb/errors.hpp"
#include "nhb/geometry.hpp"
#include "nhb/random.hpp"
#include "nhb/system.hpp"

namespace nhb {

struct CatalogEntry {
  std::string label;  // SYS-A ..
  std::string id;
  std::string text;   // exact system-file source
  std::vector<std::pair<double, double>> sample_region;  // per coordinate
  double momentum_scale = 1.0;
  std::string notes;
};

inline const std::vector<CatalogEntry>& catalog_systems() {
  static const std::vector<CatalogEntry> entries = {
      {"SYS-A", "holonomic_control",
       "# Planar particle confined to the line y = const: integrable constraint.\n"
       "[system]\n"
       "name = holonomic_control\n"
       "dim = 2\n"
       "coords = x, y\n"
       "\n"
       "[metric]\n"
       "row1 = 1, 0\n"
       "row2 = 0, 1\n"
       "\n"
       "[potential]\n"
       "V = 0\n"
       "\n"
       "[constraint]\n"
       "form = 0, 1\n",
       {{-1.0, 1.0}, {-1.0, 1.0}},
       1.0,
       "free particle with ydot = 0; integrable distribution (Jacobi control case)"},
      {"SYS-B", "nonholonomic_particle",
       "# Free particle in R^3 subject to zdot = y xdot.\n"
       "[system]\n"
       "name = nonholonomic_particle\n"
       "dim = 3\n"
       "coords = x, y, z\n"
       "\n"
       "[metric]\n"
       "row1 = 1, 0, 0\n"
       "row2 = 0, 1, 0\n"
       "row3 = 0, 0, 1\n"
       "\n"
       "[potential]\n"
       "V = 0\n"
       "\n"
       "[constraint]\n"
       "form = y, 0, -1\n",
       {{-1.0, 1.0}, {-0.9, 0.9}, {-1.0, 1.0}},
       1.0,
       "free particle with zdot = y xdot; non-integrable distribution"},
      {"SYS-C", "chaplygin_sleigh",
       "# Chaplygin sleigh: planar rigid body with a knife edge at distance a\n"
       "# from the reference point.\n"
       "[system]\n"
       "name = chaplygin_sleigh\n"
       "dim = 3\n"
       "coords = x, y, th\n"
       "\n"
       "[params]\n"
       "m = 1\n"
       "J = 1\n"
       "a = 0.5\n"
       "\n"
       "[metric]\n"
       "row1 = m, 0, -m*a*sin(th)\n"
       "row2 = 0, m, m*a*cos(th)\n"
       "row3 = -m*a*sin(th), m*a*cos(th), J+m*a^2\n"
       "\n"
       "[potential]\n"
       "V = 0\n"
       "\n"
       "[constraint]\n"
       "form = -sin(th), cos(th), -a\n",
       {{-1.0, 1.0}, {-1.0, 1.0}, {-0.5, 0.5}},
       1.0,
       "knife-edge rigid body, m = J = 1, a = 0.5; non-integrable distribution"},
      {"SYS-D", "vertical_rolling_disk",
       "# Vertical disk rolling without slipping on the plane.\n"
       "[system]\n"
       "name = vertical_rolling_disk\n"
       "dim = 4\n"
       "coords = x, y, th, ph\n"
       "\n"
       "[params]\n"
       "m = 1\n"
       "I = 1\n"
       "J = 1\n"
       "R = 1\n"
       "\n"
       "[metric]\n"
       "row1 = m, 0, 0, 0\n"
       "row2 = 0, m, 0, 0\n"
       "row3 = 0, 0, I, 0\n"
       "row4 = 0, 0, 0, J\n"
       "\n"
       "[potential]\n"
       "V = 0\n"
       "\n"
       "[constraint]\n"
       "form = 1, 0, 0, -R*cos(th)\n"
       "\n"
       "[constraint]\n"
       "form = 0, 1, 0, -R*sin(th)\n",
       {{-1.0, 1.0}, {-1.0, 1.0}, {0.2, 1.3}, {-1.0, 1.0}},
       1.0,
       "rolling disk, m = I = J = R = 1; two non-integrable rolling constraints"},
  };
  return entries;
}

/// Lookup by id ("nonholonomic_particle") or label ("SYS-B").
inline const CatalogEntry* find_catalog_entry(std::string_view key) {
  for (const auto& e : catalog_systems())
    if (e.id == key || e.label == key) return &e;
  return nullptr;
}

inline const CatalogEntry& catalog_entry(std::string_view key) {
  const auto* e = find_catalog_entry(key);
  if (!e) throw StructuralError("unknown catalog id '" + std::string(key) + "'");
  return *e;
}

inline SystemDefinition catalog_system(std::string_view key) { return dsl::parse_system(catalog_entry(key).text); }

/// Each q^i, each p_i, H, every q^i p_j (i outer), then sin(q^1) p_1.
inline std::vector<Observable> observable_test_set(const SystemDefinition& sys) {
  std::vector<Observable> out;
  const auto& c = sys.coords();
  for (const auto& q : c) out.push_back(Observable::expression(sys, q));
  for (const auto& q : c) out.push_back(Observable::expression(sys, momentum_name(q)));
  out.push_back(Observable::hamiltonian());
  for (const auto& qi : c)
    for (const auto& qj : c) out.push_back(Observable::expression(sys, qi + "*" + momentum_name(qj)));
  out.push_back(Observable::expression(sys, "sin(" + c[0] + ")*" + momentum_name(c[0])));
  return out;
}

inline constexpr int kSampleRetries = 100;

/// Seeded points of M: q uniform in `region`, p uniform in
/// [-momentum_scale, momentum_scale]^n, then p <- gamma_q(p).  One
/// SplitMix64 stream seeded with `seed`; draws are q then p per point.
inline std::vector<PhasePoint> sample_m_points(const SystemDefinition& sys,
                                               const std::vector<std::pair<double, double>>& region,
                                               double momentum_scale, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw Error("sample count must be at least 1");
  check_dimension(sys, region.size(), "sample region");
  SplitMix64 rng(seed);
  std::vector<PhasePoint> out;
  out.reserve(count);
  const std::size_t n = sys.dim();
  while (out.size() < count) {
    for (int attempt = 0;; ++attempt) {
      PhasePoint x{std::vector<double>(n), std::vector<double>(n)};
      for (std::size_t i = 0; i < n; ++i) x.q[i] = rng.uniform(region[i].first, region[i].second);
      for (std::size_t i = 0; i < n; ++i) x.p[i] = momentum_scale * rng.uniform(-1.0, 1.0);
      try {
        x.p = eden_project(sys, x.q, x.p);
        out.push_back(std::move(x));
        break;
      } catch (const RankDeficient&) {
        if (attempt + 1 >= kSampleRetries) throw;
      } catch (const NotSPD&) {
        if (attempt + 1 >= kSampleRetries) throw;
      }
    }
  }
  return out;
}

inline std::vector<PhasePoint> sample_m_points(const SystemDefinition& sys, const CatalogEntry& entry,
                                               std::size_t count, std::uint64_t seed) {
  return sample_m_points(sys, entry.sample_region, entry.momentum_scale, count, seed);
}

/// Region [-1, 1]^n for systems outside the catalog.
inline std::vector<std::pair<double, double>> default_sample_region(const SystemDefinition& sys) {
  return std::vector<std::pair<double, double>>(sys.dim(), {-1.0, 1.0});
}

}  // namespace nhb
