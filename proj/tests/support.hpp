#pragma once

#include <string>
#include <vector>

#include "nhb/catalog.hpp"

namespace test_support {

struct CorpusEntry {
  std::string system;
  std::string where;
  nhb::dsl::CompiledExpr expr;
};

/// Every metric, potential and constraint entry of every catalog system,
/// compiled against its configuration symbols.
inline std::vector<CorpusEntry> catalog_corpus() {
  std::vector<CorpusEntry> out;
  for (const auto& e : nhb::catalog_systems()) {
    auto sys = nhb::catalog_system(e.id);
    for (std::size_t i = 0; i < sys.dim(); ++i)
      for (std::size_t j = 0; j < sys.dim(); ++j)
        out.push_back({e.id, "metric(" + std::to_string(i) + "," + std::to_string(j) + ")", sys.metric()[i][j]});
    out.push_back({e.id, "V", sys.potential()});
    for (std::size_t a = 0; a < sys.constraint_count(); ++a)
      for (std::size_t j = 0; j < sys.dim(); ++j)
        out.push_back({e.id, "mu(" + std::to_string(a) + "," + std::to_string(j) + ")", sys.constraints()[a][j]});
  }
  return out;
}

inline std::vector<double> random_point(nhb::SplitMix64& rng, const std::vector<std::pair<double, double>>& region) {
  std::vector<double> q;
  for (const auto& [lo, hi] : region) q.push_back(rng.uniform(lo, hi));
  return q;
}

}  // namespace test_support
