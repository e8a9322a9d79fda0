#pragma once

/**
 * @file system_definition.hpp
 * @brief The quadruple (Q, g, V, D) in a single global chart.
 *
 * Q has coordinates q^1..q^n; the metric, potential and constraint one-forms
 * are expression matrices in q (and named parameters).  The distribution D
 * is the common kernel of the n-k constraint rows mu^alpha.  An optional
 * frame gives k expression columns spanning D.
 *
 * Phase-space observables use the slot layout (q^1..q^n, p_1..p_n) where the
 * momentum conjugate to coordinate `c` is named `p_c`.  Observables on D*
 * use (q^1..q^n, pi_1..pi_k).
 */

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nhb/dsl/expr.hpp"
#include "nhb/dsl/parser.hpp"
#include "nhb/errors.hpp"
#include "nhb/random.hpp"

namespace nhb {

using ExprMatrix = std::vector<std::vector<dsl::ExprPtr>>;

struct SystemSource {
  std::string name;
  std::vector<std::string> coords;
  std::vector<std::pair<std::string, double>> params;
  ExprMatrix metric;       // n rows of n entries
  dsl::ExprPtr potential;  // V(q)
  ExprMatrix constraints;  // n-k rows of n entries
  std::optional<ExprMatrix> frame;  // k columns of n entries
};

inline std::string momentum_name(const std::string& coord) { return "p_" + coord; }
inline std::string dstar_fiber_name(std::size_t a) { return "pi_" + std::to_string(a + 1); }

class SystemDefinition {
 public:
  /// Validates the source and compiles every entry.  Throws StructuralError
  /// (or an expression error naming the offending section/row/column).
  explicit SystemDefinition(SystemSource src) : src_(std::move(src)) {
    validate_names();
    const std::size_t n = dim();
    if (src_.metric.size() != n) throw StructuralError("metric must have " + std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i)
      if (src_.metric[i].size() != n)
        throw StructuralError("metric row" + std::to_string(i + 1) + " must have " + std::to_string(n) + " entries");
    if (!src_.potential) throw StructuralError("missing [potential] section");
    const std::size_t r = src_.constraints.size();
    if (r < 1 || r > n - 1)
      throw StructuralError("constraint count " + std::to_string(r) + " outside [1, " + std::to_string(n - 1) +
                            "] (rank k of D would be " + std::to_string(static_cast<long>(n) - static_cast<long>(r)) +
                            ")");
    for (std::size_t a = 0; a < r; ++a)
      if (src_.constraints[a].size() != n)
        throw StructuralError("constraint " + std::to_string(a + 1) + " must have " + std::to_string(n) + " entries");
    if (src_.frame) {
      if (src_.frame->size() != n - r)
        throw StructuralError("frame must have k = " + std::to_string(n - r) + " columns");
      for (std::size_t a = 0; a < src_.frame->size(); ++a)
        if ((*src_.frame)[a].size() != n)
          throw StructuralError("frame col" + std::to_string(a + 1) + " must have " + std::to_string(n) + " entries");
    }

    config_table_ = make_table(false, false);
    phase_table_ = make_table(true, false);
    dstar_table_ = make_table(false, true);

    metric_ = compile_matrix(src_.metric, "metric", "row");
    potential_ = compile_entry(src_.potential, "[potential] V");
    constraints_ = compile_matrix(src_.constraints, "constraint", "row");
    if (src_.frame) frame_ = compile_matrix(*src_.frame, "frame", "col");
    check_metric_symmetry();
  }

  const std::string& name() const noexcept { return src_.name; }
  std::size_t dim() const noexcept { return src_.coords.size(); }
  /// Number of constraint one-forms, n - k.
  std::size_t constraint_count() const noexcept { return src_.constraints.size(); }
  /// Rank k of the distribution D.
  std::size_t rank() const noexcept { return dim() - constraint_count(); }
  const std::vector<std::string>& coords() const noexcept { return src_.coords; }
  const std::vector<std::pair<std::string, double>>& params() const noexcept { return src_.params; }
  const SystemSource& source() const noexcept { return src_; }

  const std::vector<std::vector<dsl::CompiledExpr>>& metric() const noexcept { return metric_; }
  const dsl::CompiledExpr& potential() const noexcept { return potential_; }
  const std::vector<std::vector<dsl::CompiledExpr>>& constraints() const noexcept { return constraints_; }
  const std::optional<std::vector<std::vector<dsl::CompiledExpr>>>& frame() const noexcept { return frame_; }

  /// q^i and params.
  const dsl::SymbolTable& configuration_symbols() const noexcept { return config_table_; }
  /// q^i, p_i and params.
  const dsl::SymbolTable& phase_symbols() const noexcept { return phase_table_; }
  /// q^i, pi_a and params.
  const dsl::SymbolTable& dstar_symbols() const noexcept { return dstar_table_; }

  std::vector<std::string> phase_names() const {
    std::vector<std::string> out = src_.coords;
    for (const auto& c : src_.coords) out.push_back(momentum_name(c));
    return out;
  }

 private:
  static bool is_reserved(const std::string& s) { return dsl::function_from_name(s).has_value(); }

  void validate_names() const {
    if (!dsl::is_identifier(src_.name)) throw StructuralError("system name '" + src_.name + "' is not an identifier");
    if (src_.coords.size() < 2) throw StructuralError("dim must be at least 2");
    std::set<std::string> seen;
    for (const auto& c : src_.coords) {
      if (!dsl::is_identifier(c)) throw StructuralError("coordinate '" + c + "' is not an identifier");
      if (is_reserved(c)) throw StructuralError("coordinate '" + c + "' shadows a function name");
      if (!seen.insert(c).second) throw StructuralError("duplicate coordinate '" + c + "'");
    }
    for (const auto& c : src_.coords) {
      if (seen.count(momentum_name(c)))
        throw StructuralError("coordinate '" + momentum_name(c) + "' collides with the momentum of '" + c + "'");
    }
    for (std::size_t a = 0; a < src_.coords.size(); ++a)
      if (seen.count(dstar_fiber_name(a)))
        throw StructuralError("coordinate '" + dstar_fiber_name(a) + "' collides with a D* fiber name");
    std::set<std::string> pseen;
    for (const auto& [p, v] : src_.params) {
      if (!dsl::is_identifier(p)) throw StructuralError("parameter '" + p + "' is not an identifier");
      if (is_reserved(p)) throw StructuralError("parameter '" + p + "' shadows a function name");
      if (!pseen.insert(p).second) throw StructuralError("duplicate parameter '" + p + "'");
      if (seen.count(p)) throw StructuralError("parameter '" + p + "' shadows a coordinate");
      for (const auto& c : src_.coords)
        if (p == momentum_name(c)) throw StructuralError("parameter '" + p + "' shadows a momentum name");
      for (std::size_t a = 0; a < src_.coords.size(); ++a)
        if (p == dstar_fiber_name(a)) throw StructuralError("parameter '" + p + "' shadows a D* fiber name");
      if (!std::isfinite(v)) throw StructuralError("parameter '" + p + "' is not finite");
    }
  }

  dsl::SymbolTable make_table(bool momenta, bool fibers) const {
    dsl::SymbolTable t;
    for (const auto& c : src_.coords) t.add_slot(c);
    if (momenta)
      for (const auto& c : src_.coords) t.add_slot(momentum_name(c));
    if (fibers)
      for (std::size_t a = 0; a < src_.coords.size() - src_.constraints.size(); ++a) t.add_slot(dstar_fiber_name(a));
    for (const auto& [p, v] : src_.params) t.add_constant(p, v);
    return t;
  }

  dsl::CompiledExpr compile_entry(const dsl::ExprPtr& e, const std::string& where) const {
    if (!e) throw StructuralError(where + ": missing expression");
    try {
      return dsl::CompiledExpr(e, config_table_);
    } catch (const UnknownIdentifier& err) {
      std::string hint;
      for (const auto& id : dsl::identifiers(*e))
        for (const auto& c : src_.coords)
          if (id == momentum_name(c)) hint = " (momentum names are only legal in observables)";
      throw UnknownIdentifier(where + ": " + err.what() + hint);
    }
  }

  std::vector<std::vector<dsl::CompiledExpr>> compile_matrix(const ExprMatrix& m, const std::string& section,
                                                             const std::string& row_word) const {
    std::vector<std::vector<dsl::CompiledExpr>> out;
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::vector<dsl::CompiledExpr> row;
      for (std::size_t j = 0; j < m[i].size(); ++j)
        row.push_back(compile_entry(m[i][j], "[" + section + "] " + row_word + std::to_string(i + 1) + " column " +
                                                 std::to_string(j + 1)));
      out.push_back(std::move(row));
    }
    return out;
  }

  // Textual symmetry first; otherwise numeric agreement at probe points.
  void check_metric_symmetry() const {
    const std::size_t n = dim();
    SplitMix64 rng(0x5EED'0F'5EED'0Full);
    std::vector<std::vector<double>> probes;
    for (int k = 0; k < 8; ++k) {
      std::vector<double> q(n);
      for (auto& x : q) x = rng.uniform(-1.0, 1.0);
      probes.push_back(std::move(q));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (dsl::same_tree(metric_[i][j].tree(), metric_[j][i].tree())) continue;
        for (const auto& q : probes) {
          double a = 0.0, b = 0.0;
          try {
            a = metric_[i][j](q);
            b = metric_[j][i](q);
          } catch (const DomainError&) {
            continue;
          }
          if (std::abs(a - b) > 1e-10 * (1.0 + std::max(std::abs(a), std::abs(b))))
            throw StructuralError("metric entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                  ") differs from (" + std::to_string(j + 1) + "," + std::to_string(i + 1) + ")");
        }
      }
  }

  SystemSource src_;
  dsl::SymbolTable config_table_;
  dsl::SymbolTable phase_table_;
  dsl::SymbolTable dstar_table_;
  std::vector<std::vector<dsl::CompiledExpr>> metric_;
  dsl::CompiledExpr potential_;
  std::vector<std::vector<dsl::CompiledExpr>> constraints_;
  std::optional<std::vector<std::vector<dsl::CompiledExpr>>> frame_;
};

struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;

  /// (q^1..q^n, p_1..p_n).
  std::vector<double> flat() const {
    std::vector<double> x = q;
    x.insert(x.end(), p.begin(), p.end());
    return x;
  }
  static PhasePoint from_flat(std::span<const double> x) {
    const std::size_t n = x.size() / 2;
    return {{x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)}, {x.begin() + static_cast<std::ptrdiff_t>(n), x.end()}};
  }
};

/// A point of D*: base point and fiber components in the frame E(q).
struct DStarPoint {
  std::vector<double> q;
  std::vector<double> pi;

  std::vector<double> flat() const {
    std::vector<double> y = q;
    y.insert(y.end(), pi.begin(), pi.end());
    return y;
  }
};

}  // namespace nhb
