#pragma once

// Mechanical Lagrangian L = 1/2 v^T G v - V, its Legendre map (which is the
// metric flat), the Hamiltonian, and the identification of M with D* through
// a frame E of D:
//
//   to_dstar:   (q, p) -> (q, E^T p)                 (i_D^* restricted to M)
//   from_dstar: (q, pi) -> (q, G E (E^T G E)^{-1} pi)  (adjoint of the
//               g-orthogonal projector TQ -> D, lands on M)

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nhb/dsl/parser.hpp"
#include "nhb/geometry.hpp"
#include "nhb/system_definition.hpp"

namespace nhb {

template <class S>
S kinetic_from_momentum(const Matrix<S>& ginv, std::span<const S> p) {
  auto v = ginv * p;
  return S(0.5) * dot(std::span<const S>(v), p);
}

/// H = 1/2 p^T G^{-1} p + V(q) on the flat phase vector.
template <class S>
S hamiltonian_value(const SystemDefinition& sys, std::span<const S> x) {
  const std::size_t n = sys.dim();
  auto q = config_part(x, n);
  Matrix<S> g = metric_matrix(sys, q);
  Matrix<S> ginv = Lu<S>(g).inverse();
  return kinetic_from_momentum(ginv, momentum_part(x, n)) + sys.potential()(q);
}

template <class S>
std::vector<S> dstar_fiber(const SystemDefinition& sys, std::span<const S> q, std::span<const S> p) {
  Matrix<S> e = frame_matrix(sys, q, constraint_matrix(sys, q));
  return e.transpose() * p;
}

template <class S>
std::vector<S> dstar_momentum(const SystemDefinition& sys, std::span<const S> q, std::span<const S> pi) {
  Matrix<S> e = frame_matrix(sys, q, constraint_matrix(sys, q));
  Matrix<S> ge = metric_matrix(sys, q) * e;
  auto coef = Lu<S>(e.transpose() * ge).solve(pi);
  return ge * coef;
}

// ---------------------------------------------------------------------------
// Observables on T*Q

/// Scalar function of (q, p): an expression, the system Hamiltonian, or a
/// product of two observables.  Immutable and cheap to copy.
class Observable {
 public:
  static Observable expression(const SystemDefinition& sys, std::string_view text) {
    auto tree = dsl::parse_expression(text);
    auto node = std::make_shared<Node>();
    node->kind = Kind::Expression;
    node->expr = dsl::CompiledExpr(tree, sys.phase_symbols());
    node->id = dsl::to_string(*tree);
    return Observable(std::move(node));
  }

  static Observable hamiltonian() {
    auto node = std::make_shared<Node>();
    node->kind = Kind::Hamiltonian;
    node->id = "H";
    return Observable(std::move(node));
  }

  static Observable product(const Observable& a, const Observable& b) {
    auto node = std::make_shared<Node>();
    node->kind = Kind::Product;
    node->a = a.node_;
    node->b = b.node_;
    node->id = "(" + a.id() + ")*(" + b.id() + ")";
    return Observable(std::move(node));
  }

  const std::string& id() const noexcept { return node_->id; }

  template <class S>
  S operator()(const SystemDefinition& sys, std::span<const S> x) const {
    return eval(*node_, sys, x);
  }
  double operator()(const SystemDefinition& sys, const PhasePoint& x) const {
    auto v = x.flat();
    return (*this)(sys, std::span<const double>(v));
  }

 private:
  enum class Kind { Expression, Hamiltonian, Product };
  struct Node {
    Kind kind = Kind::Expression;
    dsl::CompiledExpr expr;
    std::shared_ptr<const Node> a, b;
    std::string id;
  };

  explicit Observable(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  template <class S>
  static S eval(const Node& node, const SystemDefinition& sys, std::span<const S> x) {
    switch (node.kind) {
      case Kind::Expression: return node.expr(x);
      case Kind::Hamiltonian: return hamiltonian_value(sys, x);
      case Kind::Product: return eval(*node.a, sys, x) * eval(*node.b, sys, x);
    }
    return S(0.0);
  }

  std::shared_ptr<const Node> node_;
};

/// Expression in (q, pi_1..pi_k): a function on D*.
class DStarObservable {
 public:
  DStarObservable(const SystemDefinition& sys, std::string_view text)
      : expr_(dsl::parse_expression(text), sys.dstar_symbols()) {}

  std::string id() const { return expr_.text(); }

  template <class S>
  S operator()(std::span<const S> y) const {
    return expr_(y);
  }

 private:
  dsl::CompiledExpr expr_;
};

// ---------------------------------------------------------------------------
// Checked public operations

inline double lagrangian(const SystemDefinition& sys, std::span<const double> q, std::span<const double> v) {
  check_dimension(sys, v.size(), "v");
  auto m = metric_at(sys, q);
  auto gv = m.G * v;
  return 0.5 * dot(std::span<const double>(gv), v) - sys.potential()(q);
}

inline double energy(const SystemDefinition& sys, std::span<const double> q, std::span<const double> v) {
  check_dimension(sys, v.size(), "v");
  auto m = metric_at(sys, q);
  auto gv = m.G * v;
  return 0.5 * dot(std::span<const double>(gv), v) + sys.potential()(q);
}

/// Fiber derivative of L: p = dL/dv = G v.
inline PhasePoint legendre(const SystemDefinition& sys, std::span<const double> q, std::span<const double> v) {
  return {{q.begin(), q.end()}, flat(sys, q, v)};
}

inline std::vector<double> legendre_inverse(const SystemDefinition& sys, std::span<const double> q,
                                            std::span<const double> p) {
  return sharp(sys, q, p);
}

inline double hamiltonian(const SystemDefinition& sys, std::span<const double> q, std::span<const double> p) {
  check_dimension(sys, p.size(), "p");
  auto m = metric_at(sys, q);
  return kinetic_from_momentum(m.Ginv, p) + sys.potential()(q);
}

inline double hamiltonian(const SystemDefinition& sys, const PhasePoint& x) { return hamiltonian(sys, x.q, x.p); }

inline DStarPoint to_dstar(const SystemDefinition& sys, const PhasePoint& x, const Settings& settings = {}) {
  require_on_manifold(sys, x, settings);
  frame_at(sys, x.q);  // validates a user frame
  return {x.q, dstar_fiber(sys, std::span<const double>(x.q), std::span<const double>(x.p))};
}

inline PhasePoint from_dstar(const SystemDefinition& sys, const DStarPoint& y) {
  check_dimension(sys, y.q.size(), "q");
  if (y.pi.size() != sys.rank())
    throw StructuralError("pi has length " + std::to_string(y.pi.size()) + ", expected k = " +
                          std::to_string(sys.rank()));
  frame_at(sys, y.q);
  return {y.q, dstar_momentum(sys, std::span<const double>(y.q), std::span<const double>(y.pi))};
}

/// h on D*: the energy of the D-velocity whose nonholonomic Legendre image is y.
inline double constrained_hamiltonian(const SystemDefinition& sys, const DStarPoint& y) {
  return hamiltonian(sys, from_dstar(sys, y));
}

}  // namespace nhb
