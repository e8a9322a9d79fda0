#pragma once

/**
 * @file expr.hpp
 * @brief Immutable scalar expression trees and their compiled form.
 *
 * Trees come out of parse_expression() and are never mutated.  For repeated
 * evaluation an expression is compiled against a SymbolTable into a flat
 * postfix program; identifiers become either slot indices into the
 * evaluation vector or folded parameter constants.  The same program runs
 * over double and over every Dual type.
 */

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nhb/dual.hpp"
#include "nhb/errors.hpp"
#include "nhb/format.hpp"

namespace nhb::dsl {

enum class Function { Sin, Cos, Tan, Exp, Log, Sqrt };

inline std::optional<Function> function_from_name(std::string_view name) {
  if (name == "sin") return Function::Sin;
  if (name == "cos") return Function::Cos;
  if (name == "tan") return Function::Tan;
  if (name == "exp") return Function::Exp;
  if (name == "log") return Function::Log;
  if (name == "sqrt") return Function::Sqrt;
  return std::nullopt;
}

inline const char* function_name(Function f) {
  switch (f) {
    case Function::Sin: return "sin";
    case Function::Cos: return "cos";
    case Function::Tan: return "tan";
    case Function::Exp: return "exp";
    case Function::Log: return "log";
    case Function::Sqrt: return "sqrt";
  }
  return "?";
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Number, Identifier, Negate, Add, Sub, Mul, Div, Pow, Call };

  Kind kind = Kind::Number;
  double number = 0.0;
  std::string name;
  Function function = Function::Sin;
  ExprPtr lhs;  // operand for Negate and Call
  ExprPtr rhs;
  std::size_t offset = 0;

  static ExprPtr make_number(double v, std::size_t at = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Number;
    e->number = v;
    e->offset = at;
    return e;
  }
  static ExprPtr make_identifier(std::string n, std::size_t at = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Identifier;
    e->name = std::move(n);
    e->offset = at;
    return e;
  }
  static ExprPtr make_unary(Kind k, ExprPtr operand, std::size_t at = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->lhs = std::move(operand);
    e->offset = at;
    return e;
  }
  static ExprPtr make_call(Function f, ExprPtr arg, std::size_t at = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Call;
    e->function = f;
    e->lhs = std::move(arg);
    e->offset = at;
    return e;
  }
  static ExprPtr make_binary(Kind k, ExprPtr l, ExprPtr r, std::size_t at = 0) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    e->offset = at;
    return e;
  }
};

/// Structural equality (offsets ignored).
inline bool same_tree(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Number: return a.number == b.number;
    case Expr::Kind::Identifier: return a.name == b.name;
    case Expr::Kind::Negate: return same_tree(*a.lhs, *b.lhs);
    case Expr::Kind::Call: return a.function == b.function && same_tree(*a.lhs, *b.lhs);
    default: return same_tree(*a.lhs, *b.lhs) && same_tree(*a.rhs, *b.rhs);
  }
}

namespace detail {

// Binding strength of the production that prints each node.
inline int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Add:
    case Expr::Kind::Sub: return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::Div: return 2;
    case Expr::Kind::Negate: return 3;
    case Expr::Kind::Pow: return 4;
    default: return 5;
  }
}

inline void print(const Expr& e, std::string& out);

inline void print_at_least(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out += '(';
    print(e, out);
    out += ')';
  } else {
    print(e, out);
  }
}

inline void print(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::Number: out += format_double(e.number); return;
    case Expr::Kind::Identifier: out += e.name; return;
    case Expr::Kind::Negate:
      out += '-';
      print_at_least(*e.lhs, 3, out);
      return;
    case Expr::Kind::Call:
      out += function_name(e.function);
      out += '(';
      print(*e.lhs, out);
      out += ')';
      return;
    case Expr::Kind::Pow:
      print_at_least(*e.lhs, 5, out);
      out += '^';
      print_at_least(*e.rhs, 3, out);
      return;
    default: break;
  }
  const int p = precedence(e);
  const char* op = e.kind == Expr::Kind::Add   ? " + "
                   : e.kind == Expr::Kind::Sub ? " - "
                   : e.kind == Expr::Kind::Mul ? "*"
                                               : "/";
  print_at_least(*e.lhs, p, out);
  out += op;
  print_at_least(*e.rhs, p + 1, out);
}

inline void collect_identifiers(const Expr& e, std::set<std::string>& out) {
  if (e.kind == Expr::Kind::Identifier) out.insert(e.name);
  if (e.lhs) collect_identifiers(*e.lhs, out);
  if (e.rhs) collect_identifiers(*e.rhs, out);
}

}  // namespace detail

/// Minimal-parenthesis text that reparses to a structurally identical tree.
inline std::string to_string(const Expr& e) {
  std::string s;
  detail::print(e, s);
  return s;
}

inline std::set<std::string> identifiers(const Expr& e) {
  std::set<std::string> s;
  detail::collect_identifiers(e, s);
  return s;
}

template <class S>
S apply_function(Function f, const S& x) {
  switch (f) {
    case Function::Sin: return sin(x);
    case Function::Cos: return cos(x);
    case Function::Tan: return tan(x);
    case Function::Exp: return exp(x);
    case Function::Log: return log(x);
    case Function::Sqrt: return sqrt(x);
  }
  return x;
}

/// Tree-walking evaluation against a name binding.
template <class S>
S evaluate(const Expr& e, const std::map<std::string, S>& env) {
  switch (e.kind) {
    case Expr::Kind::Number: return S(e.number);
    case Expr::Kind::Identifier: {
      auto it = env.find(e.name);
      if (it == env.end()) throw UnboundIdentifier("unbound identifier '" + e.name + "'");
      return it->second;
    }
    case Expr::Kind::Negate: return -evaluate(*e.lhs, env);
    case Expr::Kind::Call: return apply_function(e.function, evaluate(*e.lhs, env));
    case Expr::Kind::Add: return evaluate(*e.lhs, env) + evaluate(*e.rhs, env);
    case Expr::Kind::Sub: return evaluate(*e.lhs, env) - evaluate(*e.rhs, env);
    case Expr::Kind::Mul: return evaluate(*e.lhs, env) * evaluate(*e.rhs, env);
    case Expr::Kind::Div: return divide(evaluate(*e.lhs, env), evaluate(*e.rhs, env));
    case Expr::Kind::Pow: return pow(evaluate(*e.lhs, env), evaluate(*e.rhs, env));
  }
  return S(0.0);
}

/// Names an expression may reference: slot variables and folded constants.
class SymbolTable {
 public:
  void add_slot(const std::string& name) { slots_.emplace(name, slots_.size()); }
  void add_constant(const std::string& name, double value) { constants_[name] = value; }

  bool contains(const std::string& name) const {
    return slots_.count(name) != 0 || constants_.count(name) != 0;
  }
  std::optional<std::size_t> slot(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<double> constant(const std::string& name) const {
    auto it = constants_.find(name);
    if (it == constants_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t slot_count() const noexcept { return slots_.size(); }

 private:
  std::map<std::string, std::size_t> slots_;
  std::map<std::string, double> constants_;
};

/// Postfix program for one expression; evaluation is a small stack machine.
class CompiledExpr {
 public:
  CompiledExpr() = default;

  CompiledExpr(ExprPtr tree, const SymbolTable& table) : tree_(std::move(tree)), width_(table.slot_count()) {
    emit(*tree_, table);
  }

  const Expr& tree() const { return *tree_; }
  const ExprPtr& tree_ptr() const { return tree_; }
  std::string text() const { return tree_ ? to_string(*tree_) : std::string(); }

  /// `slots` must hold one value per slot of the table the program was compiled against.
  template <class S>
  S operator()(std::span<const S> slots) const {
    if (slots.size() < width_) throw std::logic_error("too few slot values for compiled expression");
    std::vector<S> stack;
    stack.reserve(8);
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::Constant: stack.emplace_back(ins.constant); break;
        case Op::Slot: stack.push_back(slots[ins.index]); break;
        case Op::Negate: stack.back() = -stack.back(); break;
        case Op::Call: stack.back() = apply_function(ins.function, stack.back()); break;
        default: {
          S b = std::move(stack.back());
          stack.pop_back();
          S& a = stack.back();
          switch (ins.op) {
            case Op::Add: a = a + b; break;
            case Op::Sub: a = a - b; break;
            case Op::Mul: a = a * b; break;
            case Op::Div: a = divide(a, b); break;
            case Op::Pow: a = pow(a, b); break;
            default: break;
          }
        }
      }
    }
    return std::move(stack.back());
  }

  template <class S>
  S operator()(const std::vector<S>& slots) const {
    return (*this)(std::span<const S>(slots));
  }

 private:
  enum class Op { Constant, Slot, Negate, Call, Add, Sub, Mul, Div, Pow };
  struct Instruction {
    Op op;
    double constant = 0.0;
    std::size_t index = 0;
    Function function = Function::Sin;
  };

  void emit(const Expr& e, const SymbolTable& table) {
    switch (e.kind) {
      case Expr::Kind::Number: code_.push_back({Op::Constant, e.number}); return;
      case Expr::Kind::Identifier: {
        if (auto s = table.slot(e.name)) {
          code_.push_back({Op::Slot, 0.0, *s});
        } else if (auto c = table.constant(e.name)) {
          code_.push_back({Op::Constant, *c});
        } else {
          throw UnknownIdentifier("unknown identifier '" + e.name + "' at offset " + std::to_string(e.offset));
        }
        return;
      }
      case Expr::Kind::Negate:
        emit(*e.lhs, table);
        code_.push_back({Op::Negate});
        return;
      case Expr::Kind::Call:
        emit(*e.lhs, table);
        code_.push_back({Op::Call, 0.0, 0, e.function});
        return;
      default: break;
    }
    emit(*e.lhs, table);
    emit(*e.rhs, table);
    Op op = e.kind == Expr::Kind::Add   ? Op::Add
            : e.kind == Expr::Kind::Sub ? Op::Sub
            : e.kind == Expr::Kind::Mul ? Op::Mul
            : e.kind == Expr::Kind::Div ? Op::Div
                                        : Op::Pow;
    code_.push_back({op});
  }

  ExprPtr tree_;
  std::size_t width_ = 0;
  std::vector<Instruction> code_;
};

}  // namespace nhb::dsl
