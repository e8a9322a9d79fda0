#pragma once

/* Recursive-descent parser for scalar expressions.
 *
 *   expr  := term  (("+" | "-") term)*
 *   term  := unary (("*" | "/") unary)*
 *   unary := "-" unary | power
 *   power := atom ("^" unary)?                 right-associative
 *   atom  := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
 *
 * "^" binds tighter than unary minus, so "-q1^2" is -(q1^2) and "2^-1" is
 * legal.  Multiplication is always explicit.  Every failure is a
 * SyntaxError carrying the byte offset and the set of expected tokens, or
 * UnknownFunction for a call to a name outside the closed function set.
 */

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>

#include "nhb/dsl/expr.hpp"
#include "nhb/errors.hpp"

namespace nhb::dsl {

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprPtr parse() {
    ExprPtr e = expr();
    skip_space();
    if (pos_ != text_.size()) fail("operator or end of input");
    return e;
  }

 private:
  static constexpr int kMaxDepth = 200;
  static constexpr const char* kOperand = "number, identifier, '(' or '-'";

  [[noreturn]] void fail(const std::string& expected) const {
    std::string found = pos_ >= text_.size() ? "end of input" : "'" + std::string(1, text_[pos_]) + "'";
    throw SyntaxError(pos_, expected, found);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) p_.fail("shallower nesting (limit " + std::to_string(kMaxDepth) + ")");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  ExprPtr expr() {
    DepthGuard guard(*this);
    ExprPtr lhs = term();
    for (;;) {
      skip_space();
      std::size_t at = pos_;
      if (accept('+')) {
        lhs = Expr::make_binary(Expr::Kind::Add, lhs, term(), at);
      } else if (accept('-')) {
        lhs = Expr::make_binary(Expr::Kind::Sub, lhs, term(), at);
      } else {
        return lhs;
      }
    }
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    for (;;) {
      skip_space();
      std::size_t at = pos_;
      if (accept('*')) {
        lhs = Expr::make_binary(Expr::Kind::Mul, lhs, unary(), at);
      } else if (accept('/')) {
        lhs = Expr::make_binary(Expr::Kind::Div, lhs, unary(), at);
      } else {
        return lhs;
      }
    }
  }

  ExprPtr unary() {
    DepthGuard guard(*this);
    skip_space();
    std::size_t at = pos_;
    if (accept('-')) return Expr::make_unary(Expr::Kind::Negate, unary(), at);
    return power();
  }

  ExprPtr power() {
    ExprPtr base = atom();
    skip_space();
    std::size_t at = pos_;
    if (accept('^')) return Expr::make_binary(Expr::Kind::Pow, base, unary(), at);
    return base;
  }

  ExprPtr atom() {
    skip_space();
    if (pos_ >= text_.size()) fail(kOperand);
    const std::size_t at = pos_;
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::string name = identifier();
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        auto f = function_from_name(name);
        if (!f) throw UnknownFunction("unknown function '" + name + "' at offset " + std::to_string(at));
        ++pos_;
        ExprPtr arg = expr();
        if (!accept(')')) fail("')'");
        return Expr::make_call(*f, arg, at);
      }
      return Expr::make_identifier(std::move(name), at);
    }
    if (accept('(')) {
      ExprPtr inner = expr();
      if (!accept(')')) fail("')'");
      return inner;
    }
    fail(kOperand);
  }

  ExprPtr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      if (digits() == 0) fail("digit after '.'");
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("exponent digits");
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc{} || ptr != text_.data() + pos_) {
      pos_ = start;
      fail("representable number");
    }
    return Expr::make_number(v, start);
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace detail

inline ExprPtr parse_expression(std::string_view text) { return detail::Parser(text).parse(); }

/// True for letter (letter | digit | "_")*.
inline bool is_identifier(std::string_view s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

}  // namespace nhb::dsl
