#pragma once

/**
 * @file dual.hpp
 * @brief Forward-mode dual numbers with a vector of partials.
 *
 * A Dual<T> carries a value and one partial derivative per independent
 * variable of the current evaluation context.  The scalar type T may itself
 * be a Dual, which gives nested (higher-order) differentiation without any
 * extra machinery: Dual<Dual<double>> differentiates code that already
 * differentiates.
 *
 * An empty partials vector marks an untracked constant.  Constants combine
 * with any width; two non-empty partials vectors of different widths are a
 * programming error and throw std::logic_error immediately.
 */

#include <cmath>
#include <concepts>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nhb/errors.hpp"

namespace nhb {

template <class T>
class Dual;

inline double value_of(double x) { return x; }

template <class T>
double value_of(const Dual<T>& x);

// Primitive set over plain doubles, with the domain checks shared by every
// scalar type (duals delegate to these through their value slot).

inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double exp(double x) { return std::exp(x); }

inline double log(double x) {
  if (!(x > 0.0)) throw DomainError("log", "argument " + std::to_string(x) + " is not positive");
  return std::log(x);
}

inline double sqrt(double x) {
  if (x < 0.0) throw DomainError("sqrt", "argument " + std::to_string(x) + " is negative");
  return std::sqrt(x);
}

inline bool is_integer_valued(double x) { return std::isfinite(x) && std::floor(x) == x; }

inline double pow(double base, double exponent) {
  if (base < 0.0 && !is_integer_valued(exponent)) {
    throw DomainError("^", "negative base " + std::to_string(base) + " with non-integer exponent " +
                               std::to_string(exponent));
  }
  if (base == 0.0 && exponent < 0.0) throw DomainError("^", "zero base with negative exponent");
  return std::pow(base, exponent);
}

/// Checked division used by expression evaluation.
inline double divide(double a, double b) {
  if (b == 0.0) throw DomainError("/", "division by zero");
  return a / b;
}

template <class T>
class Dual {
 public:
  using value_type = T;

  Dual() : val_(0.0) {}
  Dual(double c) : val_(c) {}  // NOLINT(google-explicit-constructor): constants lift implicitly
  explicit Dual(T v)
    requires(!std::same_as<T, double>)
      : val_(std::move(v)) {}
  Dual(T v, std::vector<T> partials) : val_(std::move(v)), d_(std::move(partials)) {}

  const T& value() const noexcept { return val_; }
  std::span<const T> partials() const noexcept { return d_; }
  std::size_t width() const noexcept { return d_.size(); }
  bool is_constant() const noexcept { return d_.empty(); }

  /// i-th partial; constants report zero for every slot.
  T partial(std::size_t i) const { return i < d_.size() ? d_[i] : T(0.0); }

  friend Dual operator+(const Dual& a, const Dual& b) {
    return {a.val_ + b.val_, combine(a.d_, T(1.0), b.d_, T(1.0))};
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    return {a.val_ - b.val_, combine(a.d_, T(1.0), b.d_, T(-1.0))};
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.val_ * b.val_, combine(a.d_, b.val_, b.d_, a.val_)};
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    T inv = T(1.0) / b.val_;
    T v = a.val_ * inv;
    return {v, combine(a.d_, inv, b.d_, T(0.0) - v * inv)};
  }
  friend Dual operator-(const Dual& a) { return {T(0.0) - a.val_, scaled(a.d_, T(-1.0))}; }

  Dual& operator+=(const Dual& o) { return *this = *this + o; }
  Dual& operator-=(const Dual& o) { return *this = *this - o; }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual sin(const Dual& a) { return chain(a, sin(a.val_), cos(a.val_)); }
  friend Dual cos(const Dual& a) { return chain(a, cos(a.val_), T(0.0) - sin(a.val_)); }
  friend Dual tan(const Dual& a) {
    T t = tan(a.val_);
    return chain(a, t, T(1.0) + t * t);
  }
  friend Dual exp(const Dual& a) {
    T e = exp(a.val_);
    return chain(a, e, e);
  }
  friend Dual log(const Dual& a) { return chain(a, log(a.val_), T(1.0) / a.val_); }
  friend Dual sqrt(const Dual& a) {
    T s = sqrt(a.val_);
    if (!a.d_.empty() && value_of(a.val_) == 0.0) {
      throw DomainError("sqrt", "derivative undefined at zero");
    }
    return chain(a, s, a.d_.empty() ? T(0.0) : T(0.5) / s);
  }
  friend Dual pow(const Dual& a, const Dual& b) {
    T v = pow(a.val_, b.val_);
    std::vector<T> d;
    if (!a.d_.empty()) d = scaled(a.d_, b.val_ * pow(a.val_, b.val_ - T(1.0)));
    if (!b.d_.empty()) d = combine(d, T(1.0), b.d_, v * log(a.val_));
    return {v, std::move(d)};
  }
  friend Dual divide(const Dual& a, const Dual& b) {
    if (value_of(b) == 0.0) throw DomainError("/", "division by zero");
    return a / b;
  }

 private:
  static std::vector<T> scaled(const std::vector<T>& x, const T& c) {
    std::vector<T> out;
    out.reserve(x.size());
    for (const auto& xi : x) out.push_back(xi * c);
    return out;
  }

  // cx*x + cy*y, where an empty vector stands for all zeros of any width.
  static std::vector<T> combine(const std::vector<T>& x, const T& cx, const std::vector<T>& y,
                                const T& cy) {
    if (x.empty()) return scaled(y, cy);
    if (y.empty()) return scaled(x, cx);
    if (x.size() != y.size()) {
      throw std::logic_error("dual partials width mismatch: " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    }
    std::vector<T> out;
    out.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back(x[i] * cx + y[i] * cy);
    return out;
  }

  static Dual chain(const Dual& a, T value, const T& derivative) {
    return {std::move(value), scaled(a.d_, derivative)};
  }

  T val_;
  std::vector<T> d_;
};

template <class T>
double value_of(const Dual<T>& x) {
  return value_of(x.value());
}

/// Nesting depth: 0 for double, 1 for Dual<double>, ...
template <class S>
inline constexpr int dual_depth = 0;
template <class T>
inline constexpr int dual_depth<Dual<T>> = 1 + dual_depth<T>;

}  // namespace nhb
