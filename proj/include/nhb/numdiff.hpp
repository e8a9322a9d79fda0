#pragma once

// Seeding and extraction helpers on top of Dual: lift, gradient, jacobian.
// All of them are generic in the scalar type of the evaluation point, so
// a gradient can be taken at a point whose coordinates are themselves duals.

#include <span>
#include <utility>
#include <vector>

#include "nhb/dual.hpp"
#include "nhb/linalg.hpp"

namespace nhb {

/// One dual per input, seeded with the unit partials vector of its slot.
template <class S>
std::vector<Dual<S>> lift(std::span<const S> values) {
  const std::size_t w = values.size();
  std::vector<Dual<S>> out;
  out.reserve(w);
  for (std::size_t i = 0; i < w; ++i) {
    std::vector<S> e(w, S(0.0));
    e[i] = S(1.0);
    out.emplace_back(values[i], std::move(e));
  }
  return out;
}

inline std::vector<Dual<double>> lift(const std::vector<double>& values) {
  return lift(std::span<const double>(values));
}

/// Partials of `d` padded to width `w` (constants give zeros).
template <class S>
std::vector<S> partials_of(const Dual<S>& d, std::size_t w) {
  std::vector<S> out(w, S(0.0));
  if (d.is_constant()) return out;
  if (d.width() != w) throw std::logic_error("dual partials width does not match the context width");
  for (std::size_t i = 0; i < w; ++i) out[i] = d.partials()[i];
  return out;
}

template <class S>
struct ValueAndGradient {
  S value;
  std::vector<S> gradient;
};

/// Value and gradient of the scalar map `f` at `x`.
/// `f` must accept std::span<const Dual<S>> and return Dual<S>.
template <class S, class F>
ValueAndGradient<S> gradient(F&& f, std::span<const S> x) {
  const auto seeded = lift(x);
  Dual<S> r = f(std::span<const Dual<S>>(seeded));
  return {r.value(), partials_of(r, x.size())};
}

template <class F>
ValueAndGradient<double> gradient(F&& f, const std::vector<double>& x) {
  return gradient(std::forward<F>(f), std::span<const double>(x));
}

/// Jacobian of the vector map `f` at `x`; row i is the gradient of component i.
template <class S, class F>
Matrix<S> jacobian(F&& f, std::span<const S> x) {
  const auto seeded = lift(x);
  std::vector<Dual<S>> r = f(std::span<const Dual<S>>(seeded));
  Matrix<S> j(r.size(), x.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto g = partials_of(r[i], x.size());
    for (std::size_t k = 0; k < x.size(); ++k) j(i, k) = g[k];
  }
  return j;
}

template <class F>
Matrix<double> jacobian(F&& f, const std::vector<double>& x) {
  return jacobian(std::forward<F>(f), std::span<const double>(x));
}

}  // namespace nhb
