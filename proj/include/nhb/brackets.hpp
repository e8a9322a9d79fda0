#pragma once

/**
 * @file brackets.hpp
 * @brief Canonical, nonholonomic, Eden and D* brackets; Jacobiators; comparison reports.
 *
 * A "phase function" here is any callable with a templated
 * `S operator()(std::span<const S>) const` over the flat phase vector
 * (q, p); `bind_observable` turns an Observable into one.  All bracket
 * kernels are scalar-generic, so a bracket can itself be evaluated at a
 * dual-perturbed point and differentiated again.  That is how Jacobiators
 * are computed: the inner bracket is an ordinary phase function whose
 * value at nearby points carries the derivatives the outer bracket needs.
 *
 *   canonical   {F, G}   = dF/dq . dG/dp - dF/dp . dG/dq
 *   Eden        {f, g}_E = {f o gamma^, g o gamma^}_can on M
 *   nh (nhb)    {f, g}   = omega(P X_f~, P X_g~) on M, f~ = f o gamma^
 *   nh (nhb2)   {f, g}   = omega(X_f~, P X_g~)
 *   D*          {a, b}   = {a o i_D^*, b o i_D^*}_can at P^*(y)
 */

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nhb/errors.hpp"
#include "nhb/format.hpp"
#include "nhb/geometry.hpp"
#include "nhb/numdiff.hpp"
#include "nhb/system.hpp"

namespace nhb {

enum class BracketKind { Canonical, Eden, Nonholonomic, DStar };

inline const char* bracket_kind_name(BracketKind k) {
  switch (k) {
    case BracketKind::Canonical: return "canonical";
    case BracketKind::Eden: return "eden";
    case BracketKind::Nonholonomic: return "nh";
    case BracketKind::DStar: return "dstar";
  }
  return "?";
}

enum class NhForm {
  BothProjected,  // omega(P X_f, P X_g)
  OneProjected,   // omega(X_f, P X_g)
};

inline auto bind_observable(const SystemDefinition& sys, Observable f) {
  return [&sys, f = std::move(f)]<class S>(std::span<const S> x) -> S { return f(sys, x); };
}

inline auto bind_dstar_observable(DStarObservable a) {
  return [a = std::move(a)]<class S>(std::span<const S> y) -> S { return a(y); };
}

/// (q, p) -> f(q, gamma_q p).
template <class F>
auto gamma_extension_of(const SystemDefinition& sys, F f) {
  return [&sys, f = std::move(f)]<class S>(std::span<const S> x) -> S {
    auto y = eden_lift(sys, x);
    return f(std::span<const S>(y));
  };
}

/// Function on D* obtained from a phase function through from_dstar.
template <class F>
auto pushforward_to_dstar(const SystemDefinition& sys, F f) {
  return [&sys, f = std::move(f)]<class S>(std::span<const S> y) -> S {
    const std::size_t n = sys.dim();
    auto q = y.subspan(0, n);
    auto p = dstar_momentum(sys, q, y.subspan(n));
    std::vector<S> x(q.begin(), q.end());
    x.insert(x.end(), p.begin(), p.end());
    return f(std::span<const S>(x));
  };
}

/// Phase function (q, p) -> a(q, E(q)^T p): the pullback by i_D^*.
template <class A>
auto pullback_from_dstar(const SystemDefinition& sys, A a) {
  return [&sys, a = std::move(a)]<class S>(std::span<const S> x) -> S {
    const std::size_t n = sys.dim();
    auto q = x.subspan(0, n);
    auto pi = dstar_fiber(sys, q, x.subspan(n));
    std::vector<S> y(q.begin(), q.end());
    y.insert(y.end(), pi.begin(), pi.end());
    return a(std::span<const S>(y));
  };
}

// ---------------------------------------------------------------------------
// Scalar-generic kernels

/// X_F = Omega grad F = (dF/dp, -dF/dq).
template <class S>
std::vector<S> hamiltonian_vector(std::span<const S> grad) {
  const std::size_t n = grad.size() / 2;
  std::vector<S> x(grad.size());
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = grad[n + i];
    x[n + i] = -grad[i];
  }
  return x;
}

template <class S>
S omega_form(std::span<const S> z, std::span<const S> w) {
  const std::size_t n = z.size() / 2;
  return dot(z.subspan(0, n), w.subspan(n, n)) - dot(w.subspan(0, n), z.subspan(n, n));
}

template <class S>
S canonical_from_gradients(std::span<const S> gf, std::span<const S> gg) {
  const std::size_t n = gf.size() / 2;
  return dot(gf.subspan(0, n), gg.subspan(n, n)) - dot(gf.subspan(n, n), gg.subspan(0, n));
}

template <class F>
struct GradientOf {
  const F& f;
  template <class S>
  std::vector<S> operator()(std::span<const S> x) const {
    return gradient([&](std::span<const Dual<S>> y) { return f(y); }, x).gradient;
  }
};

template <class S, class F, class G>
S canonical_bracket_at(const F& f, const G& g, std::span<const S> x) {
  auto gf = GradientOf<F>{f}(x);
  auto gg = GradientOf<G>{g}(x);
  return canonical_from_gradients(std::span<const S>(gf), std::span<const S>(gg));
}

template <class S, class F, class G>
S eden_bracket_at(const SystemDefinition& sys, const F& f, const G& g, std::span<const S> x) {
  return canonical_bracket_at(gamma_extension_of(sys, f), gamma_extension_of(sys, g), x);
}

/// nhb with caller-chosen extensions ft, gt of the two functions on M.
template <class S, class F, class G>
S nonholonomic_bracket_extensions_at(const SystemDefinition& sys, const F& ft, const G& gt, std::span<const S> x,
                                     NhForm form) {
  auto split = symplectic_splitting(sys, x);
  auto gf = GradientOf<F>{ft}(x);
  auto gg = GradientOf<G>{gt}(x);
  auto xf = hamiltonian_vector(std::span<const S>(gf));
  auto xg = hamiltonian_vector(std::span<const S>(gg));
  auto pxg = split.P * xg;
  if (form == NhForm::OneProjected) return omega_form(std::span<const S>(xf), std::span<const S>(pxg));
  auto pxf = split.P * xf;
  return omega_form(std::span<const S>(pxf), std::span<const S>(pxg));
}

template <class S, class F, class G>
S nonholonomic_bracket_at(const SystemDefinition& sys, const F& f, const G& g, std::span<const S> x,
                          NhForm form = NhForm::BothProjected) {
  return nonholonomic_bracket_extensions_at(sys, gamma_extension_of(sys, f), gamma_extension_of(sys, g), x, form);
}

/// a, b are functions on D*, y = (q, pi).
template <class S, class A, class B>
S dstar_bracket_at(const SystemDefinition& sys, const A& a, const B& b, std::span<const S> y) {
  const std::size_t n = sys.dim();
  auto q = y.subspan(0, n);
  auto p = dstar_momentum(sys, q, y.subspan(n));
  std::vector<S> x(q.begin(), q.end());
  x.insert(x.end(), p.begin(), p.end());
  return canonical_bracket_at(pullback_from_dstar(sys, a), pullback_from_dstar(sys, b), std::span<const S>(x));
}

/// Bracket of the given kind as a function of the point.  For DStar the
/// arguments are functions on D* and the point is y = (q, pi).
template <class F, class G>
auto bracket_function(const SystemDefinition& sys, BracketKind kind, F f, G g) {
  return [&sys, kind, f = std::move(f), g = std::move(g)]<class S>(std::span<const S> x) -> S {
    switch (kind) {
      case BracketKind::Canonical: return canonical_bracket_at(f, g, x);
      case BracketKind::Eden: return eden_bracket_at(sys, f, g, x);
      case BracketKind::Nonholonomic: return nonholonomic_bracket_at(sys, f, g, x);
      case BracketKind::DStar: return dstar_bracket_at(sys, f, g, x);
    }
    return S(0.0);
  };
}

/// {f,{g,h}} + {g,{h,f}} + {h,{f,g}}, outer derivatives by differentiating
/// the inner bracket evaluation at dual-perturbed points.
template <class S, class F, class G, class H>
S jacobiator_at(const SystemDefinition& sys, BracketKind kind, const F& f, const G& g, const H& h,
                std::span<const S> x) {
  auto gh = bracket_function(sys, kind, g, h);
  auto hf = bracket_function(sys, kind, h, f);
  auto fg = bracket_function(sys, kind, f, g);
  return bracket_function(sys, kind, f, gh)(x) + bracket_function(sys, kind, g, hf)(x) +
         bracket_function(sys, kind, h, fg)(x);
}

// ---------------------------------------------------------------------------
// Checked public operations over doubles

inline double canonical_bracket(const SystemDefinition& sys, const Observable& f, const Observable& g,
                                const PhasePoint& x) {
  auto v = x.flat();
  return canonical_bracket_at(bind_observable(sys, f), bind_observable(sys, g), std::span<const double>(v));
}

/// f o gamma^ as a phase function.
inline auto gamma_extension(const SystemDefinition& sys, const Observable& f) {
  return gamma_extension_of(sys, bind_observable(sys, f));
}

struct NonholonomicValue {
  double value;       // omega(P X_f~, P X_g~)
  double value_nhb2;  // omega(X_f~, P X_g~)
};

/// Internal cross-check between the two forms, absolute on the O(1) scale.
inline constexpr double kNhFormAgreement = 1e-9;

inline NonholonomicValue nonholonomic_bracket(const SystemDefinition& sys, const Observable& f, const Observable& g,
                                              const PhasePoint& x, const Settings& settings = {}) {
  require_on_manifold(sys, x, settings);
  auto v = x.flat();
  std::span<const double> s(v);
  auto ff = bind_observable(sys, f);
  auto gg = bind_observable(sys, g);
  NonholonomicValue out{nonholonomic_bracket_at(sys, ff, gg, s, NhForm::BothProjected),
                        nonholonomic_bracket_at(sys, ff, gg, s, NhForm::OneProjected)};
  if (std::abs(out.value - out.value_nhb2) > kNhFormAgreement * std::max(1.0, std::abs(out.value)))
    throw Error("nonholonomic bracket forms disagree: " + format_double(out.value) + " vs " +
                format_double(out.value_nhb2));
  return out;
}

inline double eden_bracket(const SystemDefinition& sys, const Observable& f, const Observable& g, const PhasePoint& x,
                           const Settings& settings = {}) {
  require_on_manifold(sys, x, settings);
  auto v = x.flat();
  return eden_bracket_at(sys, bind_observable(sys, f), bind_observable(sys, g), std::span<const double>(v));
}

inline double dstar_bracket(const SystemDefinition& sys, const DStarObservable& a, const DStarObservable& b,
                            const DStarPoint& y) {
  frame_at(sys, y.q);
  auto v = y.flat();
  return dstar_bracket_at(sys, bind_dstar_observable(a), bind_dstar_observable(b), std::span<const double>(v));
}

/// Lie bracket [X, Y] = (DY) X - (DX) Y of vector fields on Q.
template <class S, class VX, class VY>
std::vector<S> lie_bracket_at(const VX& vx, const VY& vy, std::span<const S> q) {
  auto jx = jacobian([&](std::span<const Dual<S>> z) { return vx(z); }, q);
  auto jy = jacobian([&](std::span<const Dual<S>> z) { return vy(z); }, q);
  auto xv = vx(q);
  auto yv = vy(q);
  auto a = jy * xv;
  auto b = jx * yv;
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

/// g-orthogonal projection TQ -> D: E (E^T G E)^{-1} E^T G v.
template <class S>
std::vector<S> project_onto_distribution(const SystemDefinition& sys, std::span<const S> q, std::span<const S> v) {
  Matrix<S> e = frame_matrix(sys, q, constraint_matrix(sys, q));
  Matrix<S> g = metric_matrix(sys, q);
  auto gv = g * v;
  auto rhs = e.transpose() * gv;
  auto coef = Lu<S>(e.transpose() * (g * e)).solve(rhs);
  return e * coef;
}

/// Sections of D given as expression columns in q.
using Section = std::vector<dsl::CompiledExpr>;

inline Section section_from_text(const SystemDefinition& sys, const std::vector<std::string>& components) {
  check_dimension(sys, components.size(), "section");
  Section s;
  for (const auto& c : components) s.emplace_back(dsl::parse_expression(c), sys.configuration_symbols());
  return s;
}

inline auto bind_section(const Section& s) {
  return [&s]<class S>(std::span<const S> q) {
    std::vector<S> out;
    out.reserve(s.size());
    for (const auto& e : s) out.push_back(e(q));
    return out;
  };
}

/// Column `a` of the frame E(q) as a vector field on Q.
inline auto frame_field(const SystemDefinition& sys, std::size_t a) {
  return [&sys, a]<class S>(std::span<const S> q) {
    return frame_matrix(sys, q, constraint_matrix(sys, q)).col(a);
  };
}

/// ||X, Y|| = P([X, Y]) for X, Y sections of D.
template <class VX, class VY>
std::vector<double> almost_lie_bracket(const SystemDefinition& sys, const VX& vx, const VY& vy,
                                       std::span<const double> q) {
  auto c = constraints_at(sys, q);
  auto xv = vx(q);
  auto yv = vy(q);
  const double scale = std::max(1.0, max_abs(c.mu));
  if (max_abs(std::span<const double>(c.mu * xv)) > 1e-10 * scale * std::max(1.0, max_abs(std::span<const double>(xv))) ||
      max_abs(std::span<const double>(c.mu * yv)) > 1e-10 * scale * std::max(1.0, max_abs(std::span<const double>(yv))))
    throw SectionNotInD("section is not in D at q");
  auto br = lie_bracket_at(vx, vy, q);
  return project_onto_distribution(sys, q, std::span<const double>(br));
}

inline std::vector<double> almost_lie_bracket(const SystemDefinition& sys, const Section& x, const Section& y,
                                              std::span<const double> q) {
  return almost_lie_bracket(sys, bind_section(x), bind_section(y), q);
}

inline double jacobiator(const SystemDefinition& sys, BracketKind kind, const Observable& f, const Observable& g,
                         const Observable& h, const PhasePoint& x, const Settings& settings = {}) {
  auto ff = bind_observable(sys, f);
  auto gg = bind_observable(sys, g);
  auto hh = bind_observable(sys, h);
  if (kind == BracketKind::Canonical) {
    auto v = x.flat();
    return jacobiator_at(sys, kind, ff, gg, hh, std::span<const double>(v));
  }
  require_on_manifold(sys, x, settings);
  if (kind == BracketKind::DStar) {
    auto y = to_dstar(sys, x, settings).flat();
    return jacobiator_at(sys, kind, pushforward_to_dstar(sys, ff), pushforward_to_dstar(sys, gg),
                         pushforward_to_dstar(sys, hh), std::span<const double>(y));
  }
  auto v = x.flat();
  return jacobiator_at(sys, kind, ff, gg, hh, std::span<const double>(v));
}

// ---------------------------------------------------------------------------
// Comparison at one point with per-observable caching

struct BracketReport {
  PhasePoint point;
  std::string f;
  std::string g;
  double value_nh = 0.0;
  double value_nh2 = 0.0;
  double value_eden = 0.0;
  double value_dstar = 0.0;
  double max_pairwise_gap = 0.0;
};

inline double max_pairwise_gap(std::span<const double> values) {
  double gap = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j) gap = std::max(gap, std::abs(values[i] - values[j]));
  return gap;
}

/// Evaluates every bracket kind at one point of M.  The splitting and the
/// D* point are computed once; Hamiltonian vector fields of the
/// gamma-extension and of the D*-route pullback are cached per observable id.
class BracketProbe {
 public:
  BracketProbe(const SystemDefinition& sys, PhasePoint x, const Settings& settings = {})
      : sys_(sys), x_(std::move(x)) {
    require_on_manifold(sys_, x_, settings);
    flat_ = x_.flat();
    split_ = symplectic_splitting(sys_, std::span<const double>(flat_));
    y_ = to_dstar(sys_, x_, settings);
    auto back = from_dstar(sys_, y_);
    dstar_flat_ = back.flat();
  }

  const PhasePoint& point() const noexcept { return x_; }
  const Splitting<double>& splitting() const noexcept { return split_; }
  const DStarPoint& dstar_point() const noexcept { return y_; }

  /// grad (f o gamma^) at x.
  const std::vector<double>& extension_gradient(const Observable& f) { return cached(f).ext_grad; }
  /// X_{f o gamma^} at x.
  const std::vector<double>& extension_field(const Observable& f) { return cached(f).ext_field; }

  double nh(const Observable& f, const Observable& g) {
    const auto& a = cached(f);
    const auto& b = cached(g);
    return omega(std::span<const double>(a.proj_field), std::span<const double>(b.proj_field));
  }
  double nh2(const Observable& f, const Observable& g) {
    const auto& a = cached(f);
    const auto& b = cached(g);
    return omega(std::span<const double>(a.ext_field), std::span<const double>(b.proj_field));
  }
  double eden(const Observable& f, const Observable& g) {
    const auto& a = cached(f);
    const auto& b = cached(g);
    return canonical_from_gradients(std::span<const double>(a.ext_grad), std::span<const double>(b.ext_grad));
  }
  double dstar(const Observable& f, const Observable& g) {
    const auto& a = cached(f);
    const auto& b = cached(g);
    return canonical_from_gradients(std::span<const double>(a.dstar_grad), std::span<const double>(b.dstar_grad));
  }
  double canonical(const Observable& f, const Observable& g) {
    const auto& a = cached(f);
    const auto& b = cached(g);
    return canonical_from_gradients(std::span<const double>(a.raw_grad), std::span<const double>(b.raw_grad));
  }

  double value(BracketKind kind, const Observable& f, const Observable& g) {
    switch (kind) {
      case BracketKind::Canonical: return canonical(f, g);
      case BracketKind::Eden: return eden(f, g);
      case BracketKind::Nonholonomic: return nh(f, g);
      case BracketKind::DStar: return dstar(f, g);
    }
    return 0.0;
  }

  BracketReport compare(const Observable& f, const Observable& g) {
    BracketReport r{x_, f.id(), g.id(), nh(f, g), nh2(f, g), eden(f, g), dstar(f, g), 0.0};
    const std::array<double, 4> v{r.value_nh, r.value_nh2, r.value_eden, r.value_dstar};
    r.max_pairwise_gap = max_pairwise_gap(v);
    return r;
  }

 private:
  struct Entry {
    std::vector<double> raw_grad;
    std::vector<double> ext_grad;
    std::vector<double> ext_field;
    std::vector<double> proj_field;
    std::vector<double> dstar_grad;
  };

  const Entry& cached(const Observable& f) {
    auto it = cache_.find(f.id());
    if (it != cache_.end()) return it->second;
    Entry e;
    auto bound = bind_observable(sys_, f);
    std::span<const double> x(flat_);
    e.raw_grad = GradientOf<decltype(bound)>{bound}(x);
    auto ext = gamma_extension_of(sys_, bound);
    e.ext_grad = GradientOf<decltype(ext)>{ext}(x);
    e.ext_field = hamiltonian_vector(std::span<const double>(e.ext_grad));
    e.proj_field = split_.P * e.ext_field;
    auto pulled = pullback_from_dstar(sys_, pushforward_to_dstar(sys_, bound));
    e.dstar_grad = GradientOf<decltype(pulled)>{pulled}(std::span<const double>(dstar_flat_));
    return cache_.emplace(f.id(), std::move(e)).first->second;
  }

  const SystemDefinition& sys_;
  PhasePoint x_;
  std::vector<double> flat_;
  Splitting<double> split_;
  DStarPoint y_;
  std::vector<double> dstar_flat_;
  std::map<std::string, Entry> cache_;
};

inline BracketReport compare_brackets(const SystemDefinition& sys, const Observable& f, const Observable& g,
                                      const PhasePoint& x, const Settings& settings = {}) {
  BracketProbe probe(sys, x, settings);
  return probe.compare(f, g);
}

// ---------------------------------------------------------------------------
// Structure of T^D M

/// Columns form a basis of ker C, i.e. of (T^D M)_x.
inline Matrix<double> tdm_basis(const Splitting<double>& split) {
  const auto& c = split.C;
  Eigen::MatrixXd e(c.rows(), c.cols());
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeFullV);
  const auto rank = static_cast<Eigen::Index>(c.rows());
  const auto& v = svd.matrixV();
  Matrix<double> basis(c.cols(), c.cols() - c.rows());
  for (Eigen::Index j = rank; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      basis(static_cast<std::size_t>(i), static_cast<std::size_t>(j - rank)) = v(i, j);
  return basis;
}

/// Columns form a basis of {Z : mu dq = 0}, the tangent vectors whose base
/// component lies in D (not necessarily tangent to M).
inline Matrix<double> base_in_d_basis(const SystemDefinition& sys, const PhasePoint& x) {
  const std::size_t n = sys.dim();
  auto f = frame_at(sys, x.q);
  Matrix<double> basis(2 * n, sys.rank() + n);
  for (std::size_t a = 0; a < sys.rank(); ++a)
    for (std::size_t i = 0; i < n; ++i) basis(i, a) = f.E(i, a);
  for (std::size_t i = 0; i < n; ++i) basis(n + i, sys.rank() + i) = 1.0;
  return basis;
}

/// T gamma^ at x: Jacobian of (q, p) -> (q, gamma_q p).
inline Matrix<double> eden_lift_jacobian(const SystemDefinition& sys, const PhasePoint& x) {
  auto v = x.flat();
  return jacobian([&](std::span<const Dual<double>> y) { return eden_lift(sys, y); }, std::span<const double>(v));
}

/// max over the columns Z of `basis` of ||T gamma^(Z) - P(Z)||_inf.
inline double tgamma_vs_projector_gap(const Matrix<double>& tgamma, const Matrix<double>& projector,
                                      const Matrix<double>& basis) {
  Matrix<double> d = tgamma * basis - projector * basis;
  return max_abs(d);
}

}  // namespace nhb
