#pragma once

/**
 * @file geometry.hpp
 * @brief Pointwise metric algebra and the two projectors.
 *
 * Everything is evaluated at one point of Q (or of T*Q) in the system's
 * single chart.  The scalar-generic functions (metric_matrix, point_kernel,
 * frame_matrix, symplectic_splitting) run over double and over duals, which
 * is how derivatives of the projectors with respect to the base point are
 * obtained; the plain-double functions below them are the checked public
 * surface.
 *
 * Conventions (phase vector x = (q, p), length 2n):
 *   - c(q, p) = mu(q) G(q)^{-1} p; M = {c = 0}.
 *   - gamma_q(p) = p - mu^T A^{-1} mu G^{-1} p with A = mu G^{-1} mu^T:
 *     the G^{-1}-orthogonal projection of T*_qQ onto M_q along D°_q.
 *   - omega(Z, W) = Z_q . W_p - W_q . Z_p, matrix Omega = [[0, I], [-I, 0]],
 *     Hamiltonian vector field X_F = Omega grad F.
 *   - C stacks the differentials of c and the rows (mu, 0); ker C = T^D M.
 *     Q = Omega^{-1} C^T (C Omega^{-1} C^T)^{-1} C and P = I - Q.
 */

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nhb/errors.hpp"
#include "nhb/linalg.hpp"
#include "nhb/numdiff.hpp"
#include "nhb/system_definition.hpp"

namespace nhb {

/// Distance from M (max |c^alpha|) accepted by every operation that takes a point on M.
inline constexpr double kDefaultOnManifoldTolerance = 1e-8;

struct Settings {
  double on_manifold_tolerance = kDefaultOnManifoldTolerance;
};

// ---------------------------------------------------------------------------
// Scalar-generic kernels

template <class S>
Matrix<S> metric_matrix(const SystemDefinition& sys, std::span<const S> q) {
  const std::size_t n = sys.dim();
  Matrix<S> g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      g(i, j) = sys.metric()[i][j](q);
      if (j != i) g(j, i) = g(i, j);
    }
  return g;
}

template <class S>
Matrix<S> constraint_matrix(const SystemDefinition& sys, std::span<const S> q) {
  const std::size_t r = sys.constraint_count(), n = sys.dim();
  Matrix<S> mu(r, n);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t j = 0; j < n; ++j) mu(a, j) = sys.constraints()[a][j](q);
  return mu;
}

/// Everything about the constraints at one base point that gamma, the
/// multipliers and the D*-identification share.  Computed once per point.
template <class S>
struct PointKernel {
  Matrix<S> G;
  Matrix<S> Ginv;
  Matrix<S> mu;
  Matrix<S> mu_ginv;  // mu G^{-1}
  Matrix<S> gram;     // A = mu G^{-1} mu^T
  Lu<S> gram_lu;

  std::vector<S> residual(std::span<const S> p) const { return mu_ginv * p; }

  std::vector<S> eden(std::span<const S> p) const {
    auto lam = gram_lu.solve(mu_ginv * p);
    std::vector<S> out(p.begin(), p.end());
    for (std::size_t a = 0; a < mu.rows(); ++a)
      for (std::size_t j = 0; j < mu.cols(); ++j) out[j] -= mu(a, j) * lam[a];
    return out;
  }
};

template <class S>
PointKernel<S> point_kernel(const SystemDefinition& sys, std::span<const S> q) {
  Matrix<S> g = metric_matrix(sys, q);
  Lu<S> glu(g);
  if (glu.singular()) throw NotSPD("metric is singular at q");
  Matrix<S> ginv = glu.inverse();
  Matrix<S> mu = constraint_matrix(sys, q);
  Matrix<S> mg = mu * ginv;
  Matrix<S> gram = mg * mu.transpose();
  Lu<S> lu(gram);
  if (lu.singular()) throw RankDeficient("constraint Gram matrix is singular at q");
  return {std::move(g), std::move(ginv), std::move(mu), std::move(mg), std::move(gram), std::move(lu)};
}

template <class S>
std::span<const S> config_part(std::span<const S> x, std::size_t n) {
  return x.subspan(0, n);
}
template <class S>
std::span<const S> momentum_part(std::span<const S> x, std::size_t n) {
  return x.subspan(n, n);
}

/// gamma-hat(q, p) = (q, gamma_q p) as a flat phase vector.
template <class S>
std::vector<S> eden_lift(const SystemDefinition& sys, std::span<const S> x) {
  const std::size_t n = sys.dim();
  auto k = point_kernel(sys, config_part(x, n));
  auto gp = k.eden(momentum_part(x, n));
  std::vector<S> out(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  out.insert(out.end(), gp.begin(), gp.end());
  return out;
}

template <class S>
std::vector<S> constraint_residual(const SystemDefinition& sys, std::span<const S> x) {
  const std::size_t n = sys.dim();
  return point_kernel(sys, config_part(x, n)).residual(momentum_part(x, n));
}

// ---------------------------------------------------------------------------
// Frames of D

/// Column selection of the default frame.  Complete-pivoting elimination of
/// mu; at each step the largest |entry| wins, ties going to the lowest
/// column index and then the lowest row index.  A tie against a column that
/// does not end up as a pivot means an arbitrarily small move of q can flip
/// the selection, i.e. the default frame is discontinuous there.
struct FramePivots {
  std::vector<std::size_t> pivot_columns;
  std::vector<std::size_t> free_columns;
  bool tie = false;
};

inline FramePivots select_frame_pivots(Matrix<double> mu) {
  const std::size_t r = mu.rows(), n = mu.cols();
  std::vector<bool> row_used(r, false), col_used(n, false);
  std::vector<std::size_t> tied;
  FramePivots out;
  for (std::size_t step = 0; step < r; ++step) {
    double best = 0.0;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (!row_used[i] && !col_used[j]) best = std::max(best, std::abs(mu(i, j)));
    if (best == 0.0) throw RankDeficient("constraint rows are dependent (zero pivot in frame elimination)");
    const double cut = best * (1.0 - 1e-12);
    std::size_t pi = r, pj = n;
    for (std::size_t j = 0; j < n && pj == n; ++j)
      for (std::size_t i = 0; i < r; ++i)
        if (!row_used[i] && !col_used[j] && std::abs(mu(i, j)) >= cut) {
          pi = i;
          pj = j;
          break;
        }
    for (std::size_t j = pj + 1; j < n; ++j)
      for (std::size_t i = 0; i < r; ++i)
        if (!row_used[i] && !col_used[j] && std::abs(mu(i, j)) >= cut) tied.push_back(j);
    row_used[pi] = true;
    col_used[pj] = true;
    out.pivot_columns.push_back(pj);
    for (std::size_t i = 0; i < r; ++i) {
      if (row_used[i]) continue;
      const double f = mu(i, pj) / mu(pi, pj);
      for (std::size_t j = 0; j < n; ++j) mu(i, j) -= f * mu(pi, j);
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    if (!col_used[j]) out.free_columns.push_back(j);
  for (auto j : tied)
    if (!col_used[j]) out.tie = true;
  return out;
}

/// n x k matrix whose columns span D_q.  With a user frame the expressions
/// are evaluated; otherwise the free coordinate vectors are projected
/// Euclidean-orthogonally onto ker mu, E_a = (I - mu^T (mu mu^T)^{-1} mu) e_{free[a]}.
template <class S>
Matrix<S> frame_matrix(const SystemDefinition& sys, std::span<const S> q, const Matrix<S>& mu) {
  const std::size_t n = sys.dim(), k = sys.rank();
  Matrix<S> e(n, k);
  if (sys.frame()) {
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t i = 0; i < n; ++i) e(i, a) = (*sys.frame())[a][i](q);
    return e;
  }
  const auto piv = select_frame_pivots(values_of(mu));
  const Matrix<S> mut = mu.transpose();
  Lu<S> mm(mu * mut);
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t j = piv.free_columns[a];
    auto coef = mm.solve(mu.col(j));
    for (std::size_t i = 0; i < n; ++i) {
      S v = i == j ? S(1.0) : S(0.0);
      for (std::size_t b = 0; b < mu.rows(); ++b) v -= mut(i, b) * coef[b];
      e(i, a) = v;
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Symplectic splitting along M

template <class S>
struct Splitting {
  Matrix<S> C;  // 2(n-k) x 2n
  Matrix<S> P;  // projector onto T^D M
  Matrix<S> Q;  // I - P
  double min_relative_pivot = 1.0;
};

/// Omega^{-1} v for v = (a, b): (-b, a).
template <class S>
std::vector<S> omega_inverse_apply(std::span<const S> v) {
  const std::size_t n = v.size() / 2;
  std::vector<S> out(v.size());
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = -v[n + i];
    out[n + i] = v[i];
  }
  return out;
}

template <class S>
Splitting<S> symplectic_splitting(const SystemDefinition& sys, std::span<const S> x) {
  const std::size_t n = sys.dim(), r = sys.constraint_count();
  Matrix<S> dc = jacobian(
      [&](std::span<const Dual<S>> y) { return constraint_residual(sys, y); }, x);
  Matrix<S> mu = constraint_matrix(sys, config_part(x, n));
  Matrix<S> c(2 * r, 2 * n);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t j = 0; j < 2 * n; ++j) c(a, j) = dc(a, j);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t j = 0; j < n; ++j) c(r + a, j) = mu(a, j);

  // W = Omega^{-1} C^T, columns are Omega^{-1} of the rows of C.
  Matrix<S> w(2 * n, 2 * r);
  for (std::size_t a = 0; a < 2 * r; ++a) {
    auto row = c.row(a);
    auto col = omega_inverse_apply(std::span<const S>(row));
    for (std::size_t i = 0; i < 2 * n; ++i) w(i, a) = col[i];
  }
  Lu<S> k(c * w);
  const double piv = k.min_relative_pivot();
  if (k.singular() || piv < 1e-12) {
    throw SplittingDegenerate("C Omega^-1 C^T is singular (relative pivot " + std::to_string(piv) +
                              "): T^D M is not symplectic at this point");
  }
  Matrix<S> q = w * k.solve(c);
  Matrix<S> p = Matrix<S>::identity(2 * n) - q;
  return {std::move(c), std::move(p), std::move(q), piv};
}

// ---------------------------------------------------------------------------
// Checked public surface over doubles

struct MetricAtPoint {
  Matrix<double> G;
  Matrix<double> Ginv;
};

struct ConstraintsAtPoint {
  Matrix<double> mu;
  Matrix<double> gram;
};

struct FrameAtPoint {
  Matrix<double> E;
  bool user_supplied = false;
  /// Default frame only: a pivot tie makes the frame discontinuous at q.
  bool pivot_tie = false;
  std::vector<std::size_t> free_columns;
};

enum class FramePolicy {
  Report,  // record pivot ties in FrameAtPoint::pivot_tie
  Strict,  // throw FrameDegenerate on a pivot tie
};

inline void check_dimension(const SystemDefinition& sys, std::size_t got, const char* what) {
  if (got != sys.dim())
    throw StructuralError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                          std::to_string(sys.dim()));
}

inline MetricAtPoint metric_at(const SystemDefinition& sys, std::span<const double> q) {
  check_dimension(sys, q.size(), "q");
  Matrix<double> g = metric_matrix(sys, q);
  if (!is_positive_definite(g)) throw NotSPD("metric is not positive definite at q");
  return {g, Lu<double>(g).inverse()};
}

inline std::vector<double> flat(const SystemDefinition& sys, std::span<const double> q, std::span<const double> v) {
  check_dimension(sys, v.size(), "v");
  return metric_at(sys, q).G * v;
}

inline std::vector<double> sharp(const SystemDefinition& sys, std::span<const double> q, std::span<const double> p) {
  check_dimension(sys, p.size(), "p");
  return metric_at(sys, q).Ginv * p;
}

inline std::size_t numerical_rank(const Matrix<double>& m, double relative_tolerance) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > relative_tolerance * s(0)) ++rank;
  return rank;
}

inline ConstraintsAtPoint constraints_at(const SystemDefinition& sys, std::span<const double> q) {
  check_dimension(sys, q.size(), "q");
  Matrix<double> mu = constraint_matrix(sys, q);
  if (numerical_rank(mu, 1e-10) != sys.constraint_count())
    throw RankDeficient("constraint one-forms are linearly dependent at q");
  auto m = metric_at(sys, q);
  Matrix<double> gram = mu * m.Ginv * mu.transpose();
  return {std::move(mu), std::move(gram)};
}

inline std::vector<double> velocity_constraint(const SystemDefinition& sys, std::span<const double> q,
                                               std::span<const double> p) {
  check_dimension(sys, p.size(), "p");
  auto m = metric_at(sys, q);
  auto c = constraints_at(sys, q);
  return (c.mu * m.Ginv) * p;
}

inline std::vector<double> velocity_constraint(const SystemDefinition& sys, const PhasePoint& x) {
  return velocity_constraint(sys, x.q, x.p);
}

inline std::vector<double> eden_project(const SystemDefinition& sys, std::span<const double> q,
                                        std::span<const double> p) {
  check_dimension(sys, p.size(), "p");
  constraints_at(sys, q);  // rank and SPD checks
  return point_kernel(sys, q).eden(p);
}

inline FrameAtPoint frame_at(const SystemDefinition& sys, std::span<const double> q,
                             FramePolicy policy = FramePolicy::Report) {
  auto c = constraints_at(sys, q);
  FrameAtPoint f;
  f.E = frame_matrix(sys, q, c.mu);
  f.user_supplied = sys.frame().has_value();
  if (f.user_supplied) {
    Matrix<double> me = c.mu * f.E;
    const double scale = std::max(1.0, max_abs(c.mu) * max_abs(f.E));
    if (max_abs(me) > 1e-10 * scale)
      throw FrameInvalid("frame column not in D: max |mu E| = " + std::to_string(max_abs(me)));
    Matrix<double> ete = f.E.transpose() * f.E;
    if (!is_positive_definite(ete) || Lu<double>(ete).min_relative_pivot() < 1e-12)
      throw FrameInvalid("frame columns are linearly dependent");
  } else {
    auto piv = select_frame_pivots(c.mu);
    f.pivot_tie = piv.tie;
    f.free_columns = piv.free_columns;
    if (piv.tie && policy == FramePolicy::Strict)
      throw FrameDegenerate("pivot tie in the default frame construction: frame is discontinuous at q");
  }
  return f;
}

inline double on_manifold_distance(const SystemDefinition& sys, const PhasePoint& x) {
  return max_abs(velocity_constraint(sys, x));
}

inline void require_on_manifold(const SystemDefinition& sys, const PhasePoint& x, const Settings& settings) {
  const double d = on_manifold_distance(sys, x);
  if (!(d <= settings.on_manifold_tolerance))
    throw NotOnM("point is off M: max |c| = " + std::to_string(d) + " > " +
                 std::to_string(settings.on_manifold_tolerance));
}

inline Splitting<double> splitting_at(const SystemDefinition& sys, const PhasePoint& x, const Settings& settings = {}) {
  require_on_manifold(sys, x, settings);
  auto flat_x = x.flat();
  return symplectic_splitting(sys, std::span<const double>(flat_x));
}

/// The projector P onto T^D M along its symplectic complement, as a 2n x 2n matrix.
inline Matrix<double> tangent_projector(const SystemDefinition& sys, const PhasePoint& x,
                                        const Settings& settings = {}) {
  return splitting_at(sys, x, settings).P;
}

inline double omega(std::span<const double> z, std::span<const double> w) {
  const std::size_t n = z.size() / 2;
  return dot(z.subspan(0, n), w.subspan(n, n)) - dot(w.subspan(0, n), z.subspan(n, n));
}

}  // namespace nhb
