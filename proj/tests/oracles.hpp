#pragma once

// Reference computations that share no code with the library's
// differentiation or projection paths: central finite differences, a KKT
// solve for the constrained least-squares momentum, and closed forms for
// the nonholonomic particle (identity metric, mu = (y, 0, -1)).

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using ScalarFn = std::function<double(const Vec&)>;

inline Vec central_gradient(const ScalarFn& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Canonical bracket by central differences.
inline double fd_bracket(const ScalarFn& f, const ScalarFn& g, const Vec& x, double h) {
  const std::size_t n = x.size() / 2;
  auto gf = central_gradient(f, x, h);
  auto gg = central_gradient(g, x, h);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += gf[i] * gg[n + i] - gf[n + i] * gg[i];
  return s;
}

/// argmin over p' of (p' - p)^T Ginv (p' - p) subject to mu Ginv p' = 0, from
/// the full KKT system.
inline Vec kkt_projection(const Eigen::MatrixXd& G, const Eigen::MatrixXd& mu, const Vec& p) {
  const auto n = G.rows(), r = mu.rows();
  const Eigen::MatrixXd ginv = G.inverse();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + r, n + r);
  kkt.topLeftCorner(n, n) = 2.0 * ginv;
  kkt.topRightCorner(n, r) = (mu * ginv).transpose();
  kkt.bottomLeftCorner(r, n) = mu * ginv;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + r);
  Eigen::Map<const Eigen::VectorXd> pv(p.data(), n);
  rhs.head(n) = 2.0 * ginv * pv;
  Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  return Vec(sol.data(), sol.data() + n);
}

namespace particle {

inline Eigen::MatrixXd mu(double y) {
  Eigen::MatrixXd m(1, 3);
  m << y, 0.0, -1.0;
  return m;
}

/// Eden projection for the particle, via the KKT oracle.
inline Vec gamma(const Vec& q, const Vec& p) { return kkt_projection(Eigen::MatrixXd::Identity(3, 3), mu(q[1]), p); }

/// Multiplier of the constrained equations derived by hand:
/// d/dt (y p1 - p3) = p2 p1 + y pdot1 - pdot3 with pdot = -lambda mu.
inline double lambda(const Vec& q, const Vec& p) { return p[0] * p[1] / (1.0 + q[1] * q[1]); }

/// (q, p) -> f(q, gamma(p)) for f given on the flat phase vector.
inline ScalarFn extension(const ScalarFn& f) {
  return [f](const Vec& x) {
    Vec q(x.begin(), x.begin() + 3), p(x.begin() + 3, x.end());
    auto gp = gamma(q, p);
    Vec y = q;
    y.insert(y.end(), gp.begin(), gp.end());
    return f(y);
  };
}

/// Eden bracket as a function on phase space, all derivatives by central differences.
inline ScalarFn eden_bracket(const ScalarFn& f, const ScalarFn& g, double h) {
  return [=](const Vec& x) {
    Vec q(x.begin(), x.begin() + 3), p(x.begin() + 3, x.end());
    auto gp = gamma(q, p);
    Vec y = q;
    y.insert(y.end(), gp.begin(), gp.end());
    return fd_bracket(extension(f), extension(g), y, h);
  };
}

inline double eden_jacobiator(const ScalarFn& f, const ScalarFn& g, const ScalarFn& h, const Vec& x, double step) {
  auto br = [step](const ScalarFn& a, const ScalarFn& b) { return eden_bracket(a, b, step); };
  return br(f, br(g, h))(x) + br(g, br(h, f))(x) + br(h, br(f, g))(x);
}

}  // namespace particle

inline ScalarFn coordinate(std::size_t i) {
  return [i](const Vec& x) { return x[i]; };
}

}  // namespace oracle
