#pragma once

// Independent reference implementations used only by tests. These must not
// call into the code paths they check: forward kinematics is recomputed with
// complex arithmetic, two-link dynamics from the closed-form Lagrangian
// equations, and derivatives by central finite differences.

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

#include "factr/chain.hpp"

namespace oracles {

using factr::dyn::ChainModel;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

// End-effector position by accumulating complex-exponential rotations.
inline Vec2 fk_complex(const std::vector<double>& lengths, const Vec& q) {
  std::complex<double> z(0.0, 0.0);
  double angle = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    angle += q[static_cast<int>(i)];
    z += lengths[i] * std::exp(std::complex<double>(0.0, angle));
  }
  return Vec2(z.real(), z.imag());
}

// Closed-form two-link dynamics (Lagrangian form), general planar gravity.
inline Vec two_link_lagrangian(const ChainModel& m, const Vec& q, const Vec& dq, const Vec& ddq,
                               const Vec2& gravity) {
  const double l1 = m.length[0];
  const double c1 = m.com_offset[0], c2 = m.com_offset[1];
  const double m1 = m.mass[0], m2 = m.mass[1];
  const double i1 = m.inertia[0], i2 = m.inertia[1];
  const double q1 = q[0], q2 = q[1];

  Mat M(2, 2);
  M(0, 0) = i1 + m1 * c1 * c1 + i2 + m2 * (l1 * l1 + c2 * c2 + 2.0 * l1 * c2 * std::cos(q2));
  M(0, 1) = i2 + m2 * (c2 * c2 + l1 * c2 * std::cos(q2));
  M(1, 0) = M(0, 1);
  M(1, 1) = i2 + m2 * c2 * c2;

  const double h = m2 * l1 * c2 * std::sin(q2);
  Vec cdq(2);
  cdq[0] = -h * dq[1] * dq[1] - 2.0 * h * dq[0] * dq[1];
  cdq[1] = h * dq[0] * dq[0];

  const auto u = [](double a) { return Vec2(std::cos(a), std::sin(a)); };
  const auto perp = [](const Vec2& v) { return Vec2(-v.y(), v.x()); };
  Vec g(2);
  g[0] = -m1 * gravity.dot(c1 * perp(u(q1))) -
         m2 * gravity.dot(l1 * perp(u(q1)) + c2 * perp(u(q1 + q2)));
  g[1] = -m2 * gravity.dot(c2 * perp(u(q1 + q2)));

  return M * ddq + cdq + g;
}

// Central finite difference of a scalar function of a vector.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Central finite difference Jacobian of a vector function of a vector.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

// Max violation over the four Moore-Penrose identities.
inline double moore_penrose_violation(const Mat& J, const Mat& P) {
  double v = 0.0;
  v = std::max(v, (J * P * J - J).cwiseAbs().maxCoeff());
  v = std::max(v, (P * J * P - P).cwiseAbs().maxCoeff());
  v = std::max(v, ((J * P).transpose() - J * P).cwiseAbs().maxCoeff());
  v = std::max(v, ((P * J).transpose() - P * J).cwiseAbs().maxCoeff());
  return v;
}

}  // namespace oracles
