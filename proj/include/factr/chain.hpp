#pragma once

#include <Eigen/Dense>
#include <vector>

#include "factr/error.hpp"

namespace factr::dyn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

// Planar serial chain with revolute joints about z. Link frames follow the
// usual convention: link i extends along its local x axis, the joint sits at
// the proximal end, the center of mass at +com_offset along the link.
struct ChainModel {
  int n_joints = 0;
  std::vector<double> length;      // m
  std::vector<double> com_offset;  // m, from the joint axis along the link
  std::vector<double> mass;        // kg
  std::vector<double> inertia;     // kg*m^2, about the COM, planar
  Vec2 gravity{0.0, -9.81};        // m/s^2
  std::vector<double> q_min;       // rad
  std::vector<double> q_max;       // rad

  void validate() const;
};

struct JointState {
  Vec q;
  Vec dq;
  Vec ddq;
};

struct Pose2 {
  Vec2 position{0.0, 0.0};
  double angle = 0.0;
};

// Returns n+1 poses: pose[i] is the frame at the tip of link i (pose[0] is
// the base frame), so pose[i].position is joint i+1's axis location and
// pose[n].position the end-effector.
std::vector<Pose2> forward_kinematics(const ChainModel& model, const Vec& q);

inline Vec2 end_effector(const ChainModel& model, const Vec& q) {
  return forward_kinematics(model, q).back().position;
}

// 2 x n positional Jacobian of the end-effector.
Mat jacobian(const ChainModel& model, const Vec& q);

// Damped least-squares pseudo-inverse. damping = 0 yields Moore-Penrose on
// full-rank inputs and throws on rank deficiency.
Mat damped_pinv(const Mat& J, double damping);

// N = I - J'J with J' the damped pseudo-inverse.
Mat nullspace_projector(const Mat& J, double damping);

// Inverse dynamics of the planar chain: tau = M(q) ddq + C(q,dq) dq + g(q),
// with the gravity vector supplied explicitly.
Vec rnea(const ChainModel& model, const Vec& q, const Vec& dq, const Vec& ddq, const Vec2& gravity);

inline Vec rnea(const ChainModel& model, const Vec& q, const Vec& dq, const Vec& ddq) {
  return rnea(model, q, dq, ddq, model.gravity);
}

// Total gravitational potential energy; the gravity-torque/potential-gradient
// property tests differentiate this.
double potential_energy(const ChainModel& model, const Vec& q, const Vec2& gravity);

double kinetic_energy(const ChainModel& model, const Vec& q, const Vec& dq);

// Joint-space mass matrix, assembled column by column from the inverse
// dynamics with gravity removed.
Mat mass_matrix(const ChainModel& model, const Vec& q);

// Accelerations under applied joint torque: ddq = M(q)^-1 (tau - C dq - g).
Vec forward_dynamics(const ChainModel& model, const Vec& q, const Vec& dq, const Vec& tau,
                     const Vec2& gravity);

}  // namespace factr::dyn
