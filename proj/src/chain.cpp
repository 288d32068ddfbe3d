#include "factr/chain.hpp"

#include <cmath>

namespace factr::dyn {

namespace {

void check_dim(const ChainModel& model, const Vec& v, const char* name) {
  if (v.size() != model.n_joints) {
    raise(ErrorKind::invalid_argument,
          std::string(name) + " has length " + std::to_string(v.size()) + ", expected " +
              std::to_string(model.n_joints));
  }
}

inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }
inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

void ChainModel::validate() const {
  if (n_joints <= 0) raise(ErrorKind::invalid_argument, "chain needs at least one joint");
  const std::size_t n = static_cast<std::size_t>(n_joints);
  if (length.size() != n || com_offset.size() != n || mass.size() != n || inertia.size() != n ||
      q_min.size() != n || q_max.size() != n) {
    raise(ErrorKind::invalid_argument, "chain parameter arrays must all have n_joints entries");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(mass[i] > 0.0)) raise(ErrorKind::invalid_argument, "link mass must be positive");
    if (!(inertia[i] >= 0.0)) raise(ErrorKind::invalid_argument, "link inertia must be non-negative");
    if (!(length[i] > 0.0)) raise(ErrorKind::invalid_argument, "link length must be positive");
    if (!(q_min[i] < q_max[i])) raise(ErrorKind::invalid_argument, "joint limits must satisfy q_min < q_max");
  }
}

std::vector<Pose2> forward_kinematics(const ChainModel& model, const Vec& q) {
  check_dim(model, q, "q");
  std::vector<Pose2> poses(static_cast<std::size_t>(model.n_joints) + 1);
  poses[0] = Pose2{};
  double angle = 0.0;
  Vec2 p(0.0, 0.0);
  for (int i = 0; i < model.n_joints; ++i) {
    angle += q[i];
    p += model.length[static_cast<std::size_t>(i)] * Vec2(std::cos(angle), std::sin(angle));
    poses[static_cast<std::size_t>(i) + 1] = Pose2{p, angle};
  }
  return poses;
}

Mat jacobian(const ChainModel& model, const Vec& q) {
  const auto poses = forward_kinematics(model, q);
  const Vec2 ee = poses.back().position;
  Mat J(2, model.n_joints);
  for (int j = 0; j < model.n_joints; ++j) {
    const Vec2 col = perp(ee - poses[static_cast<std::size_t>(j)].position);
    J(0, j) = col.x();
    J(1, j) = col.y();
  }
  return J;
}

Mat damped_pinv(const Mat& J, double damping) {
  if (!J.allFinite()) raise(ErrorKind::invalid_argument, "pseudo-inverse input must be finite");
  if (damping < 0.0) raise(ErrorKind::invalid_argument, "damping must be non-negative");
  const bool wide = J.rows() <= J.cols();
  const Mat gram = wide ? Mat(J * J.transpose()) : Mat(J.transpose() * J);
  Mat reg = gram;
  reg.diagonal().array() += damping * damping;
  if (damping == 0.0) {
    Eigen::FullPivLU<Mat> lu(reg);
    if (!lu.isInvertible()) raise(ErrorKind::numeric, "singular, supply damping");
    return wide ? Mat(J.transpose() * lu.inverse()) : Mat(lu.inverse() * J.transpose());
  }
  const Mat inv = reg.ldlt().solve(Mat::Identity(reg.rows(), reg.cols()));
  return wide ? Mat(J.transpose() * inv) : Mat(inv * J.transpose());
}

Mat nullspace_projector(const Mat& J, double damping) {
  const Mat pinv = damped_pinv(J, damping);
  return Mat::Identity(J.cols(), J.cols()) - pinv * J;
}

Vec rnea(const ChainModel& model, const Vec& q, const Vec& dq, const Vec& ddq, const Vec2& gravity) {
  check_dim(model, q, "q");
  check_dim(model, dq, "dq");
  check_dim(model, ddq, "ddq");
  const int n = model.n_joints;

  // Outward pass: cumulative angle/rate and accelerations of joint origins
  // and centers of mass, all in the world frame.
  std::vector<double> ang(static_cast<std::size_t>(n)), omega(static_cast<std::size_t>(n)),
      alpha(static_cast<std::size_t>(n));
  std::vector<Vec2> joint_pos(static_cast<std::size_t>(n) + 1), joint_acc(static_cast<std::size_t>(n) + 1);
  std::vector<Vec2> com_pos(static_cast<std::size_t>(n)), com_acc(static_cast<std::size_t>(n));
  joint_pos[0] = Vec2(0.0, 0.0);
  joint_acc[0] = Vec2(0.0, 0.0);
  double a = 0.0, w = 0.0, e = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    a += q[i];
    w += dq[i];
    e += ddq[i];
    ang[k] = a;
    omega[k] = w;
    alpha[k] = e;
    const Vec2 axis(std::cos(a), std::sin(a));
    const Vec2 r_link = model.length[k] * axis;
    const Vec2 r_com = model.com_offset[k] * axis;
    joint_pos[k + 1] = joint_pos[k] + r_link;
    joint_acc[k + 1] = joint_acc[k] + e * perp(r_link) - w * w * r_link;
    com_pos[k] = joint_pos[k] + r_com;
    com_acc[k] = joint_acc[k] + e * perp(r_com) - w * w * r_com;
  }

  // Inward pass: joint force f and joint moment m carried from link i+1.
  Vec tau(n);
  Vec2 f_next(0.0, 0.0);
  double m_next = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    const auto k = static_cast<std::size_t>(i);
    const Vec2 f = model.mass[k] * (com_acc[k] - Vec2(gravity)) + f_next;
    const double m = model.inertia[k] * alpha[k] + m_next - cross2(joint_pos[k] - com_pos[k], f) +
                     cross2(joint_pos[k + 1] - com_pos[k], f_next);
    tau[i] = m;
    f_next = f;
    m_next = m;
  }
  return tau;
}

double potential_energy(const ChainModel& model, const Vec& q, const Vec2& gravity) {
  const auto poses = forward_kinematics(model, q);
  double u = 0.0;
  double angle = 0.0;
  for (int i = 0; i < model.n_joints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    angle += q[i];
    const Vec2 com = poses[k].position + model.com_offset[k] * Vec2(std::cos(angle), std::sin(angle));
    u -= model.mass[k] * gravity.dot(com);
  }
  return u;
}

double kinetic_energy(const ChainModel& model, const Vec& q, const Vec& dq) {
  double t = 0.0;
  double angle = 0.0, omega = 0.0;
  Vec2 v_joint(0.0, 0.0);
  for (int i = 0; i < model.n_joints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    angle += q[i];
    omega += dq[i];
    const Vec2 axis(std::cos(angle), std::sin(angle));
    const Vec2 v_com = v_joint + omega * perp(model.com_offset[k] * axis);
    t += 0.5 * model.mass[k] * v_com.squaredNorm() + 0.5 * model.inertia[k] * omega * omega;
    v_joint += omega * perp(model.length[k] * axis);
  }
  return t;
}

Mat mass_matrix(const ChainModel& model, const Vec& q) {
  const int n = model.n_joints;
  const Vec zero = Vec::Zero(n);
  Mat M(n, n);
  for (int j = 0; j < n; ++j) {
    Vec unit = Vec::Zero(n);
    unit[j] = 1.0;
    M.col(j) = rnea(model, q, zero, unit, Vec2(0.0, 0.0));
  }
  return M;
}

Vec forward_dynamics(const ChainModel& model, const Vec& q, const Vec& dq, const Vec& tau,
                     const Vec2& gravity) {
  const Vec bias = rnea(model, q, dq, Vec::Zero(model.n_joints), gravity);
  return mass_matrix(model, q).ldlt().solve(tau - bias);
}

}  // namespace factr::dyn
