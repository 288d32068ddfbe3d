#include "factr/leader_control.hpp"

#include <cmath>

namespace factr::ctl {

namespace {

void check_len(const Vec& v, int n, const char* name) {
  if (v.size() != n) {
    raise(ErrorKind::invalid_argument,
          std::string(name) + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  }
}

void check_nonneg(const Vec& v, const char* name) {
  if (v.size() > 0 && v.minCoeff() < 0.0) {
    raise(ErrorKind::invalid_argument, std::string(name) + " entries must be non-negative");
  }
}

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

void FrictionParams::validate(int n) const {
  check_len(mu_s, n, "mu_s");
  check_len(dq_s, n, "dq_s");
  check_len(mu_c, n, "mu_c");
  check_len(mu_v, n, "mu_v");
  check_nonneg(mu_s, "mu_s");
  check_nonneg(dq_s, "dq_s");
  check_nonneg(mu_c, "mu_c");
  check_nonneg(mu_v, "mu_v");
  if (!(f_loop > 0.0)) raise(ErrorKind::invalid_argument, "f_loop must be positive");
}

void LimitParams::validate(const ChainModel& model) const {
  if (eta_limit < 0.0) raise(ErrorKind::invalid_argument, "eta_limit must be non-negative");
  if (!(delta_q > 0.0)) raise(ErrorKind::invalid_argument, "delta_q must be positive");
  for (int i = 0; i < model.n_joints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (delta_q >= 0.5 * (model.q_max[k] - model.q_min[k])) {
      raise(ErrorKind::invalid_argument, "delta_q must be below half the joint range");
    }
  }
}

void ControllerGains::validate(const ChainModel& model) const {
  const int n = model.n_joints;
  if (!(mu_f > 0.0)) raise(ErrorKind::invalid_argument, "mu_f must be positive");
  check_len(k_fp, n, "k_fp");
  check_len(k_fd, n, "k_fd");
  check_len(k_np, n, "k_np");
  check_len(k_nd, n, "k_nd");
  check_len(q_rest, n, "q_rest");
  check_len(tau_max, n, "tau_max");
  check_nonneg(k_fp, "k_fp");
  check_nonneg(k_fd, "k_fd");
  check_nonneg(k_np, "k_np");
  check_nonneg(k_nd, "k_nd");
  friction.validate(n);
  limit.validate(model);
}

Vec AccelEstimator::update(const Vec& dq, double dt) {
  if (!primed) {
    prev_dq = dq;
    ddq_filtered = Vec::Zero(dq.size());
    primed = true;
    return ddq_filtered;
  }
  const Vec raw = (dq - prev_dq) / dt;
  ddq_filtered = smoothing * ddq_filtered + (1.0 - smoothing) * raw;
  prev_dq = dq;
  return ddq_filtered;
}

Vec force_feedback_torque(const Vec& tau_ext, const Vec& dq, const ControllerGains& gains) {
  check_len(tau_ext, static_cast<int>(gains.k_fp.size()), "tau_ext");
  check_len(dq, static_cast<int>(gains.k_fd.size()), "dq");
  return gains.mu_f * gains.k_fp.cwiseProduct(tau_ext) - gains.k_fd.cwiseProduct(dq);
}

double gripper_feedback_step(GripperFeedbackState& state, double current_amps) {
  if (!std::isfinite(current_amps)) raise(ErrorKind::invalid_argument, "gripper current must be finite");
  state.tau_h = state.alpha * (-state.k_h * current_amps) + (1.0 - state.alpha) * state.tau_h;
  return state.tau_h;
}

Vec nullspace_torque(const Mat& J, const Vec& q, const Vec& dq, const ControllerGains& gains) {
  const Mat N = dyn::nullspace_projector(J, gains.pinv_damping);
  const Vec posture = -gains.k_np.cwiseProduct(q - gains.q_rest) - gains.k_nd.cwiseProduct(dq);
  return N * posture;
}

Vec gravity_comp(const ChainModel& model, const Vec& q, const Vec& dq, const ControllerGains& gains,
                 AccelEstimator* accel, double dt) {
  const Vec zero = Vec::Zero(model.n_joints);
  if (gains.grav_mode == GravityMode::gravity_only) {
    return dyn::rnea(model, q, zero, zero);
  }
  Vec ddq_est = zero;
  if (accel != nullptr) ddq_est = accel->update(dq, dt);
  return dyn::rnea(model, q, dq, ddq_est);
}

Vec friction_comp(const Vec& dq, double t, const FrictionParams& params) {
  if (t < 0.0) raise(ErrorKind::invalid_argument, "time must be non-negative");
  const int n = static_cast<int>(dq.size());
  const double phase = params.literal_dither ? M_PI * t / params.f_loop : M_PI * t * params.f_loop;
  const double dither = std::cos(phase);
  Vec tau(n);
  for (int i = 0; i < n; ++i) {
    const double stat = (std::abs(dq[i]) < params.dq_s[i]) ? params.mu_s[i] * dither : 0.0;
    tau[i] = stat + params.mu_c[i] * sgn(dq[i]) + params.mu_v[i] * dq[i];
  }
  return tau;
}

double joint_limit_potential(double q, double q_min, double q_max, const LimitParams& params) {
  const double lo = q - q_min;
  const double hi = q_max - q;
  if (lo < params.delta_q) {
    const double gap = 1.0 / lo - 1.0 / params.delta_q;
    return 0.5 * params.eta_limit * gap * gap;
  }
  if (hi < params.delta_q) {
    const double gap = 1.0 / hi - 1.0 / params.delta_q;
    return 0.5 * params.eta_limit * gap * gap;
  }
  return 0.0;
}

Vec joint_limit_torque(const Vec& q, const ChainModel& model, const LimitParams& params) {
  check_len(q, model.n_joints, "q");
  Vec tau = Vec::Zero(model.n_joints);
  for (int i = 0; i < model.n_joints; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double lo = q[i] - model.q_min[k];
    const double hi = model.q_max[k] - q[i];
    if (lo <= 0.0 || hi <= 0.0) {
      raise(ErrorKind::fault, "limit violated at joint " + std::to_string(i));
    }
    if (lo < params.delta_q) {
      tau[i] = params.eta_limit * (1.0 / lo - 1.0 / params.delta_q) / (lo * lo);
    } else if (hi < params.delta_q) {
      tau[i] = -params.eta_limit * (1.0 / hi - 1.0 / params.delta_q) / (hi * hi);
    }
  }
  return tau;
}

LeaderTorque total_leader_torque(const ChainModel& model, const Vec& q, const Vec& dq,
                                 const Vec& tau_ext, double t, const ControllerGains& gains,
                                 AccelEstimator* accel, double dt) {
  LeaderTorque out;
  out.feedback = force_feedback_torque(tau_ext, dq, gains);
  out.nullspace = nullspace_torque(dyn::jacobian(model, q), q, dq, gains);
  out.gravity = gravity_comp(model, q, dq, gains, accel, dt);
  out.friction = friction_comp(dq, t, gains.friction);
  out.limit = joint_limit_torque(q, model, gains.limit);
  out.raw = out.feedback + out.nullspace + out.gravity + out.friction + out.limit;
  out.clamped = out.raw.cwiseMin(gains.tau_max).cwiseMax(-gains.tau_max);
  return out;
}

}  // namespace factr::ctl
