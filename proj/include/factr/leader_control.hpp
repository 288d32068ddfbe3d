#pragma once

#include "factr/chain.hpp"

namespace factr::ctl {

using dyn::ChainModel;
using dyn::Mat;
using dyn::Vec;

struct FrictionParams {
  Vec mu_s;          // static coefficients, N*m
  Vec dq_s;          // velocity thresholds gating the static term, rad/s
  Vec mu_c;          // Coulomb coefficients, N*m
  Vec mu_v;          // viscous coefficients, N*m*s/rad
  double f_loop = 500.0;        // control frequency, Hz
  bool literal_dither = false;  // cos(pi*t/f) instead of cos(pi*t*f)

  void validate(int n) const;
};

struct LimitParams {
  double eta_limit = 0.0;  // potential scale
  double delta_q = 0.1;    // band width, rad

  void validate(const ChainModel& model) const;
};

enum class GravityMode { gravity_only, full_dynamics };

struct ControllerGains {
  double mu_f = 1.0;  // feedback attenuation, (0, 1]
  Vec k_fp;           // leader/follower torque ratio, diagonal
  Vec k_fd;           // feedback damping
  Vec k_np;           // null-space stiffness
  Vec k_nd;           // null-space damping
  Vec q_rest;         // preferred posture
  Vec tau_max;        // per-joint actuator limit for the combined command
  FrictionParams friction;
  LimitParams limit;
  GravityMode grav_mode = GravityMode::gravity_only;
  double pinv_damping = 1e-6;

  void validate(const ChainModel& model) const;
};

struct GripperFeedbackState {
  double tau_h = 0.0;  // last feedback torque, N*m
  double alpha = 0.1;  // EMA smoothing, (0, 1]
  double k_h = 1.0;    // current-to-torque gain, N*m/A
};

// Velocity differencing state for the full-dynamics gravity mode.
struct AccelEstimator {
  Vec prev_dq;
  Vec ddq_filtered;
  double smoothing = 0.9;
  bool primed = false;

  Vec update(const Vec& dq, double dt);
};

Vec force_feedback_torque(const Vec& tau_ext, const Vec& dq, const ControllerGains& gains);

// One EMA step of the gripper feedback; returns the updated torque.
double gripper_feedback_step(GripperFeedbackState& state, double current_amps);

Vec nullspace_torque(const Mat& J, const Vec& q, const Vec& dq, const ControllerGains& gains);

Vec gravity_comp(const ChainModel& model, const Vec& q, const Vec& dq, const ControllerGains& gains,
                 AccelEstimator* accel = nullptr, double dt = 1.0 / 500.0);

Vec friction_comp(const Vec& dq, double t, const FrictionParams& params);

double joint_limit_potential(double q, double q_min, double q_max, const LimitParams& params);

// -dU/dq of the repulsive band potential; zero in the interior, grows toward
// the limits, and goes to zero continuously at the band edge. Throws when q
// is outside [q_min, q_max].
Vec joint_limit_torque(const Vec& q, const ChainModel& model, const LimitParams& params);

struct LeaderTorque {
  Vec feedback;
  Vec nullspace;
  Vec gravity;
  Vec friction;
  Vec limit;
  Vec raw;      // straight sum of the five components
  Vec clamped;  // raw clamped to +-tau_max, the value actually commanded
};

LeaderTorque total_leader_torque(const ChainModel& model, const Vec& q, const Vec& dq,
                                 const Vec& tau_ext, double t, const ControllerGains& gains,
                                 AccelEstimator* accel = nullptr, double dt = 1.0 / 500.0);

}  // namespace factr::ctl
