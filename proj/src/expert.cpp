#include <cmath>

#include "factr/telesim.hpp"

namespace factr::sim {

namespace {

constexpr double kBackgroundTol = 0.03;

// Differential IK toward a desired end-effector velocity with a null-space
// pull to the rest posture, rate limited per joint.
Vec ik_step(const Vec& q_cmd, const Vec2& v_des, const ChainModel& model,
            const ExpertParams& params, double dt) {
  const Mat J = dyn::jacobian(model, q_cmd);
  const Mat pinv = dyn::damped_pinv(J, params.ik_damping);
  Vec v(2);
  v << v_des.x(), v_des.y();
  const Mat N = Mat::Identity(model.n_joints, model.n_joints) - pinv * J;
  Vec dq = pinv * v + N * (params.posture_gain * (default_start_posture() - q_cmd));
  for (int i = 0; i < dq.size(); ++i) dq[i] = std::clamp(dq[i], -params.max_joint_speed, params.max_joint_speed);
  return q_cmd + dt * dq;
}

Vec2 ee_of(const Vec& q, const ChainModel& model) {
  return kArmBase + dyn::forward_kinematics(model, q).back().position;
}

}  // namespace

std::optional<double> locate_object_x(const curriculum::Image& image, const CameraView& cam) {
  // Columns whose object-band pixels deviate from the background; the band
  // sits above the table line and below the arm's travel height.
  const int row_hi = static_cast<int>(world_to_row(0.48, cam, image.h));
  const int row_lo = static_cast<int>(world_to_row(0.04, cam, image.h));
  double weight_sum = 0.0, weighted_col = 0.0;
  for (int col = 0; col < image.w; ++col) {
    double col_w = 0.0;
    for (int row = std::max(0, row_hi); row <= std::min(image.h - 1, row_lo); ++row) {
      const double d = std::abs(image.at(row, col) - 0.35);
      if (d > kBackgroundTol) col_w += d;
    }
    weight_sum += col_w;
    weighted_col += col_w * col;
  }
  if (weight_sum < 1e-6) return std::nullopt;
  return col_to_world(weighted_col / weight_sum, cam, image.w);
}

std::optional<double> locate_object_top(const curriculum::Image& image, const CameraView& cam) {
  const int row_hi = static_cast<int>(world_to_row(0.48, cam, image.h));
  const int row_lo = static_cast<int>(world_to_row(0.04, cam, image.h));
  for (int row = std::max(0, row_hi); row <= std::min(image.h - 1, row_lo); ++row) {
    int hits = 0;
    for (int col = 0; col < image.w; ++col) {
      if (std::abs(image.at(row, col) - 0.35) > kBackgroundTol) ++hits;
    }
    if (hits >= 2) {
      const double py = (cam.y_max - cam.y_min) / image.h;
      // Pixels paint when their centers fall inside the object, so the center
      // of the last unoccupied row is a guaranteed upper bound on the top.
      return cam.y_max - (row - 0.5) * py;
    }
  }
  return std::nullopt;
}

ExpertState expert_init(const Vec& q_start) {
  ExpertState s;
  s.q_cmd = q_start;
  return s;
}

Vec expert_step(ExpertState& state, const std::string& task, const curriculum::Image& image,
                const Vec& tau_ext, const ChainModel& model, const ExpertParams& params,
                const CameraView& cam, double dt) {
  state.time += dt;
  const Vec2 ee = ee_of(state.q_cmd, model);
  const double tau_norm = tau_ext.norm();

  // Force magnitude estimate from the sensed joint torques.
  const Mat J = dyn::jacobian(model, state.q_cmd);
  const Vec f_est = dyn::damped_pinv(J, 1e-3).transpose() * tau_ext;
  const double force = f_est.size() == 2 ? std::abs(f_est[1]) : 0.0;

  Vec2 v(0.0, 0.0);
  switch (state.phase) {
    case Phase::locate: {
      const auto found = locate_object_x(image, cam);
      if (found) state.x_estimate = *found;
      const double ex = state.x_estimate - ee.x();
      const double ey = params.cruise_y - ee.y();
      v = Vec2(std::clamp(3.0 * ex, -params.locate_speed, params.locate_speed),
               std::clamp(3.0 * ey, -params.locate_speed, params.locate_speed));
      if (found && std::abs(ex) < 0.02 && std::abs(ey) < 0.04) {
        state.x_locked = true;
        state.roll_center = state.x_estimate;
        const auto top = locate_object_top(image, cam);
        if (top) state.top_estimate = *top;
        state.phase = Phase::descend;
      }
      break;
    }
    case Phase::descend: {
      // Stay on the locked column and sink: fast while clearly above the
      // seen top, creeping through the uncertainty band so the impact stays
      // gentle. The press transition itself comes from the torque signal,
      // never from any height.
      const double vy = (ee.y() > state.top_estimate + params.creep_margin)
                            ? -params.descend_speed
                            : -params.creep_speed;
      v = Vec2(std::clamp(3.0 * (state.x_estimate - ee.x()), -0.2, 0.2), vy);
      if (tau_norm > params.contact_threshold) {
        state.phase = Phase::press;
        state.in_band = 0.0;
      }
      break;
    }
    case Phase::press: {
      const double target = task == "roll" ? params.roll_force_target : params.force_target;
      v = Vec2(0.0, std::clamp(-0.02 * (target - force), -0.04, 0.12));
      // Mirror the attach band so the lift never starts before attachment.
      if (force >= params.press_lo && force <= params.press_hi) {
        state.in_band += dt;
      } else {
        state.in_band = 0.0;
      }
      if (state.in_band >= params.press_settle) {
        state.phase = task == "roll" ? Phase::roll : Phase::lift;
        state.roll_clock = 0.0;
      }
      break;
    }
    case Phase::lift: {
      v = Vec2(0.0, params.lift_speed);
      if (ee.y() >= params.lift_to) state.phase = Phase::hold;
      break;
    }
    case Phase::hold:
      v = Vec2(std::clamp(2.0 * (state.x_estimate - ee.x()), -0.1, 0.1),
               std::clamp(2.0 * (params.lift_to - ee.y()), -0.1, 0.1));
      break;
    case Phase::roll: {
      state.roll_clock += dt;
      const double omega = 2.0 * M_PI / params.roll_period;
      const double x_ref = state.roll_center +
                           0.9 * params.roll_span * std::sin(omega * state.roll_clock);
      const double vx = std::clamp(6.0 * (x_ref - ee.x()), -0.45, 0.45);
      const double vy = std::clamp(-0.02 * (params.roll_force_target - force), -0.1, 0.1);
      v = Vec2(vx, vy);
      break;
    }
    case Phase::done:
      break;
  }

  state.q_cmd = ik_step(state.q_cmd, v, model, params, dt);
  return state.q_cmd;
}

}  // namespace factr::sim
