#include <cmath>
#include <cstdio>
#include <sstream>

#include "factr/telesim.hpp"

namespace factr::sim {

std::vector<TeleopScenario> teleop_scenarios() {
  // Press-and-slide references crossing a height step; the step forces a
  // contact loss and re-acquisition, which is where the two feedback modes
  // separate.
  std::vector<TeleopScenario> set;
  int id = 0;
  for (double drop : {0.10, 0.14}) {
    for (double speed : {0.25, 0.35}) {
      for (bool ltr : {true, false}) {
        TeleopScenario s;
        s.id = id++;
        s.object_x = ltr ? 0.34 : 0.38;
        s.object_half_width = 0.22;
        s.object_height = 0.36;
        s.step_drop = drop;
        s.press_depth = 0.03;
        s.slide_speed = speed;
        s.left_to_right = ltr;
        s.stiffness = 8000.0;
        set.push_back(s);
      }
    }
  }
  for (double stiff : {5000.0, 11000.0}) {
    TeleopScenario s;
    s.id = id++;
    s.object_x = 0.36;
    s.object_half_width = 0.2;
    s.object_height = 0.34;
    s.step_drop = 0.12;
    s.press_depth = 0.03;
    s.slide_speed = 0.3;
    s.left_to_right = stiff > 6000.0;
    s.stiffness = stiff;
    set.push_back(s);
  }
  for (double press : {0.025, 0.04}) {
    TeleopScenario s;
    s.id = id++;
    s.object_x = 0.35;
    s.object_half_width = 0.24;
    s.object_height = 0.35;
    s.step_drop = 0.11;
    s.press_depth = press;
    s.slide_speed = 0.28;
    s.left_to_right = press < 0.05;
    s.stiffness = 9000.0;
    set.push_back(s);
  }
  return set;
}

namespace {

// Bilateral tracking runs stiffer than the demonstration rig so the follower
// keeps up laterally while pressing.
FollowerParams teleop_follower_params(const ChainModel& model) {
  FollowerParams p = default_follower_params(model);
  p.kp << 320.0, 160.0, 32.0;
  p.kd << 32.0, 16.0, 3.2;
  p.tau_max = Vec::Constant(model.n_joints, 150.0);
  return p;
}

// Two-level object with the step at its middle; the slide starts on the tall
// section and crosses onto the low one.
SceneSpec scenario_scene(const TeleopScenario& s) {
  SceneSpec scene;
  scene.task = "touch_lift";
  scene.object_x = s.object_x;
  scene.object_half_width = s.object_half_width;
  scene.contact_stiffness = s.stiffness;
  scene.contact_damping = 40.0;
  scene.texture_id = 0;
  scene.step_x = s.object_x;
  if (s.left_to_right) {
    scene.object_height = s.object_height;
    scene.step_height = s.object_height - s.step_drop;
  } else {
    scene.object_height = s.object_height - s.step_drop;
    scene.step_height = s.object_height;
  }
  scene.validate();
  return scene;
}

struct Reference {
  double t_approach = 0.8, t_descend = 0.7, t_slide = 0.0;
  Vec2 p0{0.0, 0.0};
  double x_start = 0.0, x_end = 0.0, y_cruise = 0.0, y_press_start = 0.0;
  const TeleopScenario* sc;
  const SceneSpec* scene;

  Reference(const TeleopScenario& s, const SceneSpec& sp, const Vec2& start_ee)
      : p0(start_ee), sc(&s), scene(&sp) {
    const double margin = 0.05;
    x_start = s.left_to_right ? s.object_x - s.object_half_width + margin
                              : s.object_x + s.object_half_width - margin;
    x_end = s.left_to_right ? s.object_x + s.object_half_width - margin
                            : s.object_x - s.object_half_width + margin;
    y_cruise = s.object_height + 0.12;
    y_press_start = sp.top_at(x_start) - s.press_depth;
    t_slide = std::abs(x_end - x_start) / s.slide_speed;
  }

  Vec2 at(double t) const {
    if (t < t_approach) {
      const double a = t / t_approach;
      return p0 + a * (Vec2(x_start, y_cruise) - p0);
    }
    t -= t_approach;
    if (t < t_descend) {
      const double a = t / t_descend;
      return Vec2(x_start, y_cruise + a * (y_press_start - y_cruise));
    }
    t -= t_descend;
    const double a = std::min(1.0, t / t_slide);
    const double x = x_start + a * (x_end - x_start);
    return Vec2(x, scene->top_at(x) - sc->press_depth);
  }

  bool in_press_window(double t) const { return t >= t_approach + t_descend; }
  double total() const { return t_approach + t_descend + t_slide + 0.6; }
};

}  // namespace

TeleopMetrics run_teleop_episode(const TeleopScenario& scenario, bool feedback_enabled,
                                 std::uint64_t seed, std::string* telemetry_csv) {
  (void)seed;  // the teleop loop is fully deterministic; seed kept for the interface
  std::ostringstream telemetry;
  if (telemetry_csv != nullptr) {
    telemetry << "t";
    for (const char* part : {"fb", "null", "grav", "fric", "limit", "raw", "clamped"})
      for (int j = 0; j < 3; ++j) telemetry << ',' << part << j;
    telemetry << '\n';
  }
  const ChainModel follower_model = default_follower_model();
  const ChainModel leader_model = default_leader_model();
  const FollowerParams fparams = teleop_follower_params(follower_model);
  ctl::ControllerGains gains = default_leader_gains(leader_model, follower_model);
  // With a scripted spring standing in for the operator's hand, the relayed
  // torque must dominate the spring to keep the press shallow.
  gains.k_fp = Vec::Constant(3, 0.7);

  const SceneSpec scene = scenario_scene(scenario);
  const Vec q0 = default_start_posture();
  const Vec2 start_ee = kArmBase + dyn::forward_kinematics(leader_model, q0).back().position;
  const Reference ref(scenario, scene, start_ee);

  const double dt = 1.0 / 500.0;

  Vec ql = default_start_posture();
  Vec dql = Vec::Zero(3);
  FollowerState fs;
  fs.q = ql;
  fs.dq = Vec::Zero(3);

  TaskParams task;
  task.press_lo = 1e9;  // attachment disabled for teleop scenes
  ContactInfo contact;

  TeleopMetrics out;
  out.scenario_id = scenario.id;
  out.feedback = feedback_enabled;

  const double k_op = 150.0;  // yielding operator hand spring, N/m
  const double d_op = 25.0;

  int window_ticks = 0, contact_ticks = 0;
  bool aborted = false;
  bool contact_seen = false;
  const int total_ticks = static_cast<int>(ref.total() / dt);
  for (int tick = 0; tick < total_ticks; ++tick) {
    const double t = tick * dt;
    try {
    const Vec2 p_ref = ref.at(t);

    const auto lposes = dyn::forward_kinematics(leader_model, ql);
    const Vec2 lee = kArmBase + lposes.back().position;
    const Mat Jl = dyn::jacobian(leader_model, ql);
    const Vec lvel2 = Jl * dql;
    Vec f_op(2);
    f_op << k_op * (p_ref.x() - lee.x()) - d_op * lvel2[0],
        k_op * (p_ref.y() - lee.y()) - d_op * lvel2[1];
    const Vec tau_op = Jl.transpose() * f_op;

    const Vec tau_ext = external_torque(follower_model, fs.q, contact.force, 0.0, nullptr);

    // Feedback damping acts only while force is actually relayed, so the two
    // modes are identical until first contact.
    const bool in_contact_now = tau_ext.cwiseAbs().maxCoeff() > 0.0;
    Vec tau_fb = Vec::Zero(3);
    if (feedback_enabled) {
      const Vec dq_gate = in_contact_now ? dql : Vec(Vec::Zero(3));
      tau_fb = ctl::force_feedback_torque(tau_ext, dq_gate, gains);
    }
    const Vec tau_null = ctl::nullspace_torque(Jl, ql, dql, gains);
    const Vec tau_grav = ctl::gravity_comp(leader_model, ql, dql, gains);
    const Vec tau_fric = ctl::friction_comp(dql, t, gains.friction);
    const Vec tau_limit = ctl::joint_limit_torque(ql, leader_model, gains.limit);
    Vec tau_leader = tau_fb + tau_null + tau_grav + tau_fric + tau_limit;
    const Vec tau_raw = tau_leader;
    tau_leader = tau_leader.cwiseMin(gains.tau_max).cwiseMax(-gains.tau_max);
    if (telemetry_csv != nullptr) {
      char num[32];
      std::snprintf(num, sizeof(num), "%.6g", t);
      telemetry << num;
      for (const Vec* v : std::initializer_list<const Vec*>{&tau_fb, &tau_null, &tau_grav, &tau_fric, &tau_limit, &tau_raw, &tau_leader}) {
        for (int j = 0; j < 3; ++j) {
          std::snprintf(num, sizeof(num), "%.10g", (*v)[j]);
          telemetry << ',' << num;
        }
      }
      telemetry << '\n';
    }

    // Leader plant: commanded torque + operator force - kinetic friction.
    Vec fric_plant(3);
    for (int i = 0; i < 3; ++i) {
      fric_plant[i] = gains.friction.mu_c[i] * ((dql[i] > 0) - (dql[i] < 0)) +
                      gains.friction.mu_v[i] * dql[i];
    }
    const Vec ddql = dyn::forward_dynamics(leader_model, ql, dql,
                                           tau_leader + tau_op - fric_plant, leader_model.gravity);
    dql += dt * ddql;
    ql += dt * dql;

    contact = step_follower(fs, ql, follower_model, fparams, scene, task, dt);
    if (!contact_seen) {
      if (contact.in_contact) {
        contact_seen = true;
      } else {
        out.precontact_digest = fnv1a64(ql.data(), sizeof(double) * 3, out.precontact_digest ? out.precontact_digest : 0xcbf29ce484222325ULL);
      }
    }

    if (ref.in_press_window(t)) {
      window_ticks += 1;
      // Retention counts contact held while actually tracking the leader's
      // contact point; a grinding stall far behind it is not maintained
      // contact.
      const auto fposes = dyn::forward_kinematics(follower_model, fs.q);
      const Vec2 fee = kArmBase + fposes.back().position;
      if (contact.in_contact && std::abs(fee.x() - lee.x()) < 0.15) contact_ticks += 1;
      out.max_penetration = std::max(out.max_penetration, contact.penetration);
    }
    } catch (const Error&) {
      aborted = true;  // a limit or numeric fault ends the episode
      break;
    }
  }

  out.fault_count = fs.fault_count;
  out.contact_retention = window_ticks > 0 ? static_cast<double>(contact_ticks) / window_ticks : 0.0;
  // Completion means the bilateral pair stayed together to the end.
  const auto fposes = dyn::forward_kinematics(follower_model, fs.q);
  const Vec2 fee = kArmBase + fposes.back().position;
  const auto lposes = dyn::forward_kinematics(leader_model, ql);
  const Vec2 lee_end = kArmBase + lposes.back().position;
  out.completed = !aborted && (fee - lee_end).norm() < 0.15 && fs.q.allFinite();
  if (telemetry_csv != nullptr) *telemetry_csv = telemetry.str();
  return out;
}

}  // namespace factr::sim
