#include <cmath>

#include "factr/telesim.hpp"

namespace factr::sim {

void SceneSpec::validate() const {
  if (task != "touch_lift" && task != "roll" && task != "empty") {
    raise(ErrorKind::invalid_argument, "unknown task " + task);
  }
  if (has_object()) {
    if (!(contact_stiffness > 0.0)) raise(ErrorKind::invalid_argument, "contact stiffness must be positive");
    if (contact_damping < 0.0) raise(ErrorKind::invalid_argument, "contact damping must be non-negative");
    if (texture_id < 0 || texture_id >= kNumTextures) {
      raise(ErrorKind::invalid_argument, "unregistered texture id " + std::to_string(texture_id));
    }
    if (!(object_half_width > 0.0) || !(object_height > table_height)) {
      raise(ErrorKind::invalid_argument, "degenerate object geometry");
    }
  }
}

ContactInfo contact_force(const SceneSpec& scene, double object_lift, const Vec2& ee,
                          const Vec2& ee_vel) {
  ContactInfo info;
  if (!scene.has_object()) return info;

  // The surface below the end-effector: the object's local top while inside
  // its x extent (and still resting on the table), the table otherwise.
  const double left = scene.object_x - scene.object_half_width;
  const double right = scene.object_x + scene.object_half_width;
  const bool over_object = ee.x() >= left && ee.x() <= right && object_lift == 0.0;
  const double surface = over_object ? scene.top_at(ee.x()) : scene.table_height;
  const bool on_object = over_object;
  const double penetration = surface - ee.y();
  if (penetration <= 0.0) return info;

  // Spring-damper normal force, unilateral: never pulls down. Tangential
  // Coulomb friction is regularized with tanh so it stays deterministic and
  // smooth through zero sliding speed.
  double fn = scene.contact_stiffness * penetration - scene.contact_damping * ee_vel.y();
  fn = std::max(0.0, fn);
  const double ft = -scene.friction_mu * fn * std::tanh(ee_vel.x() / 0.01);
  info.in_contact = fn > 0.0;
  info.on_object = on_object && info.in_contact;
  info.force = Vec2(ft, fn);
  info.penetration = penetration;
  return info;
}

Vec external_torque(const ChainModel& model, const Vec& q, const Vec2& force, double noise_std,
                    Rng* rng) {
  const Mat J = dyn::jacobian(model, q);
  Vec f(2);
  f << force.x(), force.y();
  Vec tau = J.transpose() * f;
  if (noise_std > 0.0 && rng != nullptr) {
    for (int i = 0; i < tau.size(); ++i) tau[i] += rng->normal(0.0, noise_std);
  }
  return tau;
}

ContactInfo step_follower(FollowerState& state, const Vec& q_target, const ChainModel& model,
                          const FollowerParams& params, const SceneSpec& scene,
                          const TaskParams& task, double dt) {
  if (!state.q.allFinite() || !state.dq.allFinite()) {
    raise(ErrorKind::numeric, "follower state is not finite");
  }
  if (q_target.size() != model.n_joints) {
    raise(ErrorKind::invalid_argument, "follower target dimension mismatch");
  }
  if (!(dt > 0.0)) raise(ErrorKind::invalid_argument, "dt must be positive");

  const auto poses = dyn::forward_kinematics(model, state.q);
  const Vec2 ee = kArmBase + poses.back().position;
  const Mat J = dyn::jacobian(model, state.q);
  Vec dq2(2);
  dq2 = J * state.dq;
  const Vec2 ee_vel(dq2[0], dq2[1]);

  ContactInfo contact = contact_force(scene, state.object_lift, ee, ee_vel);

  // Attachment bookkeeping (touch_lift): a sustained in-band press attaches
  // the object to the end-effector; afterwards its weight loads the arm.
  Vec2 attach_load(0.0, 0.0);
  if (scene.task == "touch_lift") {
    if (!state.attached && contact.on_object) {
      const double fn = contact.force.y();
      if (fn > task.crush_force) state.crushed = true;
      if (fn >= task.press_lo && fn <= task.press_hi) {
        state.press_time += dt;
        if (state.press_time >= task.press_duration && !state.crushed) state.attached = true;
      } else {
        state.press_time = 0.0;
      }
    }
    if (state.attached) {
      state.object_lift = std::max(0.0, ee.y() - scene.object_height);
      attach_load = Vec2(0.0, -scene.object_mass * 9.81);
      if (state.object_lift >= task.lift_height) {
        state.lift_hold += dt;
        if (state.lift_hold >= task.hold_duration && !state.crushed) state.succeeded = true;
      } else {
        state.lift_hold = 0.0;
      }
    }
  } else if (scene.task == "roll") {
    if (contact.on_object) {
      state.object_contact_seen = true;
      const double fn = contact.force.y();
      if (fn >= task.band_lo && fn <= task.band_hi) {
        state.band_time += dt;
        const double vx = ee_vel.x();
        if (std::abs(vx) > 0.02) {
          if (state.last_vx != 0.0 && vx * state.last_vx < 0.0) state.reversals += 1;
          state.last_vx = vx;
        }
        if (state.band_time >= task.roll_duration && state.reversals >= task.roll_reversals) {
          state.succeeded = true;
        }
      }
    }
  }

  // PD tracking with gravity compensation plus environment loads.
  const Vec zero = Vec::Zero(model.n_joints);
  Vec tau_cmd = params.kp.cwiseProduct(q_target - state.q) - params.kd.cwiseProduct(state.dq) +
                dyn::rnea(model, state.q, zero, zero);
  tau_cmd = tau_cmd.cwiseMin(params.tau_max).cwiseMax(-params.tau_max);

  Vec f_env(2);
  f_env << contact.force.x() + attach_load.x(), contact.force.y() + attach_load.y();
  const Vec tau_env = J.transpose() * f_env;

  const Vec ddq = dyn::forward_dynamics(model, state.q, state.dq, tau_cmd + tau_env, model.gravity);
  state.dq += dt * ddq;
  state.q += dt * state.dq;

  for (int i = 0; i < model.n_joints; ++i) {
    if (std::abs(state.dq[i]) > params.velocity_limit[i]) {
      state.fault_count += 1;
      break;  // at most one fault per tick
    }
  }
  return contact;
}

void apply_drop_perturbation(FollowerState& state, SceneSpec& scene, double shift) {
  state.attached = false;
  state.object_lift = 0.0;
  state.press_time = 0.0;
  state.lift_hold = 0.0;
  scene.object_x += shift;
}

// ---- default rigs ----------------------------------------------------------

ChainModel default_follower_model() {
  ChainModel m;
  m.n_joints = 3;
  m.length = {0.45, 0.40, 0.25};
  m.com_offset = {0.225, 0.20, 0.125};
  m.mass = {2.0, 1.2, 0.6};
  m.inertia = {0.034, 0.016, 0.003};
  m.q_min = {-2.9, -2.9, -2.9};
  m.q_max = {2.9, 2.9, 2.9};
  m.validate();
  return m;
}

ChainModel default_leader_model() {
  ChainModel m = default_follower_model();
  for (auto& v : m.mass) v *= 0.3;
  for (auto& v : m.inertia) v *= 0.3;
  return m;
}

FollowerParams default_follower_params(const ChainModel& model) {
  const int n = model.n_joints;
  FollowerParams p;
  // Gains scale with the joint-space inertia so the explicit damping term
  // stays well inside the 500 Hz stability bound on the light wrist joint.
  p.kp = Vec(n);
  p.kd = Vec(n);
  p.kp << 240.0, 120.0, 24.0;
  p.kd << 24.0, 12.0, 2.4;
  p.velocity_limit = Vec::Constant(n, 2.5);
  p.tau_max = Vec::Constant(n, 80.0);
  return p;
}

ctl::ControllerGains default_leader_gains(const ChainModel& leader, const ChainModel& follower) {
  (void)follower;
  const int n = leader.n_joints;
  ctl::ControllerGains g;
  g.mu_f = 0.5;
  // Ratio of leader to follower actuator strength.
  g.k_fp = Vec::Constant(n, 24.0 / 80.0);
  // Damping and posture gains scale with joint inertia, as for the follower.
  g.k_fd = Vec(n);
  g.k_fd << 2.4, 1.2, 0.12;
  g.k_np = Vec(n);
  g.k_np << 3.0, 1.5, 0.3;
  g.k_nd = Vec(n);
  g.k_nd << 0.6, 0.3, 0.06;
  g.q_rest = default_start_posture();
  g.tau_max = Vec::Constant(n, 24.0);
  g.friction.mu_s = Vec::Constant(n, 0.0);
  g.friction.dq_s = Vec::Constant(n, 0.02);
  g.friction.mu_c = Vec::Constant(n, 0.05);
  g.friction.mu_v = Vec::Constant(n, 0.02);
  g.limit.eta_limit = 0.01;
  g.limit.delta_q = 0.25;
  g.pinv_damping = 1e-6;
  return g;
}

Vec default_start_posture() {
  Vec q(3);
  q << 0.45, -1.7, -0.9;
  return q;
}

SceneSpec sample_scene(const std::string& task, const std::vector<int>& texture_pool, Rng& rng) {
  SceneSpec s;
  s.task = task;
  s.object_x = rng.uniform(0.18, 0.55);
  s.object_half_width = rng.uniform(0.10, 0.17);
  s.object_height = rng.uniform(0.300, 0.335);  // sub-pixel variation at 32x32
  s.texture_id = texture_pool[rng.uniform_index(texture_pool.size())];
  s.seed = rng.next_u64();
  s.validate();
  return s;
}

EpisodeRecord run_expert_episode(const ChainModel& model, const FollowerParams& params,
                                 const SceneSpec& scene_in, const EpisodeConfig& cfg,
                                 std::uint64_t seed) {
  SceneSpec scene = scene_in;
  cfg.apply_material(scene);
  scene.validate();
  Rng rng(seed);

  FollowerState fs;
  fs.q = default_start_posture();
  for (int i = 0; i < fs.q.size(); ++i) fs.q[i] += rng.uniform(-cfg.start_jitter, cfg.start_jitter);
  fs.dq = Vec::Zero(model.n_joints);

  ExpertState ex = expert_init(fs.q);

  EpisodeRecord ep;
  ep.image_h = cfg.image_h;
  ep.image_w = cfg.image_w;
  ep.channels = 1;
  ep.n_joints = model.n_joints;
  ep.action_dim = model.n_joints;
  ep.task = scene.task;
  ep.texture_id = scene.texture_id;
  ep.seed = seed;

  const double dt = 1.0 / cfg.control_hz;
  const int total_ticks = static_cast<int>(cfg.duration * cfg.control_hz);
  const CameraView cam;

  Vec q_target = fs.q;
  ContactInfo contact;
  for (int tick = 0; tick < total_ticks; ++tick) {
    if (tick % cfg.obs_stride == 0) {
      const auto image = render(scene, fs.object_lift, model, fs.q, cfg.image_h, cfg.image_w, cam);
      const Vec2 f_sensed =
          contact.force + (fs.attached ? Vec2(0.0, -scene.object_mass * 9.81) : Vec2(0.0, 0.0));
      const Vec tau = external_torque(model, fs.q, f_sensed, params.contact_noise_std, &rng);
      q_target = expert_step(ex, scene.task, image, tau, model, cfg.expert, cam, dt * cfg.obs_stride);

      ep.images.push_back(image);
      ep.tau_ext.push_back(tau);
      ep.targets.push_back(q_target);
      ep.phases.push_back(static_cast<int>(ex.phase));
    }
    contact = step_follower(fs, q_target, model, params, scene, cfg.task, dt);
  }

  ep.success = fs.succeeded && !fs.crushed;
  ep.fault_count = fs.fault_count;
  ep.check_consistent();
  return ep;
}

}  // namespace factr::sim
