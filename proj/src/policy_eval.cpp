#include <cmath>
#include <memory>

#include "factr/policy.hpp"

namespace factr::policy {

using sim::CameraView;
using sim::ContactInfo;
using sim::FollowerState;
using sim::SceneSpec;

namespace {

struct TickStats {
  double contact_mass_sum = 0.0;
  int contact_ticks = 0;
  double pre_mass_sum = 0.0;
  int pre_ticks = 0;
  bool contact_seen = false;
};

}  // namespace

EvalResult evaluate_rollouts(const PolicyFactory& factory, int chunk, const EvalConfig& cfg,
                             const sim::ChainModel& model, const sim::FollowerParams& params) {
  if (chunk < 1) raise(ErrorKind::invalid_argument, "chunk must be >= 1");
  EvalResult out;
  Rng scene_rng(cfg.seed);
  const CameraView cam;
  const double dt = 1.0 / cfg.episode.control_hz;

  for (int texture : cfg.texture_pool) {
    for (int trial = 0; trial < cfg.trials_per_texture; ++trial) {
      SceneSpec scene = sim::sample_scene(cfg.task, {texture}, scene_rng);
      cfg.episode.apply_material(scene);
      TrialResult res;
      res.texture_id = texture;
      res.scene_seed = scene.seed;

      Rng ep_rng(scene.seed);
      FollowerState fs;
      fs.q = sim::default_start_posture();
      for (int i = 0; i < fs.q.size(); ++i) {
        fs.q[i] += ep_rng.uniform(-cfg.episode.start_jitter, cfg.episode.start_jitter);
      }
      fs.dq = Vec::Zero(model.n_joints);

      PolicyFn policy = factory(fs.q);
      Vec q_target = fs.q;
      Mat chunk_targets;
      int chunk_pos = chunk;  // force a query on the first observation tick
      AttentionTrace trace;

      TickStats stats;
      ContactInfo contact;
      bool dropped = false;
      int obs_index = 0;

      const double base_duration = cfg.episode.duration;
      const double total_duration =
          cfg.recovery_mode ? base_duration + cfg.episode.recovery_extra : base_duration;
      const int total_ticks = static_cast<int>(total_duration * cfg.episode.control_hz);

      for (int tick = 0; tick < total_ticks; ++tick) {
        if (tick % cfg.episode.obs_stride == 0) {
          if (chunk_pos >= chunk) {
            const auto image =
                sim::render(scene, fs.object_lift, model, fs.q, cfg.episode.image_h,
                            cfg.episode.image_w, cam);
            const sim::Vec2 sensed =
                contact.force +
                (fs.attached ? sim::Vec2(0.0, -scene.object_mass * 9.81) : sim::Vec2(0.0, 0.0));
            const Vec tau =
                sim::external_torque(model, fs.q, sensed, params.contact_noise_std, &ep_rng);
            chunk_targets = policy(image, tau, &trace);
            if (chunk_targets.rows() != chunk || chunk_targets.cols() != model.n_joints) {
              raise(ErrorKind::invalid_argument, "controller returned a bad chunk shape");
            }
            chunk_pos = 0;
          }
          q_target = chunk_targets.row(chunk_pos).transpose();
          chunk_pos += 1;

          const bool in_obj_contact = contact.on_object || fs.attached;
          if (!trace.force_mass.empty()) {
            const double fm = trace.force_mass.front().mean();
            const double vm = trace.vision_mass.front().mean();
            for (std::size_t layer = 0; layer < trace.force_mass.size(); ++layer) {
              AttnSample s;
              s.t = obs_index;
              s.layer = static_cast<int>(layer);
              s.vision_mass = trace.vision_mass[layer].mean();
              s.force_mass = trace.force_mass[layer].mean();
              s.contact = in_obj_contact;
              res.trace.push_back(s);
            }
            (void)vm;
            if (in_obj_contact) {
              stats.contact_mass_sum += fm;
              stats.contact_ticks += 1;
            } else if (!stats.contact_seen) {
              stats.pre_mass_sum += fm;
              stats.pre_ticks += 1;
            }
          }
          if (in_obj_contact) stats.contact_seen = true;
          obs_index += 1;
        }

        contact = sim::step_follower(fs, q_target, model, params, scene, cfg.episode.task, dt);

        if (cfg.recovery_mode && !dropped && fs.succeeded) {
          // Scripted knock-down; the second attempt starts here.
          const double shift = scene.object_x > 0.30 ? -0.05 : 0.05;
          sim::apply_drop_perturbation(fs, scene, shift);
          fs.succeeded = false;
          res.success = true;
          dropped = true;
        }
      }

      if (cfg.recovery_mode) {
        res.recovery_success = dropped && fs.succeeded && !fs.crushed;
        res.success = res.success && !fs.crushed;
      } else {
        res.success = fs.succeeded && !fs.crushed;
      }
      res.fault_count = fs.fault_count;
      res.crushed = fs.crushed;
      res.contact_force_mass =
          stats.contact_ticks > 0 ? stats.contact_mass_sum / stats.contact_ticks : 0.0;
      res.precontact_force_mass = stats.pre_ticks > 0 ? stats.pre_mass_sum / stats.pre_ticks : 0.0;
      out.trials.push_back(std::move(res));
    }
  }

  int successes = 0, recoveries = 0;
  double cmass = 0.0, pmass = 0.0;
  int cmass_n = 0, pmass_n = 0;
  for (const auto& t : out.trials) {
    successes += t.success ? 1 : 0;
    recoveries += t.recovery_success ? 1 : 0;
    out.total_faults += t.fault_count;
    if (t.contact_force_mass > 0.0) {
      cmass += t.contact_force_mass;
      cmass_n += 1;
    }
    if (t.precontact_force_mass > 0.0) {
      pmass += t.precontact_force_mass;
      pmass_n += 1;
    }
  }
  const double n = static_cast<double>(out.trials.size());
  out.success_rate = n > 0 ? successes / n : 0.0;
  out.recovery_rate = n > 0 ? recoveries / n : 0.0;
  out.mean_contact_force_mass = cmass_n > 0 ? cmass / cmass_n : 0.0;
  out.mean_precontact_force_mass = pmass_n > 0 ? pmass / pmass_n : 0.0;
  return out;
}

EvalResult evaluate_policy(const Net& net, const EvalConfig& cfg, const sim::ChainModel& model,
                           const sim::FollowerParams& params) {
  const PolicyFactory factory = [&net](const Vec&) -> PolicyFn {
    return [&net](const curriculum::Image& image, const Vec& tau, AttentionTrace* trace) {
      return net.predict(image, tau, trace);
    };
  };
  return evaluate_rollouts(factory, net.config().chunk, cfg, model, params);
}

PolicyFactory expert_policy_factory(const sim::ChainModel& model, const sim::ExpertParams& params,
                                    const std::string& task) {
  return [&model, params, task](const Vec& q_start) -> PolicyFn {
    auto state = std::make_shared<sim::ExpertState>(sim::expert_init(q_start));
    const CameraView cam;
    return [&model, params, task, state, cam](const curriculum::Image& image, const Vec& tau,
                                              AttentionTrace* trace) {
      if (trace != nullptr) *trace = AttentionTrace{};
      const Vec target = sim::expert_step(*state, task, image, tau, model, params, cam, 0.02);
      Mat chunk(1, target.size());
      chunk.row(0) = target.transpose();
      return chunk;
    };
  };
}

}  // namespace factr::policy
