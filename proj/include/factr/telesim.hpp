#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "factr/chain.hpp"
#include "factr/episode.hpp"
#include "factr/leader_control.hpp"
#include "factr/rng.hpp"

namespace factr::sim {

using dyn::ChainModel;
using dyn::Mat;
using dyn::Vec;
using dyn::Vec2;

// ---- scene ---------------------------------------------------------------

struct SceneSpec {
  std::string task = "touch_lift";  // touch_lift | roll | empty
  double object_x = 0.35;           // center of the object, m
  double object_half_width = 0.16;
  double object_height = 0.32;  // top surface above the table
  double object_mass = 1.0;
  int texture_id = 0;
  double table_height = 0.0;
  double contact_stiffness = 3000.0;  // N/m
  double contact_damping = 40.0;      // N s/m
  double friction_mu = 0.5;           // tangential Coulomb coefficient
  std::uint64_t seed = 0;
  // Step scenarios (teleop): optional second, lower top surface to the right
  // of step_x.
  std::optional<double> step_x;
  double step_height = 0.2;

  bool has_object() const { return task != "empty"; }
  double top_at(double x) const {
    return (step_x && x > *step_x) ? step_height : object_height;
  }
  void validate() const;
};

// Texture ids 0..3 are the training split, 4..9 the held-out test split.
inline constexpr int kTrainTextures[] = {0, 1, 2, 3};
inline constexpr int kTestTextures[] = {4, 5, 6, 7, 8, 9};
inline constexpr int kNumTextures = 10;

// Arm base position in world coordinates; chain kinematics are relative to it.
inline const Vec2 kArmBase{0.0, 0.9};

// ---- camera / rendering ---------------------------------------------------

struct CameraView {
  double x_min = -0.3, x_max = 1.0;
  double y_min = -0.1, y_max = 1.2;
};

double world_to_col(double x, const CameraView& cam, int w);
double world_to_row(double y, const CameraView& cam, int h);
double col_to_world(double col, const CameraView& cam, int w);

// Deterministic rasterization: background, table band, textured object
// rectangle, arm links on top. Single channel in [0, 1].
curriculum::Image render(const SceneSpec& scene, double object_lift, const ChainModel& model,
                         const Vec& q, int h = 32, int w = 32, const CameraView& cam = {});

// ---- follower plant --------------------------------------------------------

struct FollowerParams {
  Vec kp;
  Vec kd;
  Vec velocity_limit;  // rad/s, exceeding any entry counts one fault tick
  Vec tau_max;
  double contact_noise_std = 0.0;  // N*m added to the torque sensor
};

struct ContactInfo {
  bool in_contact = false;
  bool on_object = false;
  Vec2 force{0.0, 0.0};  // force applied to the arm at the end-effector
  double penetration = 0.0;
};

struct FollowerState {
  Vec q;
  Vec dq;
  int fault_count = 0;
  // touch_lift task state
  bool attached = false;
  double object_lift = 0.0;
  double press_time = 0.0;
  bool crushed = false;
  bool succeeded = false;
  double lift_hold = 0.0;
  // roll task state
  double band_time = 0.0;
  int reversals = 0;
  double last_vx = 0.0;
  bool object_contact_seen = false;
};

struct TaskParams {
  // touch_lift
  double press_lo = 3.0, press_hi = 28.0;
  double press_duration = 0.2;
  double lift_height = 0.12;
  double hold_duration = 0.4;
  double crush_force = 50.0;
  // roll
  double band_lo = 3.0, band_hi = 9.0;
  double roll_span = 0.08;
  double roll_duration = 2.0;
  int roll_reversals = 3;
};

// Penalty contact force on the end-effector for the current scene and object
// lift offset. Normal forces only, never attractive.
ContactInfo contact_force(const SceneSpec& scene, double object_lift, const Vec2& ee,
                          const Vec2& ee_vel);

// One control tick: PD tracking toward q_target with gravity compensation,
// penalty contact, attachment load, semi-implicit Euler, fault counting, and
// the per-task success bookkeeping.
ContactInfo step_follower(FollowerState& state, const Vec& q_target, const ChainModel& model,
                          const FollowerParams& params, const SceneSpec& scene,
                          const TaskParams& task, double dt);

// Joint torque induced by an end-effector force, plus sensor noise when a
// generator is supplied.
Vec external_torque(const ChainModel& model, const Vec& q, const Vec2& force, double noise_std = 0.0,
                    Rng* rng = nullptr);

// Scripted knock-down used by recovery evaluation: detach the object and put
// it back on the table, shifted sideways.
void apply_drop_perturbation(FollowerState& state, SceneSpec& scene, double shift = -0.05);

// ---- scripted expert --------------------------------------------------------

struct ExpertParams {
  double cruise_y = 0.55;
  double locate_speed = 0.5;
  double descend_speed = 0.45;
  double creep_speed = 0.09;   // final approach below the vision height guess
  double creep_margin = 0.02;  // start creeping this far above the seen top
  double lift_speed = 0.35;
  double contact_threshold = 1.0;  // ||tau_ext|| that flips descend -> press
  double force_target = 10.0;      // touch_lift press servo target, N
  double press_lo = 3.0;           // mirror of the task attach band
  double press_hi = 28.0;
  double roll_force_target = 6.0;
  double press_settle = 0.3;  // in-band time before lifting, s
  double lift_to = 0.55;
  double ik_damping = 5e-3;
  double posture_gain = 1.5;
  double max_joint_speed = 1.2;
  double roll_period = 0.9;
  double roll_span = 0.08;
};

struct ExpertState {
  Phase phase = Phase::locate;
  Vec q_cmd;          // integrated joint command, the recorded target
  double x_estimate = 0.0;
  double top_estimate = 0.5;  // coarse, vision-derived, locked at descend
  bool x_locked = false;
  double in_band = 0.0;
  double roll_clock = 0.0;
  double roll_center = 0.0;
  double time = 0.0;
};

ExpertState expert_init(const Vec& q_start);

// Finite-state expert; object x comes from the rendered image, phase flips
// from the torque signal, never from privileged scene state.
Vec expert_step(ExpertState& state, const std::string& task, const curriculum::Image& image,
                const Vec& tau_ext, const ChainModel& model, const ExpertParams& params,
                const CameraView& cam, double dt);

// Vision-side object localization shared by the expert: centroid of
// non-background pixels in the object band of the image.
std::optional<double> locate_object_x(const curriculum::Image& image, const CameraView& cam);

// Coarse top-surface height from the image (pixel-quantized; only good for
// shaping the descent profile, never for phase decisions).
std::optional<double> locate_object_top(const curriculum::Image& image, const CameraView& cam);

// ---- default rigs ---------------------------------------------------------

ChainModel default_follower_model();
ChainModel default_leader_model();
FollowerParams default_follower_params(const ChainModel& model);
ctl::ControllerGains default_leader_gains(const ChainModel& leader, const ChainModel& follower);
Vec default_start_posture();

// ---- demonstration episodes -------------------------------------------------

struct EpisodeConfig {
  double duration = 5.0;       // s
  double recovery_extra = 4.0; // extra time after a drop perturbation
  int control_hz = 500;
  int obs_stride = 10;  // observation/command rate = control_hz / stride
  int image_h = 32;
  int image_w = 32;
  TaskParams task;
  ExpertParams expert;
  double start_jitter = 0.04;  // rad, uniform per-episode start offset
  // Contact material applied to sampled scenes.
  double contact_stiffness = 3000.0;
  double contact_damping = 40.0;
  double friction_mu = 0.5;

  void apply_material(SceneSpec& scene) const {
    scene.contact_stiffness = contact_stiffness;
    scene.contact_damping = contact_damping;
    scene.friction_mu = friction_mu;
  }
};

SceneSpec sample_scene(const std::string& task, const std::vector<int>& texture_pool, Rng& rng);

// Runs the scripted expert closed loop and records observations at the
// observation rate. The record's success flag is the task tracker's verdict.
EpisodeRecord run_expert_episode(const ChainModel& model, const FollowerParams& params,
                                 const SceneSpec& scene, const EpisodeConfig& cfg,
                                 std::uint64_t seed);

// ---- bilateral teleoperation -------------------------------------------------

struct TeleopScenario {
  int id = 0;
  double object_x = 0.35;
  double object_half_width = 0.2;
  double object_height = 0.34;
  double step_drop = 0.12;     // height lost at the step
  double press_depth = 0.05;   // reference depth below the local surface
  double slide_speed = 0.3;    // m/s
  bool left_to_right = true;
  double stiffness = 8000.0;
};

// The committed contact-maintenance scenario set.
std::vector<TeleopScenario> teleop_scenarios();

struct TeleopMetrics {
  int scenario_id = 0;
  bool feedback = false;
  int fault_count = 0;
  double contact_retention = 0.0;  // contacted fraction of the press window
  bool completed = false;
  double max_penetration = 0.0;
  std::uint64_t precontact_digest = 0;  // leader trajectory hash up to first contact
};

// Spring-damper virtual operator drags the leader end-effector along the
// scenario reference; the follower tracks the leader; external torques come
// back as force feedback when enabled. When telemetry_csv is non-null it
// receives per-tick rows of all five torque components plus the raw and
// clamped sums.
TeleopMetrics run_teleop_episode(const TeleopScenario& scenario, bool feedback_enabled,
                                 std::uint64_t seed, std::string* telemetry_csv = nullptr);

}  // namespace factr::sim
