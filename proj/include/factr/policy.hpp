#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "factr/autodiff.hpp"
#include "factr/curriculum.hpp"
#include "factr/episode.hpp"
#include "factr/rng.hpp"

namespace factr::policy {

using autodiff::Mat;
using autodiff::Tape;
using Vec = Eigen::VectorXd;

struct ModelConfig {
  int image_h = 32;
  int image_w = 32;
  int channels = 1;
  int patch = 8;
  int n_joints = 3;
  int action_dim = 3;
  int d_model = 64;
  int heads = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int ff_mult = 4;
  int chunk = 16;  // action tokens / predicted steps per query
  int force_hidden = 64;
  double force_scale = 0.1;  // fixed input scaling for torque readings
  bool learned_pos = false;  // sin-cos by default
  bool vision_only = false;  // replace the force input with zeros
  bool split_softmax_trace = false;  // literal per-modality softmax, inspection only

  int tokens() const { return (image_h / patch) * (image_w / patch); }
  int patch_dim() const { return patch * patch * channels; }
  void validate() const;
};

// Per decoder layer, per action token: the share of cross-attention reaching
// the vision positions vs the force position, heads averaged. With the
// default single softmax over the concatenated memory the two sum to one.
struct AttentionTrace {
  std::vector<Vec> vision_mass;
  std::vector<Vec> force_mass;
};

struct TrainConfig {
  double lr = 3e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int batch_size = 32;
  long total_steps = 20000;
  long warmup_steps = 500;  // linear LR warm-up, then cosine decay
  bool augment = false;     // random resize-crop
  std::uint64_t seed = 0;

  void validate() const;
};

struct Param {
  std::string name;
  Mat value;
  Mat grad;  // accumulated over a batch
  Mat adam_m;
  Mat adam_v;
  bool decay = false;
};

// Optional curriculum transform applied to the vision tokens inside the
// forward pass (gradients flow through it into the patch embedding).
struct LatentOp {
  curriculum::OperatorType op = curriculum::OperatorType::gaussian_blur;
  double sigma = 0.0;
};

class Net {
 public:
  Net(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  struct ForwardResult {
    int pred = -1;  // tape id of the k x d_a prediction
    AttentionTrace trace;
    std::vector<int> param_ids;  // leaf id per parameter, same order as params()
  };

  ForwardResult forward(Tape& tape, const curriculum::Image& image, const Vec& tau_ext,
                        const LatentOp* latent_op = nullptr) const;

  // Plain inference without a caller-managed tape.
  Mat predict(const curriculum::Image& image, const Vec& tau_ext, AttentionTrace* trace = nullptr) const;

  void zero_grads();
  void accumulate_grads(const Tape& tape, const ForwardResult& fwd, double scale);

  struct AdamState {
    long step = 0;
  };
  // One AdamW update with warm-up + cosine decayed learning rate; returns the
  // learning rate used.
  double adamw_step(AdamState& state, const TrainConfig& tc);

  std::uint64_t parameter_count() const;

 private:
  int find(const std::string& name) const;
  ModelConfig cfg_;
  std::vector<Param> params_;
  Mat pos_encoding_;  // fixed table when learned_pos is false

  friend void save_checkpoint(const Net& net, const std::string& path, std::uint64_t config_hash);
  friend Net load_checkpoint(const std::string& path, std::uint64_t* config_hash_out);
};

void save_checkpoint(const Net& net, const std::string& path, std::uint64_t config_hash);
Net load_checkpoint(const std::string& path, std::uint64_t* config_hash_out = nullptr);
std::string inspect_checkpoint(const std::string& path);

// Mean squared error between a prediction and the label chunk.
double bc_loss(const Mat& pred, const Mat& labels);

// Label chunk q_{t:t+k}; episode end padded by repeating the final target.
Mat label_chunk(const EpisodeRecord& ep, std::size_t t, int k);

struct TrainLogRow {
  long step = 0;
  double sigma = 0.0;
  double loss = 0.0;
  double lr = 0.0;
  double force_mass = 0.0;  // first decoder layer, batch and token mean
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double final_loss = 0.0;
};

// Algorithm: per step sample a batch, query the scheduler, corrupt the
// vision stream (pixel before tokenize, latent after), regress the chunk
// labels, and apply AdamW.
TrainResult train_policy(Net& net, const std::vector<EpisodeRecord>& dataset,
                         const curriculum::CurriculumConfig* curr, const TrainConfig& tc);

}  // namespace factr::policy

#include "factr/telesim.hpp"

namespace factr::policy {

// One controller query: observation in, a chunk of joint targets out.
using PolicyFn = std::function<Mat(const curriculum::Image&, const Vec&, AttentionTrace*)>;
// Fresh controller per trial, told the start posture.
using PolicyFactory = std::function<PolicyFn(const Vec& q_start)>;

struct EvalConfig {
  std::string task = "touch_lift";
  std::vector<int> texture_pool{0, 1, 2, 3};
  int trials_per_texture = 5;
  bool recovery_mode = false;  // knock the object down after the first success
  std::uint64_t seed = 0;
  sim::EpisodeConfig episode;
};

struct AttnSample {
  int t = 0;
  int layer = 0;
  double vision_mass = 0.0;
  double force_mass = 0.0;
  bool contact = false;
};

struct TrialResult {
  int texture_id = 0;
  std::uint64_t scene_seed = 0;
  bool success = false;
  bool recovery_success = false;
  int fault_count = 0;
  bool crushed = false;
  double contact_force_mass = 0.0;     // first decoder layer, contact ticks
  double precontact_force_mass = 0.0;  // first decoder layer, before contact
  std::vector<AttnSample> trace;
};

struct EvalResult {
  std::vector<TrialResult> trials;
  double success_rate = 0.0;
  double recovery_rate = 0.0;
  int total_faults = 0;
  double mean_contact_force_mass = 0.0;
  double mean_precontact_force_mass = 0.0;
};

// Closed-loop rollouts with open-loop chunk execution: the controller is
// queried, its k targets run at the observation rate, then it is queried
// again.
EvalResult evaluate_rollouts(const PolicyFactory& factory, int chunk, const EvalConfig& cfg,
                             const sim::ChainModel& model, const sim::FollowerParams& params);

EvalResult evaluate_policy(const Net& net, const EvalConfig& cfg, const sim::ChainModel& model,
                           const sim::FollowerParams& params);

// The scripted expert behind the controller interface (chunk of one); the
// evaluation harness self-check.
PolicyFactory expert_policy_factory(const sim::ChainModel& model, const sim::ExpertParams& params,
                                    const std::string& task);

}  // namespace factr::policy
