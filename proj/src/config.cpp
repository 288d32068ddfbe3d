#include "factr/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "factr/rng.hpp"

namespace factr::harness {

namespace {

enum class Kind { real, integer, boolean, text, choice, real_list, int_list };

struct SchemaEntry {
  const char* key;
  Kind kind;
  const char* preset;
  const char* choices;  // pipe separated, for Kind::choice
};

// The full key set. Defaults follow the reported training hyperparameters
// where the system has them and desk-scale choices elsewhere.
const SchemaEntry kSchema[] = {
    {"seed", Kind::integer, "0", nullptr},

    {"chain.lengths", Kind::real_list, "0.45,0.40,0.25", nullptr},
    {"chain.com_offsets", Kind::real_list, "0.225,0.20,0.125", nullptr},
    {"chain.masses", Kind::real_list, "2.0,1.2,0.6", nullptr},
    {"chain.inertias", Kind::real_list, "0.034,0.016,0.003", nullptr},
    {"chain.q_min", Kind::real_list, "-2.9,-2.9,-2.9", nullptr},
    {"chain.q_max", Kind::real_list, "2.9,2.9,2.9", nullptr},
    {"chain.gravity", Kind::real_list, "0.0,-9.81", nullptr},

    {"leader.mass_scale", Kind::real, "0.3", nullptr},
    {"leader.mu_f", Kind::real, "0.5", nullptr},
    {"leader.k_fp", Kind::real_list, "0.3,0.3,0.3", nullptr},
    {"leader.k_fd", Kind::real_list, "2.4,1.2,0.12", nullptr},
    {"leader.k_np", Kind::real_list, "3.0,1.5,0.3", nullptr},
    {"leader.k_nd", Kind::real_list, "0.6,0.3,0.06", nullptr},
    {"leader.q_rest", Kind::real_list, "0.45,-1.7,-0.9", nullptr},
    {"leader.tau_max", Kind::real, "24.0", nullptr},
    {"leader.friction.mu_s", Kind::real, "0.0", nullptr},
    {"leader.friction.dq_s", Kind::real, "0.02", nullptr},
    {"leader.friction.mu_c", Kind::real, "0.05", nullptr},
    {"leader.friction.mu_v", Kind::real, "0.02", nullptr},
    {"leader.friction.f_loop", Kind::real, "500.0", nullptr},
    {"leader.friction.literal_dither", Kind::boolean, "false", nullptr},
    {"leader.limit.eta", Kind::real, "0.01", nullptr},
    {"leader.limit.delta_q", Kind::real, "0.25", nullptr},
    {"leader.grav_mode", Kind::choice, "gravity_only", "gravity_only|full_dynamics"},
    {"leader.pinv_damping", Kind::real, "1e-6", nullptr},

    {"follower.kp", Kind::real_list, "240.0,120.0,24.0", nullptr},
    {"follower.kd", Kind::real_list, "24.0,12.0,2.4", nullptr},
    {"follower.velocity_limit", Kind::real, "2.5", nullptr},
    {"follower.tau_max", Kind::real, "80.0", nullptr},
    {"follower.contact_noise_std", Kind::real, "0.0", nullptr},

    {"scene.stiffness", Kind::real, "3000.0", nullptr},
    {"scene.damping", Kind::real, "40.0", nullptr},
    {"scene.friction_mu", Kind::real, "0.5", nullptr},

    {"episode.duration", Kind::real, "5.0", nullptr},
    {"episode.recovery_extra", Kind::real, "4.0", nullptr},
    {"episode.control_hz", Kind::integer, "500", nullptr},
    {"episode.obs_stride", Kind::integer, "10", nullptr},
    {"episode.image", Kind::integer, "32", nullptr},
    {"episode.start_jitter", Kind::real, "0.04", nullptr},

    {"data.task", Kind::choice, "touch_lift", "touch_lift|roll"},
    {"data.episodes", Kind::integer, "50", nullptr},
    {"data.min_success_rate", Kind::real, "0.8", nullptr},

    {"curriculum.space", Kind::choice, "latent", "pixel|latent"},
    {"curriculum.operator", Kind::choice, "gaussian_blur", "gaussian_blur|downsample"},
    {"curriculum.sigma0", Kind::real, "4.0", nullptr},
    {"curriculum.scheduler", Kind::choice, "linear", "constant|linear|cosine|exponential|step"},
    {"curriculum.warmup_steps", Kind::integer, "2000", nullptr},
    {"curriculum.exp_gamma", Kind::real, "0.9997", nullptr},
    {"curriculum.d_steps", Kind::integer, "4", nullptr},

    {"model.d", Kind::integer, "64", nullptr},
    {"model.heads", Kind::integer, "4", nullptr},
    {"model.enc_layers", Kind::integer, "2", nullptr},
    {"model.dec_layers", Kind::integer, "2", nullptr},
    {"model.ff_mult", Kind::integer, "4", nullptr},
    {"model.patch", Kind::integer, "8", nullptr},
    {"model.chunk", Kind::integer, "16", nullptr},
    {"model.force_hidden", Kind::integer, "64", nullptr},
    {"model.force_scale", Kind::real, "0.1", nullptr},
    {"model.learned_pos", Kind::boolean, "false", nullptr},
    {"model.vision_only", Kind::boolean, "false", nullptr},
    {"model.split_softmax_trace", Kind::boolean, "false", nullptr},

    {"train.lr", Kind::real, "3e-4", nullptr},
    {"train.weight_decay", Kind::real, "0.05", nullptr},
    {"train.beta1", Kind::real, "0.9", nullptr},
    {"train.beta2", Kind::real, "0.95", nullptr},
    {"train.batch", Kind::integer, "32", nullptr},
    {"train.steps", Kind::integer, "20000", nullptr},
    {"train.warmup", Kind::integer, "500", nullptr},
    {"train.augment", Kind::boolean, "false", nullptr},

    {"eval.trials_per_texture", Kind::integer, "5", nullptr},
    {"eval.recovery", Kind::boolean, "true", nullptr},

    {"experiment.seeds", Kind::int_list, "0,1,2,3,4", nullptr},
    {"experiment.variants", Kind::text, "vision_only,vision_force,curriculum", nullptr},
    {"experiment.ablation", Kind::boolean, "false", nullptr},
    {"experiment.ablation_steps", Kind::integer, "4000", nullptr},
    {"experiment.workers", Kind::integer, "2", nullptr},

    {"ntk.sigma", Kind::real, "2.0", nullptr},
    {"ntk.eta", Kind::real, "0.5", nullptr},

    {"schedule.n", Kind::integer, "100", nullptr},
    {"schedule.warmup", Kind::integer, "0", nullptr},
};

const SchemaEntry* find_entry(const std::string& key) {
  for (const auto& e : kSchema) {
    if (key == e.key) return &e;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  raise(ErrorKind::config, "key " + key + " expects a boolean, got '" + v + "'");
}

double parse_real(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    raise(ErrorKind::config, "key " + key + " expects a number, got '" + v + "'");
  }
  if (pos != v.size()) raise(ErrorKind::config, "key " + key + " expects a number, got '" + v + "'");
  return out;
}

long parse_int(const std::string& v, const std::string& key) {
  std::size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    raise(ErrorKind::config, "key " + key + " expects an integer, got '" + v + "'");
  }
  if (pos != v.size()) raise(ErrorKind::config, "key " + key + " expects an integer, got '" + v + "'");
  return out;
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

void validate_value(const SchemaEntry& e, const std::string& value) {
  switch (e.kind) {
    case Kind::real:
      parse_real(value, e.key);
      break;
    case Kind::integer:
      parse_int(value, e.key);
      break;
    case Kind::boolean:
      parse_bool(value, e.key);
      break;
    case Kind::text:
      break;
    case Kind::choice: {
      const auto options = [&] {
        std::vector<std::string> out;
        std::stringstream ss(e.choices);
        std::string item;
        while (std::getline(ss, item, '|')) out.push_back(item);
        return out;
      }();
      if (std::find(options.begin(), options.end(), value) == options.end()) {
        raise(ErrorKind::config,
              "key " + std::string(e.key) + " must be one of {" + e.choices + "}, got '" + value + "'");
      }
      break;
    }
    case Kind::real_list:
      for (const auto& p : split_commas(value)) parse_real(p, e.key);
      break;
    case Kind::int_list:
      for (const auto& p : split_commas(value)) parse_int(p, e.key);
      break;
  }
}

}  // namespace

Config Config::defaults() {
  Config cfg;
  for (const auto& e : kSchema) cfg.values_[e.key] = e.preset;
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) raise(ErrorKind::io, "cannot open config file: " + path);
  Config cfg = defaults();
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raise(ErrorKind::config, path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  const auto* entry = find_entry(key);
  if (entry == nullptr) raise(ErrorKind::config, "unknown config key '" + key + "'");
  validate_value(*entry, value);
  values_[key] = value;
}

void Config::apply_overrides(const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) raise(ErrorKind::config, "override '" + kv + "' is not key=value");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) raise(ErrorKind::config, "unknown config key '" + key + "'");
  return it->second;
}

double Config::real(const std::string& key) const { return parse_real(str(key), key); }
long Config::integer(const std::string& key) const { return parse_int(str(key), key); }
bool Config::boolean(const std::string& key) const { return parse_bool(str(key), key); }

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& p : split_commas(str(key))) out.push_back(parse_real(p, key));
  return out;
}

std::vector<long> Config::integers(const std::string& key) const {
  std::vector<long> out;
  for (const auto& p : split_commas(str(key))) out.push_back(parse_int(p, key));
  return out;
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

std::uint64_t Config::hash() const {
  const std::string s = serialize();
  return fnv1a64(s.data(), s.size());
}

// ---- builders ---------------------------------------------------------------

dyn::ChainModel chain_from(const Config& cfg) {
  dyn::ChainModel m;
  const auto lengths = cfg.reals("chain.lengths");
  m.n_joints = static_cast<int>(lengths.size());
  m.length = lengths;
  m.com_offset = cfg.reals("chain.com_offsets");
  m.mass = cfg.reals("chain.masses");
  m.inertia = cfg.reals("chain.inertias");
  m.q_min = cfg.reals("chain.q_min");
  m.q_max = cfg.reals("chain.q_max");
  const auto g = cfg.reals("chain.gravity");
  if (g.size() != 2) raise(ErrorKind::config, "chain.gravity expects two entries");
  m.gravity = dyn::Vec2(g[0], g[1]);
  m.validate();
  return m;
}

dyn::ChainModel leader_chain_from(const Config& cfg) {
  dyn::ChainModel m = chain_from(cfg);
  const double scale = cfg.real("leader.mass_scale");
  for (auto& v : m.mass) v *= scale;
  for (auto& v : m.inertia) v *= scale;
  m.validate();
  return m;
}

namespace {

dyn::Vec to_vec(const std::vector<double>& v) {
  dyn::Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

}  // namespace

ctl::ControllerGains leader_gains_from(const Config& cfg) {
  const auto leader = leader_chain_from(cfg);
  ctl::ControllerGains g;
  g.mu_f = cfg.real("leader.mu_f");
  g.k_fp = to_vec(cfg.reals("leader.k_fp"));
  g.k_fd = to_vec(cfg.reals("leader.k_fd"));
  g.k_np = to_vec(cfg.reals("leader.k_np"));
  g.k_nd = to_vec(cfg.reals("leader.k_nd"));
  g.q_rest = to_vec(cfg.reals("leader.q_rest"));
  g.tau_max = dyn::Vec::Constant(leader.n_joints, cfg.real("leader.tau_max"));
  g.friction.mu_s = dyn::Vec::Constant(leader.n_joints, cfg.real("leader.friction.mu_s"));
  g.friction.dq_s = dyn::Vec::Constant(leader.n_joints, cfg.real("leader.friction.dq_s"));
  g.friction.mu_c = dyn::Vec::Constant(leader.n_joints, cfg.real("leader.friction.mu_c"));
  g.friction.mu_v = dyn::Vec::Constant(leader.n_joints, cfg.real("leader.friction.mu_v"));
  g.friction.f_loop = cfg.real("leader.friction.f_loop");
  g.friction.literal_dither = cfg.boolean("leader.friction.literal_dither");
  g.limit.eta_limit = cfg.real("leader.limit.eta");
  g.limit.delta_q = cfg.real("leader.limit.delta_q");
  g.grav_mode = cfg.str("leader.grav_mode") == "full_dynamics" ? ctl::GravityMode::full_dynamics
                                                               : ctl::GravityMode::gravity_only;
  g.pinv_damping = cfg.real("leader.pinv_damping");
  g.validate(leader);
  return g;
}

sim::FollowerParams follower_from(const Config& cfg) {
  const auto chain = chain_from(cfg);
  sim::FollowerParams p;
  p.kp = to_vec(cfg.reals("follower.kp"));
  p.kd = to_vec(cfg.reals("follower.kd"));
  p.velocity_limit = dyn::Vec::Constant(chain.n_joints, cfg.real("follower.velocity_limit"));
  p.tau_max = dyn::Vec::Constant(chain.n_joints, cfg.real("follower.tau_max"));
  p.contact_noise_std = cfg.real("follower.contact_noise_std");
  if (p.kp.size() != chain.n_joints || p.kd.size() != chain.n_joints) {
    raise(ErrorKind::config, "follower gains must match chain.n_joints");
  }
  return p;
}

sim::EpisodeConfig episode_from(const Config& cfg) {
  sim::EpisodeConfig e;
  e.duration = cfg.real("episode.duration");
  e.recovery_extra = cfg.real("episode.recovery_extra");
  e.control_hz = static_cast<int>(cfg.integer("episode.control_hz"));
  e.obs_stride = static_cast<int>(cfg.integer("episode.obs_stride"));
  e.image_h = e.image_w = static_cast<int>(cfg.integer("episode.image"));
  e.start_jitter = cfg.real("episode.start_jitter");
  e.contact_stiffness = cfg.real("scene.stiffness");
  e.contact_damping = cfg.real("scene.damping");
  e.friction_mu = cfg.real("scene.friction_mu");
  if (e.control_hz <= 0 || e.obs_stride <= 0) raise(ErrorKind::config, "bad episode rates");
  return e;
}

curriculum::CurriculumConfig curriculum_from(const Config& cfg, long total_steps) {
  curriculum::CurriculumConfig c;
  c.space = cfg.str("curriculum.space") == "pixel" ? curriculum::CurriculumSpace::pixel
                                                   : curriculum::CurriculumSpace::latent;
  c.op = cfg.str("curriculum.operator") == "downsample" ? curriculum::OperatorType::downsample
                                                        : curriculum::OperatorType::gaussian_blur;
  c.sigma0 = cfg.real("curriculum.sigma0");
  const auto& sched = cfg.str("curriculum.scheduler");
  if (sched == "constant") c.scheduler = curriculum::SchedulerType::constant;
  else if (sched == "linear") c.scheduler = curriculum::SchedulerType::linear;
  else if (sched == "cosine") c.scheduler = curriculum::SchedulerType::cosine;
  else if (sched == "exponential") c.scheduler = curriculum::SchedulerType::exponential;
  else c.scheduler = curriculum::SchedulerType::step;
  c.total_steps = total_steps;
  c.warmup_steps = std::min(cfg.integer("curriculum.warmup_steps"), total_steps - 1);
  c.exp_gamma = cfg.real("curriculum.exp_gamma");
  c.d_steps = static_cast<int>(cfg.integer("curriculum.d_steps"));
  c.validate();
  return c;
}

policy::ModelConfig model_from(const Config& cfg) {
  const auto chain = chain_from(cfg);
  policy::ModelConfig m;
  m.image_h = m.image_w = static_cast<int>(cfg.integer("episode.image"));
  m.patch = static_cast<int>(cfg.integer("model.patch"));
  m.n_joints = chain.n_joints;
  m.action_dim = chain.n_joints;
  m.d_model = static_cast<int>(cfg.integer("model.d"));
  m.heads = static_cast<int>(cfg.integer("model.heads"));
  m.enc_layers = static_cast<int>(cfg.integer("model.enc_layers"));
  m.dec_layers = static_cast<int>(cfg.integer("model.dec_layers"));
  m.ff_mult = static_cast<int>(cfg.integer("model.ff_mult"));
  m.chunk = static_cast<int>(cfg.integer("model.chunk"));
  m.force_hidden = static_cast<int>(cfg.integer("model.force_hidden"));
  m.force_scale = cfg.real("model.force_scale");
  m.learned_pos = cfg.boolean("model.learned_pos");
  m.vision_only = cfg.boolean("model.vision_only");
  m.split_softmax_trace = cfg.boolean("model.split_softmax_trace");
  m.validate();
  return m;
}

policy::TrainConfig train_from(const Config& cfg) {
  policy::TrainConfig t;
  t.lr = cfg.real("train.lr");
  t.weight_decay = cfg.real("train.weight_decay");
  t.beta1 = cfg.real("train.beta1");
  t.beta2 = cfg.real("train.beta2");
  t.batch_size = static_cast<int>(cfg.integer("train.batch"));
  t.total_steps = cfg.integer("train.steps");
  t.warmup_steps = cfg.integer("train.warmup");
  t.augment = cfg.boolean("train.augment");
  t.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  t.validate();
  return t;
}

}  // namespace factr::harness
