#include "factr/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "factr/rng.hpp"

namespace factr::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'C', 'T', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_f32(std::ostream& os, float v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is, const char* field) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) {
    raise(ErrorKind::io, std::string("episode file truncated while reading ") + field);
  }
  return v;
}

float get_f32(std::istream& is, const char* field) {
  float v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) {
    raise(ErrorKind::io, std::string("episode file truncated while reading ") + field);
  }
  return v;
}

// Atomic write: stream into a sibling temp file, then rename over the target.
class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path)
      : final_(path), tmp_(path + ".tmp"), os_(tmp_, std::ios::binary | std::ios::trunc) {
    if (!os_) raise(ErrorKind::io, "cannot open for writing: " + tmp_);
  }
  std::ofstream& stream() { return os_; }
  void commit() {
    os_.flush();
    if (!os_) raise(ErrorKind::io, "short write to " + tmp_);
    os_.close();
    fs::rename(tmp_, final_);
  }

 private:
  std::string final_, tmp_;
  std::ofstream os_;
};

}  // namespace

void write_episode(const std::string& path, const EpisodeRecord& ep) {
  ep.check_consistent();
  AtomicFile file(path);
  auto& os = file.stream();
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(ep.length()));
  put_u32(os, static_cast<std::uint32_t>(ep.image_h));
  put_u32(os, static_cast<std::uint32_t>(ep.image_w));
  put_u32(os, static_cast<std::uint32_t>(ep.channels));
  put_u32(os, static_cast<std::uint32_t>(ep.n_joints));
  put_u32(os, static_cast<std::uint32_t>(ep.action_dim));
  for (std::size_t t = 0; t < ep.length(); ++t) {
    for (double v : ep.images[t].data) put_f32(os, static_cast<float>(v));
    for (int i = 0; i < ep.n_joints; ++i) put_f32(os, static_cast<float>(ep.tau_ext[t][i]));
    for (int i = 0; i < ep.action_dim; ++i) put_f32(os, static_cast<float>(ep.targets[t][i]));
  }
  file.commit();
}

EpisodeRecord read_episode(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(ErrorKind::io, "cannot open episode file: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    raise(ErrorKind::io, "bad magic in episode file " + path);
  }
  const auto version = get_u32(is, "version");
  if (version != kVersion) {
    raise(ErrorKind::io, "unsupported episode version " + std::to_string(version));
  }
  EpisodeRecord ep;
  const auto t_len = get_u32(is, "length");
  ep.image_h = static_cast<int>(get_u32(is, "image height"));
  ep.image_w = static_cast<int>(get_u32(is, "image width"));
  ep.channels = static_cast<int>(get_u32(is, "channels"));
  ep.n_joints = static_cast<int>(get_u32(is, "n_joints"));
  ep.action_dim = static_cast<int>(get_u32(is, "action_dim"));
  if (ep.image_h < 1 || ep.image_w < 1 || ep.channels < 1 || ep.n_joints < 1 || ep.action_dim < 1) {
    raise(ErrorKind::io, "episode header has non-positive dimensions");
  }
  ep.images.reserve(t_len);
  ep.tau_ext.reserve(t_len);
  ep.targets.reserve(t_len);
  for (std::uint32_t t = 0; t < t_len; ++t) {
    curriculum::Image img(ep.image_h, ep.image_w, ep.channels);
    for (auto& v : img.data) v = get_f32(is, "image data");
    Eigen::VectorXd tau(ep.n_joints);
    for (int i = 0; i < ep.n_joints; ++i) tau[i] = get_f32(is, "external torque");
    Eigen::VectorXd target(ep.action_dim);
    for (int i = 0; i < ep.action_dim; ++i) target[i] = get_f32(is, "joint target");
    ep.images.push_back(std::move(img));
    ep.tau_ext.push_back(std::move(tau));
    ep.targets.push_back(std::move(target));
  }
  ep.phases.assign(t_len, 0);
  return ep;
}

std::string inspect_episode(const std::string& path) {
  const auto ep = read_episode(path);
  std::ostringstream os;
  os << "episode: " << path << "\n";
  os << "version: " << kVersion << "\n";
  os << "steps: " << ep.length() << "\n";
  os << "image: " << ep.image_h << "x" << ep.image_w << "x" << ep.channels << "\n";
  os << "n_joints: " << ep.n_joints << " action_dim: " << ep.action_dim << "\n";
  return os.str();
}

void write_manifest(const std::string& dir, const DatasetManifest& mf) {
  json j;
  j["format_version"] = mf.format_version;
  j["task"] = mf.task;
  j["episode_count"] = mf.episode_count;
  j["image_h"] = mf.image_h;
  j["image_w"] = mf.image_w;
  j["channels"] = mf.channels;
  j["n_joints"] = mf.n_joints;
  j["action_dim"] = mf.action_dim;
  j["lengths"] = mf.lengths;
  j["texture_ids"] = mf.texture_ids;
  j["episode_seeds"] = mf.episode_seeds;
  j["phases"] = mf.phases;
  j["generator_seed"] = mf.generator_seed;
  j["config_hash"] = mf.config_hash;
  j["attempts"] = mf.attempts;
  AtomicFile file((fs::path(dir) / "manifest.json").string());
  file.stream() << j.dump(2) << "\n";
  file.commit();
}

DatasetManifest read_manifest(const std::string& dir) {
  const auto path = (fs::path(dir) / "manifest.json").string();
  std::ifstream is(path);
  if (!is) raise(ErrorKind::io, "cannot open manifest: " + path);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    raise(ErrorKind::io, "manifest parse error: " + std::string(e.what()));
  }
  DatasetManifest mf;
  mf.format_version = j.at("format_version").get<int>();
  if (mf.format_version != 1) raise(ErrorKind::io, "unsupported manifest version");
  mf.task = j.at("task").get<std::string>();
  mf.episode_count = j.at("episode_count").get<int>();
  mf.image_h = j.at("image_h").get<int>();
  mf.image_w = j.at("image_w").get<int>();
  mf.channels = j.at("channels").get<int>();
  mf.n_joints = j.at("n_joints").get<int>();
  mf.action_dim = j.at("action_dim").get<int>();
  mf.lengths = j.at("lengths").get<std::vector<int>>();
  mf.texture_ids = j.at("texture_ids").get<std::vector<int>>();
  mf.episode_seeds = j.at("episode_seeds").get<std::vector<std::uint64_t>>();
  mf.phases = j.at("phases").get<std::vector<std::vector<int>>>();
  mf.generator_seed = j.at("generator_seed").get<std::uint64_t>();
  mf.config_hash = j.at("config_hash").get<std::uint64_t>();
  mf.attempts = j.at("attempts").get<int>();
  return mf;
}

namespace {

std::string episode_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "episode_%04d.bin", index);
  return buf;
}

}  // namespace

std::vector<EpisodeRecord> load_dataset(const std::string& dir) {
  const auto mf = read_manifest(dir);
  if (static_cast<int>(mf.texture_ids.size()) != mf.episode_count ||
      static_cast<int>(mf.lengths.size()) != mf.episode_count) {
    raise(ErrorKind::io, "manifest counts do not match episode_count");
  }
  std::vector<EpisodeRecord> out;
  out.reserve(static_cast<std::size_t>(mf.episode_count));
  for (int i = 0; i < mf.episode_count; ++i) {
    auto ep = read_episode((fs::path(dir) / episode_filename(i)).string());
    if (static_cast<int>(ep.length()) != mf.lengths[static_cast<std::size_t>(i)] ||
        ep.image_h != mf.image_h || ep.image_w != mf.image_w || ep.n_joints != mf.n_joints ||
        ep.action_dim != mf.action_dim) {
      raise(ErrorKind::io, "episode " + std::to_string(i) + " does not match the manifest shapes");
    }
    ep.task = mf.task;
    ep.texture_id = mf.texture_ids[static_cast<std::size_t>(i)];
    ep.seed = mf.episode_seeds[static_cast<std::size_t>(i)];
    if (i < static_cast<int>(mf.phases.size())) ep.phases = mf.phases[static_cast<std::size_t>(i)];
    ep.success = true;  // only successful demonstrations are stored
    out.push_back(std::move(ep));
  }
  return out;
}

GenDataReport gen_data(const Config& cfg, const std::string& out_dir) {
  const auto model = chain_from(cfg);
  const auto params = follower_from(cfg);
  auto episode_cfg = episode_from(cfg);
  const auto& task = cfg.str("data.task");
  const int want = static_cast<int>(cfg.integer("data.episodes"));
  const double min_rate = cfg.real("data.min_success_rate");

  fs::create_directories(out_dir);
  Rng rng(static_cast<std::uint64_t>(cfg.integer("seed")));

  DatasetManifest mf;
  mf.task = task;
  mf.image_h = episode_cfg.image_h;
  mf.image_w = episode_cfg.image_w;
  mf.n_joints = model.n_joints;
  mf.action_dim = model.n_joints;
  mf.generator_seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  mf.config_hash = cfg.hash();

  // Training split textures only.
  const std::vector<int> pool(std::begin(sim::kTrainTextures), std::end(sim::kTrainTextures));

  int attempts = 0, kept = 0;
  while (kept < want) {
    attempts += 1;
    const auto scene = sim::sample_scene(task, pool, rng);
    scene.validate();
    const std::uint64_t ep_seed = rng.next_u64();
    auto ep = sim::run_expert_episode(model, params, scene, episode_cfg, ep_seed);
    if (ep.success) {
      write_episode((fs::path(out_dir) / episode_filename(kept)).string(), ep);
      mf.lengths.push_back(static_cast<int>(ep.length()));
      mf.texture_ids.push_back(scene.texture_id);
      mf.episode_seeds.push_back(ep_seed);
      mf.phases.push_back(ep.phases);
      kept += 1;
    }
    if (attempts >= 10 && static_cast<double>(kept) / attempts < min_rate) {
      raise(ErrorKind::fault,
            "expert success rate " + std::to_string(static_cast<double>(kept) / attempts) +
                " fell below " + std::to_string(min_rate) + " after " + std::to_string(attempts) +
                " attempts");
    }
  }
  mf.episode_count = kept;
  mf.attempts = attempts;
  write_manifest(out_dir, mf);

  GenDataReport rep;
  rep.episodes = kept;
  rep.attempts = attempts;
  rep.success_rate = static_cast<double>(kept) / attempts;
  return rep;
}

}  // namespace factr::harness
