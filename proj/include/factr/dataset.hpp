#pragma once

#include <string>
#include <vector>

#include "factr/config.hpp"
#include "factr/episode.hpp"

namespace factr::harness {

// Binary episode file: magic "FCTR", u32 version, u32 T, H, W, C, n_joints,
// d_a, then per timestep the image as f32 row-major, tau_ext f32[n_joints],
// and the joint target f32[d_a]; everything little-endian.
void write_episode(const std::string& path, const EpisodeRecord& ep);
EpisodeRecord read_episode(const std::string& path);

std::string inspect_episode(const std::string& path);

struct DatasetManifest {
  int format_version = 1;
  std::string task;
  int episode_count = 0;
  int image_h = 0, image_w = 0, channels = 1;
  int n_joints = 0, action_dim = 0;
  std::vector<int> lengths;      // T per episode
  std::vector<int> texture_ids;  // per episode
  std::vector<std::uint64_t> episode_seeds;
  std::vector<std::vector<int>> phases;  // per episode, per recorded step
  std::uint64_t generator_seed = 0;
  std::uint64_t config_hash = 0;
  int attempts = 0;  // expert attempts taken to collect the episodes
};

void write_manifest(const std::string& dir, const DatasetManifest& mf);
DatasetManifest read_manifest(const std::string& dir);

// Episode files plus the metadata the binary format does not carry.
std::vector<EpisodeRecord> load_dataset(const std::string& dir);

struct GenDataReport {
  int episodes = 0;
  int attempts = 0;
  double success_rate = 0.0;
};

// Runs the scripted expert, keeps successful episodes only, writes the
// manifest and files. Aborts when the expert falls below the configured
// success-rate floor.
GenDataReport gen_data(const Config& cfg, const std::string& out_dir);

}  // namespace factr::harness
