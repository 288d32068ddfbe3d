#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "factr/curriculum.hpp"
#include "factr/error.hpp"
#include "factr/leader_control.hpp"
#include "factr/policy.hpp"
#include "factr/telesim.hpp"

namespace factr::harness {

// Flat key = value configuration with a strict schema: unknown keys and
// malformed values are rejected at load/set time, so an ablation grid cannot
// silently run with a typo.
class Config {
 public:
  static Config defaults();
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  void apply_overrides(const std::vector<std::string>& key_equals_value);

  bool has(const std::string& key) const;
  double real(const std::string& key) const;
  long integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  const std::string& str(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<long> integers(const std::string& key) const;

  // Canonical sorted serialization and its FNV-1a digest.
  std::string serialize() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> values_;
};

// Domain builders: every module's runtime structs come from the one config.
dyn::ChainModel chain_from(const Config& cfg);
dyn::ChainModel leader_chain_from(const Config& cfg);
ctl::ControllerGains leader_gains_from(const Config& cfg);
sim::FollowerParams follower_from(const Config& cfg);
sim::EpisodeConfig episode_from(const Config& cfg);
curriculum::CurriculumConfig curriculum_from(const Config& cfg, long total_steps);
policy::ModelConfig model_from(const Config& cfg);
policy::TrainConfig train_from(const Config& cfg);

}  // namespace factr::harness
