#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "factr/curriculum.hpp"

namespace factr {

// Task phases recorded alongside demonstrations; eval reuses the same labels
// to split attention statistics into pre-contact and contact segments.
enum class Phase : int {
  locate = 0,
  descend = 1,
  press = 2,
  lift = 3,
  hold = 4,
  roll = 5,
  done = 6,
};

// One demonstration or rollout: per recorded step an observation image, the
// external joint torque, and the commanded joint target.
struct EpisodeRecord {
  int image_h = 0;
  int image_w = 0;
  int channels = 1;
  int n_joints = 0;
  int action_dim = 0;

  std::vector<curriculum::Image> images;
  std::vector<Eigen::VectorXd> tau_ext;
  std::vector<Eigen::VectorXd> targets;
  std::vector<int> phases;

  std::string task;
  int texture_id = 0;
  bool success = false;
  int fault_count = 0;
  std::uint64_t seed = 0;

  std::size_t length() const { return images.size(); }
  void check_consistent() const;
};

}  // namespace factr
