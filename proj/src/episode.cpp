#include "factr/episode.hpp"

#include "factr/error.hpp"

namespace factr {

void EpisodeRecord::check_consistent() const {
  const std::size_t t = images.size();
  if (tau_ext.size() != t || targets.size() != t || phases.size() != t) {
    raise(ErrorKind::invalid_argument, "episode arrays have mismatched lengths");
  }
  for (const auto& img : images) {
    if (img.h != image_h || img.w != image_w || img.c != channels) {
      raise(ErrorKind::invalid_argument, "episode image shape mismatch");
    }
    for (double v : img.data) {
      if (!(v >= 0.0 && v <= 1.0)) raise(ErrorKind::invalid_argument, "image values must lie in [0, 1]");
    }
  }
  for (const auto& tau : tau_ext) {
    if (tau.size() != n_joints) raise(ErrorKind::invalid_argument, "episode torque length mismatch");
  }
  for (const auto& tgt : targets) {
    if (tgt.size() != action_dim) raise(ErrorKind::invalid_argument, "episode target length mismatch");
  }
}

}  // namespace factr
