#include <cmath>

#include "factr/telesim.hpp"

namespace factr::sim {

namespace {

constexpr double kBackground = 0.35;
constexpr double kTableShade = 0.50;
constexpr double kArmShade = 0.05;
constexpr double kLinkHalfWidth = 0.035;  // m

struct TextureSpec {
  int family;  // 0 vstripe, 1 hstripe, 2 checker, 3 diagonal, 4 tone product
  double period;
  double phase;
  double base;
  double amp;
  double k1, k2, k3;  // tone-product coefficients
};

// Training ids 0..3 and test ids 4..9 use disjoint pattern parameters. Both
// splits mix objects brighter and darker than the background, so a one-sided
// brightness threshold cannot localize; the blurred envelope still deviates
// from the background by at least 0.12 either way.
const TextureSpec& texture_spec(int id) {
  static const TextureSpec table[kNumTextures] = {
      {0, 2.0, 0.0, 0.72, 0.20, 0, 0, 0},
      {1, 2.0, 0.0, 0.18, 0.13, 0, 0, 0},
      {2, 2.0, 0.0, 0.80, 0.15, 0, 0, 0},
      {3, 3.0, 0.0, 0.22, 0.17, 0, 0, 0},
      {0, 3.0, 1.0, 0.20, 0.15, 0, 0, 0},
      {2, 3.0, 0.0, 0.66, 0.24, 0, 0, 0},
      {3, 2.0, 1.0, 0.82, 0.14, 0, 0, 0},
      {1, 3.0, 1.0, 0.16, 0.12, 0, 0, 0},
      {4, 0.0, 0.0, 0.74, 0.20, 2.1, 0.7, 1.3},
      {4, 0.0, 0.0, 0.24, 0.18, 1.3, 2.3, 0.5},
  };
  if (id < 0 || id >= kNumTextures) {
    raise(ErrorKind::invalid_argument, "unregistered texture id " + std::to_string(id));
  }
  return table[static_cast<std::size_t>(id)];
}

double texture_value(int id, int u, int v) {
  const auto& s = texture_spec(id);
  double osc = 0.0;
  switch (s.family) {
    case 0:
      osc = (std::fmod(u + s.phase, 2.0 * s.period) < s.period) ? 1.0 : -1.0;
      break;
    case 1:
      osc = (std::fmod(v + s.phase, 2.0 * s.period) < s.period) ? 1.0 : -1.0;
      break;
    case 2: {
      const bool a = std::fmod(u + s.phase, 2.0 * s.period) < s.period;
      const bool b = std::fmod(v + s.phase, 2.0 * s.period) < s.period;
      osc = (a == b) ? 1.0 : -1.0;
      break;
    }
    case 3:
      osc = (std::fmod(u + v + s.phase, 2.0 * s.period) < s.period) ? 1.0 : -1.0;
      break;
    default:
      osc = std::sin(s.k1 * u + s.k2 * v + s.k3) * std::cos(s.k2 * u - s.k1 * v + 2.0 * s.k3);
      break;
  }
  return std::clamp(s.base + s.amp * osc, 0.0, 1.0);
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-12) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

double world_to_col(double x, const CameraView& cam, int w) {
  return (x - cam.x_min) / (cam.x_max - cam.x_min) * w - 0.5;
}

double world_to_row(double y, const CameraView& cam, int h) {
  return (cam.y_max - y) / (cam.y_max - cam.y_min) * h - 0.5;
}

double col_to_world(double col, const CameraView& cam, int w) {
  return cam.x_min + (col + 0.5) / w * (cam.x_max - cam.x_min);
}

curriculum::Image render(const SceneSpec& scene, double object_lift, const ChainModel& model,
                         const Vec& q, int h, int w, const CameraView& cam) {
  if (h < 16 || w < 16) raise(ErrorKind::invalid_argument, "render target must be at least 16x16");
  if (scene.has_object()) texture_spec(scene.texture_id);  // validate id up front

  curriculum::Image img(h, w, 1, kBackground);
  const double px_w = (cam.x_max - cam.x_min) / w;
  const double px_h = (cam.y_max - cam.y_min) / h;

  // Object rectangle in pixel space; the texture is anchored to the corner so
  // it moves with the object.
  double left = 0, right = 0, bottom = 0, top = 0;
  int left_px = 0, top_px = 0;
  if (scene.has_object()) {
    left = scene.object_x - scene.object_half_width;
    right = scene.object_x + scene.object_half_width;
    bottom = scene.table_height + object_lift;
    top = scene.object_height + object_lift;
    left_px = static_cast<int>(std::floor(world_to_col(left, cam, w)));
    top_px = static_cast<int>(std::floor(world_to_row(top, cam, h)));
  }

  std::vector<Vec2> joints;
  if (q.size() == model.n_joints) {
    const auto poses = dyn::forward_kinematics(model, q);
    joints.reserve(poses.size());
    for (const auto& p : poses) joints.push_back(kArmBase + p.position);
  }

  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const double x = cam.x_min + (col + 0.5) * px_w;
      const double y = cam.y_max - (row + 0.5) * px_h;
      double v = kBackground;
      if (scene.has_object() && y <= scene.table_height) v = kTableShade;
      if (scene.has_object() && x >= left && x <= right && y >= bottom && y <= top) {
        v = texture_value(scene.texture_id, col - left_px, row - top_px);
      }
      if (!joints.empty()) {
        const Vec2 p(x, y);
        for (std::size_t i = 0; i + 1 < joints.size(); ++i) {
          if (point_segment_distance(p, joints[i], joints[i + 1]) < kLinkHalfWidth) {
            v = kArmShade;
            break;
          }
        }
        if ((p - joints.back()).norm() < 1.6 * kLinkHalfWidth) v = kArmShade;
      }
      img.at(row, col) = v;
    }
  }
  return img;
}

}  // namespace factr::sim
