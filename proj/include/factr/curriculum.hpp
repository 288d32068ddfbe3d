#pragma once

#include <Eigen/Dense>
#include <vector>

#include "factr/error.hpp"

namespace factr::curriculum {

using Mat = Eigen::MatrixXd;

// Grayscale-first image container, row-major, values in [0, 1].
struct Image {
  int h = 0;
  int w = 0;
  int c = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h_, int w_, int c_ = 1, double fill = 0.0)
      : h(h_), w(w_), c(c_), data(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

  double& at(int y, int x, int ch = 0) {
    return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch = 0) const {
    return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
};

// Scales below this are treated as the exact identity operator.
inline constexpr double kIdentitySigma = 0.05;

// Sampled Gaussian on the integer grid of radius ceil(3*sigma), renormalized
// to sum to one. Returns the delta kernel below the identity threshold.
std::vector<double> gaussian_kernel_1d(double sigma);

// Separable product of the 1D kernel with itself, normalized.
Mat gaussian_kernel_2d(double sigma);

// Separable Gaussian blur with replicate boundary padding.
Image blur_pixel(const Image& image, double sigma);

// 1D Gaussian blur along the token axis, independently per embedding channel.
// Rows of z are tokens.
Mat blur_latent(const Mat& z, double sigma);

// Non-overlapping k x k max pooling (edge-replicated to a whole number of
// blocks) followed by nearest-neighbor upsampling back to the input shape.
Image downsample_pixel(const Image& image, int k);

// 1D analog along the token axis.
Mat downsample_latent(const Mat& z, int k);

enum class SchedulerType { constant, linear, cosine, exponential, step };
enum class OperatorType { gaussian_blur, downsample };
enum class CurriculumSpace { pixel, latent };

struct CurriculumConfig {
  CurriculumSpace space = CurriculumSpace::latent;
  OperatorType op = OperatorType::gaussian_blur;
  double sigma0 = 4.0;
  SchedulerType scheduler = SchedulerType::linear;
  long total_steps = 0;   // N
  long warmup_steps = 0;  // W, scale held at sigma0 for n < W
  double exp_gamma = 0.999;
  int d_steps = 4;

  void validate() const;
};

// Scale at gradient step n; the decay formulas run on the post-warm-up
// indices n' = n - W over N' = N - W.
double scheduler_sigma(long n, const CurriculumConfig& cfg);

// Integer pool width used when the operator is downsample.
int pool_size_for(double sigma);

// Convenience dispatchers used by the trainer.
Image apply_pixel_operator(const Image& image, const CurriculumConfig& cfg, double sigma);
Mat apply_latent_operator(const Mat& z, const CurriculumConfig& cfg, double sigma);

}  // namespace factr::curriculum
