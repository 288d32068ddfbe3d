#include "factr/curriculum.hpp"

#include <cmath>

namespace factr::curriculum {

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!std::isfinite(sigma) || sigma < 0.0) raise(ErrorKind::invalid_argument, "sigma must be finite and >= 0");
  if (sigma < kIdentitySigma) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int x = -radius; x <= radius; ++x) {
    const double v = std::exp(-0.5 * (x * x) / (sigma * sigma));
    k[static_cast<std::size_t>(x + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

Mat gaussian_kernel_2d(double sigma) {
  const auto k = gaussian_kernel_1d(sigma);
  const int n = static_cast<int>(k.size());
  Mat out(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out(y, x) = k[static_cast<std::size_t>(y)] * k[static_cast<std::size_t>(x)];
  out /= out.sum();
  return out;
}

namespace {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace

Image blur_pixel(const Image& image, double sigma) {
  if (sigma < kIdentitySigma) return image;
  const auto k = gaussian_kernel_1d(sigma);
  const int radius = static_cast<int>(k.size() / 2);

  Image tmp = image;
  for (int ch = 0; ch < image.c; ++ch) {
    for (int y = 0; y < image.h; ++y) {
      for (int x = 0; x < image.w; ++x) {
        double acc = 0.0;
        for (int o = -radius; o <= radius; ++o)
          acc += k[static_cast<std::size_t>(o + radius)] * image.at(y, clamp_index(x + o, image.w), ch);
        tmp.at(y, x, ch) = acc;
      }
    }
  }
  Image out = tmp;
  for (int ch = 0; ch < image.c; ++ch) {
    for (int y = 0; y < image.h; ++y) {
      for (int x = 0; x < image.w; ++x) {
        double acc = 0.0;
        for (int o = -radius; o <= radius; ++o)
          acc += k[static_cast<std::size_t>(o + radius)] * tmp.at(clamp_index(y + o, image.h), x, ch);
        out.at(y, x, ch) = acc;
      }
    }
  }
  return out;
}

Mat blur_latent(const Mat& z, double sigma) {
  if (z.rows() < 1) raise(ErrorKind::invalid_argument, "latent needs at least one token");
  if (sigma < kIdentitySigma) return z;
  const auto k = gaussian_kernel_1d(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int m = static_cast<int>(z.rows());
  Mat out(z.rows(), z.cols());
  for (int t = 0; t < m; ++t) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(z.cols());
    for (int o = -radius; o <= radius; ++o)
      acc += k[static_cast<std::size_t>(o + radius)] * z.row(clamp_index(t + o, m));
    out.row(t) = acc;
  }
  return out;
}

Image downsample_pixel(const Image& image, int k) {
  if (k < 1) raise(ErrorKind::invalid_argument, "pool size must be >= 1");
  if (k == 1) return image;
  const int bh = (image.h + k - 1) / k;
  const int bw = (image.w + k - 1) / k;
  Image out = image;
  for (int ch = 0; ch < image.c; ++ch) {
    for (int by = 0; by < bh; ++by) {
      for (int bx = 0; bx < bw; ++bx) {
        double m = -1.0;
        for (int y = by * k; y < (by + 1) * k; ++y)
          for (int x = bx * k; x < (bx + 1) * k; ++x)
            m = std::max(m, image.at(clamp_index(y, image.h), clamp_index(x, image.w), ch));
        for (int y = by * k; y < std::min((by + 1) * k, image.h); ++y)
          for (int x = bx * k; x < std::min((bx + 1) * k, image.w); ++x) out.at(y, x, ch) = m;
      }
    }
  }
  return out;
}

Mat downsample_latent(const Mat& z, int k) {
  if (k < 1) raise(ErrorKind::invalid_argument, "pool size must be >= 1");
  if (k == 1) return z;
  const int m = static_cast<int>(z.rows());
  const int blocks = (m + k - 1) / k;
  Mat out(z.rows(), z.cols());
  for (int b = 0; b < blocks; ++b) {
    Eigen::RowVectorXd mx = z.row(clamp_index(b * k, m));
    for (int t = b * k + 1; t < (b + 1) * k; ++t) mx = mx.cwiseMax(z.row(clamp_index(t, m)));
    for (int t = b * k; t < std::min((b + 1) * k, m); ++t) out.row(t) = mx;
  }
  return out;
}

void CurriculumConfig::validate() const {
  if (sigma0 < 0.0) raise(ErrorKind::config, "curriculum sigma0 must be >= 0");
  if (total_steps <= 0) raise(ErrorKind::config, "curriculum total steps must be positive");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    raise(ErrorKind::config, "warmup must satisfy 0 <= W < N");
  if (!(exp_gamma > 0.0 && exp_gamma < 1.0)) raise(ErrorKind::config, "exp_gamma must be in (0, 1)");
  if (d_steps < 2) raise(ErrorKind::config, "d_steps must be >= 2");
}

double scheduler_sigma(long n, const CurriculumConfig& cfg) {
  cfg.validate();
  if (n < 0 || n > cfg.total_steps) raise(ErrorKind::invalid_argument, "step index outside [0, N]");
  if (n < cfg.warmup_steps) return cfg.sigma0;
  const double np = static_cast<double>(n - cfg.warmup_steps);
  const double Np = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  switch (cfg.scheduler) {
    case SchedulerType::constant:
      return cfg.sigma0;
    case SchedulerType::linear:
      return cfg.sigma0 * (1.0 - np / Np);
    case SchedulerType::cosine:
      return 0.5 * cfg.sigma0 * (1.0 + std::cos(np * M_PI / Np));
    case SchedulerType::exponential:
      return cfg.sigma0 * std::pow(cfg.exp_gamma, np);
    case SchedulerType::step:
      return cfg.sigma0 *
             (1.0 - std::floor(np * cfg.d_steps / Np) / static_cast<double>(cfg.d_steps));
  }
  raise(ErrorKind::invalid_argument, "unknown scheduler");
}

int pool_size_for(double sigma) { return std::max(1, static_cast<int>(std::lround(sigma))); }

Image apply_pixel_operator(const Image& image, const CurriculumConfig& cfg, double sigma) {
  if (cfg.op == OperatorType::gaussian_blur) return blur_pixel(image, sigma);
  return downsample_pixel(image, pool_size_for(sigma));
}

Mat apply_latent_operator(const Mat& z, const CurriculumConfig& cfg, double sigma) {
  if (cfg.op == OperatorType::gaussian_blur) return blur_latent(z, sigma);
  return downsample_latent(z, pool_size_for(sigma));
}

}  // namespace factr::curriculum
