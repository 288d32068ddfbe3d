#include <doctest.h>

#include <cmath>

#include "factr/curriculum.hpp"
#include "factr/rng.hpp"

using namespace factr;
using namespace factr::curriculum;

namespace {

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

CurriculumConfig cfg_for(SchedulerType s, double sigma0, long n_total, long warmup = 0) {
  CurriculumConfig c;
  c.scheduler = s;
  c.sigma0 = sigma0;
  c.total_steps = n_total;
  c.warmup_steps = warmup;
  return c;
}

}  // namespace

TEST_SUITE("curriculum") {

TEST_CASE("gaussian kernel construction") {
  CHECK(gaussian_kernel_1d(0.01) == std::vector<double>{1.0});
  CHECK(gaussian_kernel_1d(0.0499) == std::vector<double>{1.0});

  for (double sigma : {0.3, 1.0, 2.5, 7.0}) {
    const auto k = gaussian_kernel_1d(sigma);
    CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(3.0 * sigma)) + 1);
    double sum = 0.0;
    for (double v : k) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == k[k.size() - 1 - i]);
  }

  // Brute-force normalized sample at sigma = 1 over radius 3.
  const auto k = gaussian_kernel_1d(1.0);
  double z = 0.0;
  for (int x = -3; x <= 3; ++x) z += std::exp(-0.5 * x * x);
  CHECK(k[3] == doctest::Approx(1.0 / z).epsilon(1e-12));

  const Mat k2 = gaussian_kernel_2d(1.0);
  CHECK(std::abs(k2.sum() - 1.0) < 1e-12);
  CHECK(k2(3, 3) == doctest::Approx((1.0 / z) * (1.0 / z)).epsilon(1e-10));
}

TEST_CASE("pixel blur preserves constants and passes the impulse check") {
  Image flat(9, 9, 1, 0.42);
  const Image blurred = blur_pixel(flat, 2.0);
  for (double v : blurred.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-14));

  Rng rng(3);
  const Image img = random_image(rng, 8, 8);
  const Image same = blur_pixel(img, 0.01);
  CHECK(same.data == img.data);

  // Away from boundaries an impulse reproduces the kernel.
  Image impulse(15, 15, 1, 0.0);
  impulse.at(7, 7) = 1.0;
  const auto k = gaussian_kernel_1d(1.0);
  const Image resp = blur_pixel(impulse, 1.0);
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx)
      CHECK(resp.at(7 + dy, 7 + dx) ==
            doctest::Approx(k[static_cast<std::size_t>(dy + 3)] * k[static_cast<std::size_t>(dx + 3)])
                .epsilon(1e-12));
}

TEST_CASE("latent blur") {
  // Constant across tokens is unchanged.
  Mat z = Mat::Zero(6, 4);
  for (int c = 0; c < 4; ++c) z.col(c).setConstant(0.1 * (c + 1));
  const Mat out = blur_latent(z, 2.0);
  CHECK((out - z).cwiseAbs().maxCoeff() < 1e-14);

  // Single token is unchanged for any sigma.
  Mat one = Mat::Random(1, 5);
  CHECK((blur_latent(one, 4.0) - one).cwiseAbs().maxCoeff() < 1e-14);

  // Brute-force per-channel convolution oracle.
  Rng rng(5);
  Mat zr(7, 3);
  for (int t = 0; t < 7; ++t)
    for (int c = 0; c < 3; ++c) zr(t, c) = rng.uniform(-1.0, 1.0);
  const double sigma = 2.0;
  const auto k = gaussian_kernel_1d(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  Mat ref(7, 3);
  for (int t = 0; t < 7; ++t) {
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int o = -radius; o <= radius; ++o) {
        int idx = std::clamp(t + o, 0, 6);
        acc += k[static_cast<std::size_t>(o + radius)] * zr(idx, c);
      }
      ref(t, c) = acc;
    }
  }
  CHECK((blur_latent(zr, sigma) - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pixel downsample") {
  Rng rng(7);
  const Image img = random_image(rng, 8, 8);
  CHECK(downsample_pixel(img, 1).data == img.data);

  const Image once = downsample_pixel(img, 3);
  const Image twice = downsample_pixel(once, 3);
  CHECK(once.data == twice.data);

  // 4x4 ramp with k = 2: each block becomes its max.
  Image ramp(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ramp.at(y, x) = y * 4 + x;
  const Image pooled = downsample_pixel(ramp, 2);
  const double expected[4] = {5, 7, 13, 15};
  for (int by = 0; by < 2; ++by)
    for (int bx = 0; bx < 2; ++bx)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
          CHECK(pooled.at(by * 2 + y, bx * 2 + x) == expected[by * 2 + bx]);
}

TEST_CASE("latent downsample") {
  Mat z(8, 2);
  for (int t = 0; t < 8; ++t) {
    z(t, 0) = t;
    z(t, 1) = 7 - t;
  }
  CHECK((downsample_latent(z, 1) - z).cwiseAbs().maxCoeff() == 0.0);

  const Mat once = downsample_latent(z, 3);
  CHECK((downsample_latent(once, 3) - once).cwiseAbs().maxCoeff() == 0.0);

  // Blocks {0,1,2}, {3,4,5}, {6,7}: per-channel maxima.
  const double col0[8] = {2, 2, 2, 5, 5, 5, 7, 7};
  const double col1[8] = {7, 7, 7, 4, 4, 4, 1, 1};
  for (int t = 0; t < 8; ++t) {
    CHECK(once(t, 0) == col0[t]);
    CHECK(once(t, 1) == col1[t]);
  }
}

TEST_CASE("operators are non-expansive in max norm") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Image img = random_image(rng, 10, 10);
    const double lo = *std::min_element(img.data.begin(), img.data.end());
    const double hi = *std::max_element(img.data.begin(), img.data.end());
    for (const Image& out : {blur_pixel(img, rng.uniform(0.1, 3.0)),
                             downsample_pixel(img, rng.uniform_int(2, 5))}) {
      const double olo = *std::min_element(out.data.begin(), out.data.end());
      const double ohi = *std::max_element(out.data.begin(), out.data.end());
      CHECK(olo >= lo - 1e-12);
      CHECK(ohi <= hi + 1e-12);
    }
  }
}

TEST_CASE("scheduler table values") {
  CHECK(scheduler_sigma(50, cfg_for(SchedulerType::linear, 8.0, 100)) == doctest::Approx(4.0));

  auto cos_cfg = cfg_for(SchedulerType::cosine, 8.0, 100);
  CHECK(scheduler_sigma(0, cos_cfg) == doctest::Approx(8.0));
  CHECK(scheduler_sigma(100, cos_cfg) == doctest::Approx(0.0));

  auto lin_cfg = cfg_for(SchedulerType::linear, 8.0, 100);
  CHECK(scheduler_sigma(100, lin_cfg) == doctest::Approx(0.0));

  auto const_cfg = cfg_for(SchedulerType::constant, 3.0, 100);
  CHECK(scheduler_sigma(0, const_cfg) == 3.0);
  CHECK(scheduler_sigma(100, const_cfg) == 3.0);

  auto step_cfg = cfg_for(SchedulerType::step, 8.0, 100);
  step_cfg.d_steps = 4;
  CHECK(scheduler_sigma(12, step_cfg) == doctest::Approx(8.0));
  CHECK(scheduler_sigma(37, step_cfg) == doctest::Approx(6.0));
  CHECK(scheduler_sigma(62, step_cfg) == doctest::Approx(4.0));
  CHECK(scheduler_sigma(87, step_cfg) == doctest::Approx(2.0));

  auto exp_cfg = cfg_for(SchedulerType::exponential, 8.0, 100);
  exp_cfg.exp_gamma = 0.95;
  CHECK(scheduler_sigma(10, exp_cfg) == doctest::Approx(8.0 * std::pow(0.95, 10)));

  CHECK_THROWS_AS(scheduler_sigma(101, lin_cfg), Error);
  CHECK_THROWS_AS(scheduler_sigma(-1, lin_cfg), Error);
}

TEST_CASE("warm-up holds sigma0 then decays on the shifted index") {
  auto cfg = cfg_for(SchedulerType::linear, 8.0, 100, 20);
  for (long n = 0; n < 20; ++n) CHECK(scheduler_sigma(n, cfg) == 8.0);
  CHECK(scheduler_sigma(20, cfg) == doctest::Approx(8.0));
  CHECK(scheduler_sigma(60, cfg) == doctest::Approx(8.0 * (1.0 - 40.0 / 80.0)));
  CHECK(scheduler_sigma(100, cfg) == doctest::Approx(0.0));
}

TEST_CASE("decaying schedulers are monotone non-increasing past warm-up") {
  for (auto type : {SchedulerType::linear, SchedulerType::cosine, SchedulerType::exponential,
                    SchedulerType::step}) {
    auto cfg = cfg_for(type, 8.0, 200, 25);
    cfg.d_steps = 5;
    cfg.exp_gamma = 0.97;
    double prev = scheduler_sigma(25, cfg);
    for (long n = 26; n <= 200; ++n) {
      const double cur = scheduler_sigma(n, cfg);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("downsample scale mapping") {
  CHECK(pool_size_for(0.0) == 1);
  CHECK(pool_size_for(0.4) == 1);
  CHECK(pool_size_for(2.5) == 3);
  CHECK(pool_size_for(7.9) == 8);
}

TEST_CASE("config validation") {
  auto cfg = cfg_for(SchedulerType::linear, 4.0, 100);
  CHECK_NOTHROW(cfg.validate());
  cfg.warmup_steps = 100;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = cfg_for(SchedulerType::exponential, 4.0, 100);
  cfg.exp_gamma = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = cfg_for(SchedulerType::step, 4.0, 100);
  cfg.d_steps = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

}  // TEST_SUITE
