#include <cmath>

#include "factr/policy.hpp"

namespace factr::policy {

namespace {

// Square random resize-crop with bilinear resampling back to the native
// resolution.
curriculum::Image resize_crop(const curriculum::Image& img, Rng& rng) {
  const double s = rng.uniform(0.85, 1.0);
  const int ch = std::max(8, static_cast<int>(std::lround(img.h * s)));
  const int cw = std::max(8, static_cast<int>(std::lround(img.w * s)));
  const int y0 = rng.uniform_int(0, img.h - ch);
  const int x0 = rng.uniform_int(0, img.w - cw);

  curriculum::Image out(img.h, img.w, img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double sy = y0 + (static_cast<double>(y) / (img.h - 1)) * (ch - 1);
      const double sx = x0 + (static_cast<double>(x) / (img.w - 1)) * (cw - 1);
      const int iy = std::min(static_cast<int>(sy), img.h - 2);
      const int ix = std::min(static_cast<int>(sx), img.w - 2);
      const double fy = sy - iy, fx = sx - ix;
      for (int c = 0; c < img.c; ++c) {
        const double v = (1 - fy) * ((1 - fx) * img.at(iy, ix, c) + fx * img.at(iy, ix + 1, c)) +
                         fy * ((1 - fx) * img.at(iy + 1, ix, c) + fx * img.at(iy + 1, ix + 1, c));
        out.at(y, x, c) = v;
      }
    }
  }
  return out;
}

bool latent_op_is_identity(const curriculum::CurriculumConfig& cfg, double sigma) {
  if (cfg.op == curriculum::OperatorType::gaussian_blur) return sigma < curriculum::kIdentitySigma;
  return curriculum::pool_size_for(sigma) == 1;
}

}  // namespace

TrainResult train_policy(Net& net, const std::vector<EpisodeRecord>& dataset,
                         const curriculum::CurriculumConfig* curr, const TrainConfig& tc) {
  tc.validate();
  if (curr != nullptr) curr->validate();
  if (dataset.empty()) raise(ErrorKind::invalid_argument, "training dataset is empty");
  for (const auto& ep : dataset) ep.check_consistent();

  // Flattened (episode, step) index for uniform frame sampling.
  std::vector<std::pair<std::size_t, std::size_t>> frames;
  for (std::size_t e = 0; e < dataset.size(); ++e) {
    for (std::size_t t = 0; t < dataset[e].length(); ++t) frames.emplace_back(e, t);
  }
  if (frames.empty()) raise(ErrorKind::invalid_argument, "dataset has no frames");

  Rng rng(tc.seed);
  Net::AdamState adam;
  TrainResult result;
  result.log.reserve(static_cast<std::size_t>(tc.total_steps));

  const int k = net.config().chunk;
  for (long n = 0; n < tc.total_steps; ++n) {
    const double sigma = (curr != nullptr) ? curriculum::scheduler_sigma(n, *curr) : 0.0;

    LatentOp latent;
    const LatentOp* latent_ptr = nullptr;
    if (curr != nullptr && curr->space == curriculum::CurriculumSpace::latent &&
        !latent_op_is_identity(*curr, sigma)) {
      latent = LatentOp{curr->op, sigma};
      latent_ptr = &latent;
    }
    const bool pixel_space =
        curr != nullptr && curr->space == curriculum::CurriculumSpace::pixel;

    net.zero_grads();
    double batch_loss = 0.0;
    double batch_force_mass = 0.0;
    for (int b = 0; b < tc.batch_size; ++b) {
      const auto [e, t] = frames[rng.uniform_index(frames.size())];
      const auto& ep = dataset[e];

      curriculum::Image img = ep.images[t];
      if (tc.augment) img = resize_crop(img, rng);
      if (pixel_space) img = curriculum::apply_pixel_operator(img, *curr, sigma);

      autodiff::Tape tape;
      const auto fwd = net.forward(tape, img, ep.tau_ext[t], latent_ptr);
      const int loss = tape.mse(fwd.pred, label_chunk(ep, t, k));
      tape.backward(loss);
      net.accumulate_grads(tape, fwd, 1.0 / tc.batch_size);

      batch_loss += tape.val(loss)(0, 0) / tc.batch_size;
      batch_force_mass += fwd.trace.force_mass.front().mean() / tc.batch_size;
    }
    const double lr = net.adamw_step(adam, tc);
    result.log.push_back(TrainLogRow{n, sigma, batch_loss, lr, batch_force_mass});
  }
  result.final_loss = result.log.empty() ? 0.0 : result.log.back().loss;
  return result;
}

}  // namespace factr::policy
