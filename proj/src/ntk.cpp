#include "factr/ntk.hpp"

#include <cmath>

#include "factr/curriculum.hpp"
#include "factr/rng.hpp"

namespace factr::ntk {

Mat blur_rows(const Mat& x, double sigma) {
  // blur_latent smooths down the token axis; signals live in rows here.
  return curriculum::blur_latent(x.transpose(), sigma).transpose();
}

Mat blurred_kernel_matrix(const Mat& x, double sigma) {
  if (!x.allFinite()) raise(ErrorKind::invalid_argument, "inputs must be finite");
  const Mat phi = blur_rows(x, sigma);
  return phi * phi.transpose();
}

Vec residual_theory(const Mat& k, const Vec& r0, double eta, double t) {
  if (k.rows() != k.cols()) raise(ErrorKind::invalid_argument, "kernel matrix must be square");
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    raise(ErrorKind::invalid_argument, "kernel matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(k);
  const Vec coeffs = eig.eigenvectors().transpose() * r0;
  Vec decayed(coeffs.size());
  for (int i = 0; i < coeffs.size(); ++i) {
    decayed[i] = std::exp(-eta * eig.eigenvalues()[i] * t) * coeffs[i];
  }
  return eig.eigenvectors() * decayed;
}

FlowResult gradient_flow_sim(const Mat& x, const Vec& y, double sigma, double eta, const Vec& w0,
                             const std::vector<double>& time_grid, double dt_scale) {
  const Mat phi = blur_rows(x, sigma);
  if (w0.size() != phi.cols()) raise(ErrorKind::invalid_argument, "w0 dimension mismatch");
  if (y.size() != phi.rows()) raise(ErrorKind::invalid_argument, "label dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Mat> eig(phi * phi.transpose());
  const double lambda_max = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  const double dt = dt_scale / (eta * lambda_max);

  Vec w = w0;
  Vec r = phi * w - y;
  const double r0_norm = std::max(r.norm(), 1e-12);

  FlowResult out;
  double t = 0.0;
  for (double target : time_grid) {
    while (t + 0.5 * dt < target) {
      w -= (eta * dt) * (phi.transpose() * r);
      r = phi * w - y;
      t += dt;
      if (r.norm() > 10.0 * r0_norm + 1e-9) raise(ErrorKind::numeric, "step too large");
    }
    out.times.push_back(target);
    out.residuals.push_back(r);
  }
  return out;
}

double rank1_deviation(const Mat& x, double sigma) {
  const int n = static_cast<int>(x.rows());
  if (n <= 1) return 0.0;
  const Mat k = blurred_kernel_matrix(x, sigma);
  const double mean = k.mean();
  if (std::abs(mean) < 1e-300) return 0.0;
  return (k / mean - Mat::Ones(n, n)).norm() / n;
}

Mat fixture_inputs(int n_samples, int dim) {
  Rng rng(0xF1C7);
  // Shared low-frequency base.
  Vec base(dim);
  const double a0 = rng.uniform(0.5, 1.0), a1 = rng.uniform(0.2, 0.5);
  const double p0 = rng.uniform(0.0, 6.28), p1 = rng.uniform(0.0, 6.28);
  for (int i = 0; i < dim; ++i) {
    const double u = static_cast<double>(i) / dim;
    base[i] = a0 * std::sin(2.0 * M_PI * u + p0) + a1 * std::sin(4.0 * M_PI * u + p1) + 1.5;
  }
  Mat x(n_samples, dim);
  for (int s = 0; s < n_samples; ++s) {
    const double f0 = rng.uniform(3.5, 5.0);
    const double f1 = rng.uniform(8.0, 14.0);
    const double f2 = rng.uniform(16.0, 24.0);
    const double p0 = rng.uniform(0.0, 6.28);
    const double q1 = rng.uniform(0.0, 6.28), q2 = rng.uniform(0.0, 6.28);
    const double a1 = rng.uniform(0.4, 0.9), a2 = rng.uniform(0.2, 0.5);
    Vec detail(dim);
    for (int i = 0; i < dim; ++i) {
      const double u = static_cast<double>(i) / (dim - 1);
      // sin^2 window: detail vanishes at the signal ends, so replicate
      // padding does not carry per-sample content through heavy blur. The
      // tones span medium to high frequencies so every increase of sigma on
      // the verification grid removes strictly more of the detail.
      const double window = std::sin(M_PI * u) * std::sin(M_PI * u);
      detail[i] = window * (0.3 * std::sin(2.0 * M_PI * f0 * u + p0) +
                            a1 * std::sin(2.0 * M_PI * f1 * u + q1) +
                            a2 * std::sin(2.0 * M_PI * f2 * u + q2));
    }
    x.row(s) = (base + detail).transpose();
  }
  return x;
}

Vec fixture_labels(int n_samples) {
  Rng rng(0xF1C8);
  Vec y(n_samples);
  for (int i = 0; i < n_samples; ++i) y[i] = rng.uniform(-1.0, 1.0);
  return y;
}

VerifyReport verify(double sigma_flow, double eta) {
  VerifyReport rep;
  const Mat x = fixture_inputs();
  const Vec y = fixture_labels();

  rep.sigma_grid = {0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
  for (double s : rep.sigma_grid) rep.deviations.push_back(rank1_deviation(x, s));

  const Mat k = blurred_kernel_matrix(x, sigma_flow);
  Eigen::SelfAdjointEigenSolver<Mat> eig(k);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  const double t_max = 4.0 / (eta * lambda_max);
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(t_max * i / 20.0);

  const Vec w0 = Vec::Zero(x.cols());
  const Vec r0 = blur_rows(x, sigma_flow) * w0 - y;
  const auto flow = gradient_flow_sim(x, y, sigma_flow, eta, w0, grid);
  rep.times = flow.times;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec th = residual_theory(k, r0, eta, grid[i]);
    rep.theory_norms.push_back(th.norm());
    rep.sim_norms.push_back(flow.residuals[i].norm());
    const double rel = (flow.residuals[i] - th).norm() / std::max(th.norm(), 1e-12);
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
  }
  return rep;
}

}  // namespace factr::ntk
