#pragma once

#include <Eigen/Dense>
#include <vector>

#include "factr/error.hpp"

namespace factr::ntk {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Rows of X are 1D input signals. Each row is smoothed with the curriculum
// Gaussian kernel (replicate padding) before anything else happens.
Mat blur_rows(const Mat& x, double sigma);

// Gram matrix of the blurred inputs; the tangent kernel of the linear model
// f(x) = w . blur(x), which is exact rather than asymptotic.
Mat blurred_kernel_matrix(const Mat& x, double sigma);

// Residual r(t) = exp(-eta K t) r(0) via symmetric eigendecomposition.
Vec residual_theory(const Mat& k, const Vec& r0, double eta, double t);

struct FlowResult {
  std::vector<double> times;
  std::vector<Vec> residuals;
};

// Explicit gradient descent on 0.5 * ||blur(X) w - y||^2 starting from w0,
// sampled at the requested times. dt_scale controls the Euler step as
// dt = dt_scale / (eta * lambda_max); throws if the residual diverges.
FlowResult gradient_flow_sim(const Mat& x, const Vec& y, double sigma, double eta, const Vec& w0,
                             const std::vector<double>& time_grid, double dt_scale = 2e-4);

// Frobenius distance between K normalized by its mean and the all-ones
// matrix, divided by n. Zero for identical inputs, shrinking with sigma.
double rank1_deviation(const Mat& x, double sigma);

// Deterministic verification fixture: a shared smooth base signal plus
// per-sample zero-mean high-frequency detail, so growing blur collapses the
// samples onto one vector.
Mat fixture_inputs(int n_samples = 12, int dim = 64);
Vec fixture_labels(int n_samples = 12);

struct VerifyReport {
  std::vector<double> sigma_grid;
  std::vector<double> deviations;
  std::vector<double> times;
  std::vector<double> theory_norms;
  std::vector<double> sim_norms;
  double max_rel_err = 0.0;
};

// Runs the deviation sweep and the theory-vs-simulation comparison on the
// fixture; backs the ntk-verify command.
VerifyReport verify(double sigma_flow = 2.0, double eta = 0.5);

}  // namespace factr::ntk
