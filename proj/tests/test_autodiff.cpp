#include <doctest.h>

#include <functional>
#include <vector>

#include "factr/autodiff.hpp"
#include "factr/rng.hpp"

using namespace factr;
using namespace factr::autodiff;

namespace {

using Builder = std::function<int(Tape&, const std::vector<int>&)>;

Mat random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

double run_loss(const std::vector<Mat>& inputs, const Builder& build) {
  Tape t;
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const auto& m : inputs) ids.push_back(t.leaf(m));
  return t.val(build(t, ids))(0, 0);
}

// Central finite differences over every entry of every input against the
// tape gradient. This is the reference the whole policy stack leans on.
double max_rel_grad_err(std::vector<Mat> inputs, const Builder& build, double h = 1e-6) {
  Tape t;
  std::vector<int> ids;
  for (const auto& m : inputs) ids.push_back(t.leaf(m));
  const int loss = build(t, ids);
  t.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (int i = 0; i < inputs[k].rows(); ++i) {
      for (int j = 0; j < inputs[k].cols(); ++j) {
        auto perturbed = inputs;
        perturbed[k](i, j) += h;
        const double fp = run_loss(perturbed, build);
        perturbed[k](i, j) -= 2.0 * h;
        const double fm = run_loss(perturbed, build);
        const double fd = (fp - fm) / (2.0 * h);
        const double an = t.grad(ids[k])(i, j);
        worst = std::max(worst, std::abs(fd - an) / std::max({1e-8, std::abs(fd), std::abs(an)}));
      }
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("elementwise and broadcast ops differentiate") {
  Rng rng(1);
  const Mat target = random_mat(rng, 3, 4);

  SUBCASE("add/sub/scale") {
    const Builder b = [&](Tape& t, const std::vector<int>& in) {
      return t.mse(t.scale(t.sub(t.add(in[0], in[1]), in[2]), 1.7), target);
    };
    CHECK(max_rel_grad_err({random_mat(rng, 3, 4), random_mat(rng, 3, 4), random_mat(rng, 3, 4)}, b) <
          1e-6);
  }

  SUBCASE("row-vector bias broadcast") {
    const Builder b = [&](Tape& t, const std::vector<int>& in) {
      return t.mse(t.add_rowvec(in[0], in[1]), target);
    };
    CHECK(max_rel_grad_err({random_mat(rng, 3, 4), random_mat(rng, 1, 4)}, b) < 1e-6);
  }

  SUBCASE("gelu") {
    const Builder b = [&](Tape& t, const std::vector<int>& in) {
      return t.mse(t.gelu(in[0]), target);
    };
    CHECK(max_rel_grad_err({random_mat(rng, 3, 4, 2.0)}, b) < 1e-6);
  }
}

TEST_CASE("matmul differentiates in all four transpose modes") {
  Rng rng(2);
  const Mat target = random_mat(rng, 3, 5);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      const int ar = ta ? 4 : 3, ac = ta ? 3 : 4;
      const int br = tb ? 5 : 4, bc = tb ? 4 : 5;
      const Builder b = [&, ta, tb](Tape& t, const std::vector<int>& in) {
        return t.mse(t.matmul(in[0], in[1], ta, tb), target);
      };
      CAPTURE(ta);
      CAPTURE(tb);
      CHECK(max_rel_grad_err({random_mat(rng, ar, ac), random_mat(rng, br, bc)}, b) < 1e-6);
    }
  }
}

TEST_CASE("softmax rows sum to one and differentiate") {
  Rng rng(3);
  Tape t;
  const int x = t.leaf(random_mat(rng, 4, 6, 2.0));
  const int p = t.softmax_rows(x);
  for (int r = 0; r < 4; ++r) CHECK(t.val(p).row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));

  const Mat target = random_mat(rng, 4, 6);
  const Builder b = [&](Tape& tt, const std::vector<int>& in) {
    return tt.mse(tt.softmax_rows(in[0]), target);
  };
  CHECK(max_rel_grad_err({random_mat(rng, 4, 6, 2.0)}, b) < 1e-6);
}

TEST_CASE("layer norm differentiates through x, gain and bias") {
  Rng rng(4);
  const Mat target = random_mat(rng, 3, 6);
  const Builder b = [&](Tape& t, const std::vector<int>& in) {
    return t.mse(t.layer_norm(in[0], in[1], in[2]), target);
  };
  CHECK(max_rel_grad_err(
            {random_mat(rng, 3, 6, 1.5), random_mat(rng, 1, 6).array().abs().matrix() + Mat::Ones(1, 6) * 0.5,
             random_mat(rng, 1, 6)},
            b) < 1e-6);
}

TEST_CASE("slices and concatenation route gradients to the right places") {
  Rng rng(5);
  const Mat target = random_mat(rng, 4, 4);
  const Builder b = [&](Tape& t, const std::vector<int>& in) {
    const int top = t.slice_rows(in[0], 0, 2);
    const int bottom = t.slice_rows(in[0], 2, 2);
    const int swapped = t.concat_rows({bottom, top});
    const int left = t.slice_cols(swapped, 0, 2);
    const int right = t.slice_cols(swapped, 2, 2);
    return t.mse(t.concat_cols({right, left}), target);
  };
  CHECK(max_rel_grad_err({random_mat(rng, 4, 4)}, b) < 1e-6);
}

TEST_CASE("a small attention-flavored composite differentiates") {
  Rng rng(6);
  const Mat target = random_mat(rng, 3, 4);
  const Builder b = [&](Tape& t, const std::vector<int>& in) {
    const int q = t.matmul(in[0], in[2]);
    const int k = t.matmul(in[1], in[2]);
    const int scores = t.scale(t.matmul(q, k, false, true), 1.0 / 2.0);
    const int attn = t.softmax_rows(scores);
    const int mixed = t.matmul(attn, in[1]);
    return t.mse(t.gelu(mixed), target);
  };
  CHECK(max_rel_grad_err({random_mat(rng, 3, 4), random_mat(rng, 5, 4), random_mat(rng, 4, 4)}, b,
                         1e-5) < 1e-6);
}

TEST_CASE("zero loss yields zero gradients") {
  Rng rng(7);
  const Mat x = random_mat(rng, 3, 3);
  Tape t;
  const int a = t.leaf(x);
  const int loss = t.mse(a, x);  // identical prediction and target
  t.backward(loss);
  CHECK(t.val(loss)(0, 0) == 0.0);
  CHECK(t.grad(a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("error paths") {
  Tape t;
  const int a = t.leaf(Mat::Zero(2, 3));
  const int b = t.leaf(Mat::Zero(3, 2));
  CHECK_THROWS_AS(t.add(a, b), Error);
  CHECK_THROWS_AS(t.mse(a, Mat::Zero(3, 3)), Error);
  CHECK_THROWS_AS(t.backward(a), Error);
}

}  // TEST_SUITE
