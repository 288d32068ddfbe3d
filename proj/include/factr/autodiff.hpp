#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "factr/error.hpp"

namespace factr::autodiff {

using Mat = Eigen::MatrixXd;

// Reverse-mode tape over dense matrices. A forward pass appends nodes;
// backward() walks the tape once in reverse. Nodes are addressed by index so
// the tape vector may reallocate freely during the forward pass.
class Tape {
 public:
  int leaf(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, {}});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Mat& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Mat& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  std::size_t size() const { return nodes_.size(); }

  int add(int a, int b) {
    require_same_shape(a, b, "add");
    return push(val(a) + val(b), [a, b](Tape& t, const Mat& g) {
      t.accum(a, g);
      t.accum(b, g);
    });
  }

  int sub(int a, int b) {
    require_same_shape(a, b, "sub");
    return push(val(a) - val(b), [a, b](Tape& t, const Mat& g) {
      t.accum(a, g);
      t.accum(b, -g);
    });
  }

  // Broadcast a 1 x d row (bias) over every row of a.
  int add_rowvec(int a, int row) {
    if (val(row).rows() != 1 || val(row).cols() != val(a).cols()) {
      raise(ErrorKind::invalid_argument, "add_rowvec shape mismatch");
    }
    Mat out = val(a);
    out.rowwise() += val(row).row(0);
    return push(std::move(out), [a, row](Tape& t, const Mat& g) {
      t.accum(a, g);
      t.accum(row, g.colwise().sum());
    });
  }

  int scale(int a, double s) {
    return push(val(a) * s, [a, s](Tape& t, const Mat& g) { t.accum(a, s * g); });
  }

  int matmul(int a, int b, bool ta = false, bool tb = false) {
    const Mat& A = val(a);
    const Mat& B = val(b);
    Mat out;
    if (!ta && !tb) out = A * B;
    else if (!ta && tb) out = A * B.transpose();
    else if (ta && !tb) out = A.transpose() * B;
    else out = A.transpose() * B.transpose();
    return push(std::move(out), [a, b, ta, tb](Tape& t, const Mat& g) {
      const Mat& A = t.val(a);
      const Mat& B = t.val(b);
      if (!ta && !tb) {
        t.accum(a, g * B.transpose());
        t.accum(b, A.transpose() * g);
      } else if (!ta && tb) {
        t.accum(a, g * B);
        t.accum(b, g.transpose() * A);
      } else if (ta && !tb) {
        t.accum(a, B * g.transpose());
        t.accum(b, A * g);
      } else {
        t.accum(a, B.transpose() * g.transpose());
        t.accum(b, g.transpose() * A.transpose());
      }
    });
  }

  int softmax_rows(int a) {
    const Mat& x = val(a);
    Mat p(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
      const double m = x.row(r).maxCoeff();
      p.row(r) = (x.row(r).array() - m).exp();
      p.row(r) /= p.row(r).sum();
    }
    const int out = push(std::move(p), {});
    set_back(out, [a, out](Tape& t, const Mat& g) {
      const Mat& p = t.val(out);
      Mat dx(p.rows(), p.cols());
      for (int r = 0; r < p.rows(); ++r) {
        const double dot = g.row(r).dot(p.row(r));
        dx.row(r) = p.row(r).cwiseProduct(g.row(r).array().operator-(dot).matrix());
      }
      t.accum(a, dx);
    });
    return out;
  }

  // Row-wise layer normalization with learned gain/bias rows.
  int layer_norm(int x, int gamma, int beta, double eps = 1e-5) {
    const Mat& xv = val(x);
    const int d = static_cast<int>(xv.cols());
    if (val(gamma).cols() != d || val(beta).cols() != d) {
      raise(ErrorKind::invalid_argument, "layer_norm gain/bias shape mismatch");
    }
    Mat xhat(xv.rows(), d);
    Eigen::VectorXd inv_std(xv.rows());
    for (int r = 0; r < xv.rows(); ++r) {
      const double mu = xv.row(r).mean();
      const double var = (xv.row(r).array() - mu).square().mean();
      inv_std[r] = 1.0 / std::sqrt(var + eps);
      xhat.row(r) = (xv.row(r).array() - mu) * inv_std[r];
    }
    Mat out = xhat;
    out.array().rowwise() *= val(gamma).row(0).array();
    out.rowwise() += val(beta).row(0);
    const int id = push(std::move(out), {});
    // xhat and inv_std are captured by value for the backward pass.
    set_back(id, [x, gamma, beta, xhat, inv_std](Tape& t, const Mat& g) {
      const int d = static_cast<int>(xhat.cols());
      Mat dx(xhat.rows(), d);
      Mat dgamma = Mat::Zero(1, d);
      Mat dbeta = Mat::Zero(1, d);
      const auto gam = t.val(gamma).row(0);
      for (int r = 0; r < xhat.rows(); ++r) {
        const auto gr = g.row(r);
        dgamma.row(0) += gr.cwiseProduct(xhat.row(r));
        dbeta.row(0) += gr;
        const Eigen::RowVectorXd gy = gr.cwiseProduct(gam);
        const double m1 = gy.mean();
        const double m2 = gy.cwiseProduct(xhat.row(r)).mean();
        dx.row(r) = inv_std[r] * (gy.array() - m1 - xhat.row(r).array() * m2);
      }
      t.accum(x, dx);
      t.accum(gamma, dgamma);
      t.accum(beta, dbeta);
    });
    return id;
  }

  int gelu(int a) {
    const auto cdf = [](double v) { return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0))); };
    const Mat out = val(a).unaryExpr([&](double v) { return v * cdf(v); });
    return push(out, [a, cdf](Tape& t, const Mat& g) {
      const Mat slope = t.val(a).unaryExpr([&](double v) {
        return cdf(v) + v * std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
      });
      t.accum(a, g.cwiseProduct(slope));
    });
  }

  int slice_cols(int a, int c0, int n) {
    return push(val(a).middleCols(c0, n), [a, c0, n](Tape& t, const Mat& g) {
      Mat d = Mat::Zero(t.val(a).rows(), t.val(a).cols());
      d.middleCols(c0, n) = g;
      t.accum(a, d);
    });
  }

  int slice_rows(int a, int r0, int n) {
    return push(val(a).middleRows(r0, n), [a, r0, n](Tape& t, const Mat& g) {
      Mat d = Mat::Zero(t.val(a).rows(), t.val(a).cols());
      d.middleRows(r0, n) = g;
      t.accum(a, d);
    });
  }

  int concat_rows(const std::vector<int>& parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = val(parts.front()).cols();
    for (int p : parts) rows += val(p).rows();
    Mat out(rows, cols);
    Eigen::Index r = 0;
    for (int p : parts) {
      out.middleRows(r, val(p).rows()) = val(p);
      r += val(p).rows();
    }
    return push(std::move(out), [parts](Tape& t, const Mat& g) {
      Eigen::Index r = 0;
      for (int p : parts) {
        t.accum(p, g.middleRows(r, t.val(p).rows()));
        r += t.val(p).rows();
      }
    });
  }

  int concat_cols(const std::vector<int>& parts) {
    Eigen::Index cols = 0;
    const Eigen::Index rows = val(parts.front()).rows();
    for (int p : parts) cols += val(p).cols();
    Mat out(rows, cols);
    Eigen::Index c = 0;
    for (int p : parts) {
      out.middleCols(c, val(p).cols()) = val(p);
      c += val(p).cols();
    }
    return push(std::move(out), [parts](Tape& t, const Mat& g) {
      Eigen::Index c = 0;
      for (int p : parts) {
        t.accum(p, g.middleCols(c, t.val(p).cols()));
        c += t.val(p).cols();
      }
    });
  }

  // Non-overlapping max pooling down the rows followed by nearest
  // re-expansion to the input height, per column. Gradients route to the
  // argmax row of each block (first index wins ties).
  int maxpool_rows(int a, int k) {
    if (k < 1) raise(ErrorKind::invalid_argument, "pool size must be >= 1");
    const Mat& x = val(a);
    const int m = static_cast<int>(x.rows());
    const int cols = static_cast<int>(x.cols());
    const int blocks = (m + k - 1) / k;
    Mat out(m, cols);
    Eigen::MatrixXi arg(blocks, cols);
    for (int b = 0; b < blocks; ++b) {
      const int r0 = b * k;
      const int r1 = std::min(r0 + k, m);
      for (int c = 0; c < cols; ++c) {
        int best = r0;
        for (int r = r0 + 1; r < r1; ++r)
          if (x(r, c) > x(best, c)) best = r;
        arg(b, c) = best;
        for (int r = r0; r < r1; ++r) out(r, c) = x(best, c);
      }
    }
    return push(std::move(out), [a, k, arg](Tape& t, const Mat& g) {
      const int m = static_cast<int>(t.val(a).rows());
      const int cols = static_cast<int>(t.val(a).cols());
      Mat d = Mat::Zero(m, cols);
      const int blocks = (m + k - 1) / k;
      for (int b = 0; b < blocks; ++b) {
        const int r0 = b * k;
        const int r1 = std::min(r0 + k, m);
        for (int c = 0; c < cols; ++c) {
          double sum = 0.0;
          for (int r = r0; r < r1; ++r) sum += g(r, c);
          d(arg(b, c), c) += sum;
        }
      }
      t.accum(a, d);
    });
  }

  // Mean squared error against a constant target; returns a 1x1 node.
  int mse(int pred, const Mat& target) {
    if (val(pred).rows() != target.rows() || val(pred).cols() != target.cols()) {
      raise(ErrorKind::invalid_argument, "mse shape mismatch");
    }
    const Mat diff = val(pred) - target;
    Mat out(1, 1);
    out(0, 0) = diff.squaredNorm() / static_cast<double>(diff.size());
    return push(std::move(out), [pred, diff](Tape& t, const Mat& g) {
      t.accum(pred, (2.0 / static_cast<double>(diff.size())) * g(0, 0) * diff);
    });
  }

  // Seeds d(root)/d(root) = 1 and sweeps the tape. root must be 1x1.
  void backward(int root) {
    if (val(root).size() != 1) raise(ErrorKind::invalid_argument, "backward root must be scalar");
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[static_cast<std::size_t>(root)].grad(0, 0) = 1.0;
    for (int i = root; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && !n.grad.isZero(0.0)) n.back(*this, n.grad);
    }
    if (!all_finite_grads()) raise(ErrorKind::numeric, "non-finite gradient");
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&, const Mat&)> back;
  };

  int push(Mat value, std::function<void(Tape&, const Mat&)> back) {
    nodes_.push_back(Node{std::move(value), {}, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_back(int id, std::function<void(Tape&, const Mat&)> back) {
    nodes_[static_cast<std::size_t>(id)].back = std::move(back);
  }

  void accum(int id, const Mat& g) { nodes_[static_cast<std::size_t>(id)].grad += g; }

  void require_same_shape(int a, int b, const char* what) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols()) {
      raise(ErrorKind::invalid_argument, std::string(what) + " shape mismatch");
    }
  }

  bool all_finite_grads() const {
    for (const auto& n : nodes_) {
      if (n.grad.size() > 0 && !n.grad.allFinite()) return false;
    }
    return true;
  }

  std::vector<Node> nodes_;
};

}  // namespace factr::autodiff
