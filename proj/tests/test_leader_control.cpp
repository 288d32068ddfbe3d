#include <doctest.h>

#include <cmath>

#include "factr/leader_control.hpp"
#include "factr/rng.hpp"
#include "oracles.hpp"

using namespace factr;
using namespace factr::ctl;
using dyn::ChainModel;
using dyn::Mat;
using dyn::Vec;
using dyn::Vec2;

namespace {

ChainModel test_chain() {
  ChainModel m;
  m.n_joints = 2;
  m.length = {1.0, 0.8};
  m.com_offset = {0.5, 0.4};
  m.mass = {1.5, 0.9};
  m.inertia = {0.06, 0.03};
  m.q_min = {-2.8, -2.8};
  m.q_max = {2.8, 2.8};
  return m;
}

ControllerGains zero_gains(const ChainModel& m) {
  const int n = m.n_joints;
  ControllerGains g;
  g.mu_f = 1.0;
  g.k_fp = Vec::Zero(n);
  g.k_fd = Vec::Zero(n);
  g.k_np = Vec::Zero(n);
  g.k_nd = Vec::Zero(n);
  g.q_rest = Vec::Zero(n);
  g.tau_max = Vec::Constant(n, 1e6);
  g.friction.mu_s = Vec::Zero(n);
  g.friction.dq_s = Vec::Constant(n, 0.05);
  g.friction.mu_c = Vec::Zero(n);
  g.friction.mu_v = Vec::Zero(n);
  g.limit.eta_limit = 0.0;
  g.limit.delta_q = 0.3;
  return g;
}

}  // namespace

TEST_SUITE("leader_control") {

TEST_CASE("force feedback formula") {
  auto m = test_chain();
  auto g = zero_gains(m);
  Vec zero = Vec::Zero(2);

  CHECK(force_feedback_torque(zero, zero, g).cwiseAbs().maxCoeff() == 0.0);

  g.mu_f = 0.5;
  g.k_fp = Vec::Constant(2, 2.0);
  Vec tau_ext(2);
  tau_ext << 1.0, 1.0;
  Vec out = force_feedback_torque(tau_ext, zero, g);
  CHECK(out[0] == doctest::Approx(1.0));
  CHECK(out[1] == doctest::Approx(1.0));

  g = zero_gains(m);
  g.k_fd = Vec::Constant(2, 0.1);
  Vec dq(2);
  dq << 2.0, 0.0;
  out = force_feedback_torque(zero, dq, g);
  CHECK(out[0] == doctest::Approx(-0.2));
  CHECK(out[1] == doctest::Approx(0.0));

  CHECK_THROWS_AS(force_feedback_torque(Vec::Zero(3), zero, g), Error);
}

TEST_CASE("gripper feedback EMA") {
  GripperFeedbackState s;
  s.alpha = 0.1;
  s.k_h = 1.0;
  CHECK(gripper_feedback_step(s, 1.0) == doctest::Approx(-0.1));

  // Constant current converges to the EMA fixed point.
  s = GripperFeedbackState{};
  s.alpha = 0.1;
  s.k_h = 0.7;
  for (int i = 0; i < 500; ++i) gripper_feedback_step(s, 2.0);
  CHECK(s.tau_h == doctest::Approx(-0.7 * 2.0).epsilon(1e-9));

  GripperFeedbackState memoryless;
  memoryless.alpha = 1.0;
  memoryless.k_h = 3.0;
  memoryless.tau_h = 42.0;
  CHECK(gripper_feedback_step(memoryless, 0.5) == doctest::Approx(-1.5));
}

TEST_CASE("nullspace torque vanishes at rest and for square jacobians") {
  auto m = test_chain();
  auto g = zero_gains(m);
  g.k_np = Vec::Constant(2, 5.0);
  g.k_nd = Vec::Constant(2, 1.0);
  g.q_rest = Vec::Zero(2);
  g.pinv_damping = 0.0;

  Vec q(2), dq = Vec::Zero(2);
  q << 0.8, -0.5;  // away from singularities, J is square full rank
  const Mat J = dyn::jacobian(m, q);
  CHECK(nullspace_torque(J, q, dq, g).cwiseAbs().maxCoeff() < 1e-9);

  // Default damping stays numerically indistinguishable from zero.
  g.pinv_damping = 1e-6;
  CHECK(nullspace_torque(J, q, dq, g).cwiseAbs().maxCoeff() < 1e-9);

  q = g.q_rest;
  CHECK(nullspace_torque(dyn::jacobian(m, q), q, dq, g).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("nullspace torque exerts no end-effector wrench") {
  Rng rng(101);
  auto m = test_chain();
  auto g = zero_gains(m);
  g.k_np = Vec::Constant(4, 3.0);
  g.k_nd = Vec::Constant(4, 0.5);
  g.q_rest = Vec::Zero(4);
  g.pinv_damping = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Mat J(2, 4);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) J(r, c) = rng.uniform(-2.0, 2.0);
    Eigen::JacobiSVD<Mat> svd(J);
    if (svd.singularValues().minCoeff() < 0.2) continue;
    Vec q(4), dq(4);
    for (int i = 0; i < 4; ++i) {
      q[i] = rng.uniform(-2.0, 2.0);
      dq[i] = rng.uniform(-1.0, 1.0);
    }
    const Vec tau = nullspace_torque(J, q, dq, g);
    const Mat pinv = dyn::damped_pinv(J, 0.0);
    CHECK((pinv.transpose() * tau).norm() < 1e-8);
  }
}

TEST_CASE("gravity compensation closed forms") {
  ChainModel pend;
  pend.n_joints = 1;
  pend.length = {0.8};
  pend.com_offset = {0.5};
  pend.mass = {2.0};
  pend.inertia = {0.04};
  pend.q_min = {-3.0};
  pend.q_max = {3.0};
  ControllerGains g = zero_gains(test_chain());
  g.k_fp = g.k_fd = g.k_np = g.k_nd = g.q_rest = Vec::Zero(1);
  g.tau_max = Vec::Constant(1, 1e6);
  g.friction.mu_s = g.friction.mu_c = g.friction.mu_v = Vec::Zero(1);
  g.friction.dq_s = Vec::Constant(1, 0.05);

  Vec q(1), dq = Vec::Zero(1);
  q << 0.6;
  CHECK(gravity_comp(pend, q, dq, g)[0] == doctest::Approx(2.0 * 9.81 * 0.5 * std::cos(0.6)));

  pend.gravity = Vec2(0.0, 0.0);
  CHECK(gravity_comp(pend, q, dq, g).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gravity hold keeps a simulated leader in place") {
  auto m = test_chain();
  auto g = zero_gains(m);
  Vec q(2), dq = Vec::Zero(2);
  q << 0.9, -0.7;
  const Vec q0 = q;
  const double dt = 1.0 / 500.0;
  for (int tick = 0; tick < 500; ++tick) {
    const Vec tau = gravity_comp(m, q, dq, g);
    const Vec ddq = dyn::forward_dynamics(m, q, dq, tau, m.gravity);
    dq += dt * ddq;
    q += dt * dq;
  }
  CHECK((q - q0).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("friction compensation terms") {
  FrictionParams p;
  p.mu_s = Vec::Constant(1, 0.3);
  p.dq_s = Vec::Constant(1, 0.05);
  p.mu_c = Vec::Constant(1, 0.2);
  p.mu_v = Vec::Constant(1, 0.05);

  Vec dq(1);
  dq << 0.0;
  CHECK(friction_comp(dq, 0.0, p)[0] == doctest::Approx(0.3));  // cos(0) = 1, static only

  dq << 1.0;  // above the gate, static term off
  CHECK(friction_comp(dq, 0.123, p)[0] == doctest::Approx(0.25));

  dq << -1.0;
  CHECK(friction_comp(dq, 0.123, p)[0] == doctest::Approx(-0.25));

  // Literal dither form differs from the tick-rate form away from t = 0.
  FrictionParams lit = p;
  lit.literal_dither = true;
  dq << 0.0;
  const double t = 0.25;
  CHECK(friction_comp(dq, t, lit)[0] == doctest::Approx(0.3 * std::cos(M_PI * t / 500.0)));
  CHECK(friction_comp(dq, t, p)[0] == doctest::Approx(0.3 * std::cos(M_PI * t * 500.0)));
}

TEST_CASE("kinetic friction cancels an identical plant model") {
  FrictionParams p;
  p.mu_s = Vec::Constant(2, 0.3);
  p.dq_s = Vec::Constant(2, 0.05);
  p.mu_c = Vec::Constant(2, 0.2);
  p.mu_v = Vec::Constant(2, 0.07);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Vec dq(2);
    dq << rng.uniform(0.06, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0),
        rng.uniform(0.06, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    Vec plant(2);
    for (int i = 0; i < 2; ++i)
      plant[i] = -(p.mu_c[i] * ((dq[i] > 0) - (dq[i] < 0)) + p.mu_v[i] * dq[i]);
    const Vec comp = friction_comp(dq, rng.uniform(0.0, 1.0), p);
    CHECK((plant + comp).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("joint limit torque") {
  auto m = test_chain();
  LimitParams p;
  p.eta_limit = 0.02;
  p.delta_q = 0.3;

  SUBCASE("interior is torque free") {
    Vec q = Vec::Zero(2);
    CHECK(joint_limit_torque(q, m, p).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("repulsion sign near the lower limit") {
    Vec q(2);
    q << m.q_min[0] + 0.5 * p.delta_q, 0.0;
    const Vec tau = joint_limit_torque(q, m, p);
    CHECK(tau[0] > 0.0);
    CHECK(tau[1] == 0.0);
  }

  SUBCASE("matches the finite-difference potential gradient across the band") {
    for (int k = 0; k < 20; ++k) {
      const double rho = p.delta_q * (0.15 + 0.04 * k);
      const double q0 = m.q_min[0] + rho;
      Vec q(2);
      q << q0, 0.0;
      const double tau = joint_limit_torque(q, m, p)[0];
      const double h = 1e-7;
      const double fd = -(joint_limit_potential(q0 + h, m.q_min[0], m.q_max[0], p) -
                          joint_limit_potential(q0 - h, m.q_min[0], m.q_max[0], p)) /
                        (2.0 * h);
      CHECK(std::abs(tau - fd) / std::max(1e-12, std::abs(fd)) < 1e-4);
    }
  }

  SUBCASE("potential and torque vanish continuously at the band edge") {
    const double q_edge = m.q_min[0] + p.delta_q * (1.0 - 1e-9);
    Vec q(2);
    q << q_edge, 0.0;
    CHECK(std::abs(joint_limit_torque(q, m, p)[0]) < 1e-6);
    CHECK(joint_limit_potential(q_edge, m.q_min[0], m.q_max[0], p) < 1e-12);
    q << m.q_min[0] + p.delta_q, 0.0;
    CHECK(std::abs(joint_limit_torque(q, m, p)[0]) < 1e-12);
  }

  SUBCASE("violated limits raise a fault") {
    Vec q(2);
    q << m.q_min[0] - 0.01, 0.0;
    CHECK_THROWS_AS(joint_limit_torque(q, m, p), Error);
  }
}

TEST_CASE("total torque equals the sum of its parts and clamps") {
  auto m = test_chain();
  auto g = zero_gains(m);
  g.mu_f = 0.8;
  g.k_fp = Vec::Constant(2, 0.4);
  g.k_fd = Vec::Constant(2, 0.05);
  g.k_np = Vec::Constant(2, 2.0);
  g.k_nd = Vec::Constant(2, 0.3);
  g.q_rest << 0.3, -0.3;
  g.friction.mu_c = Vec::Constant(2, 0.1);
  g.friction.mu_v = Vec::Constant(2, 0.02);
  g.friction.mu_s = Vec::Constant(2, 0.05);
  g.limit.eta_limit = 0.02;

  Vec q(2), dq(2), tau_ext(2);
  q << 0.7, -0.6;
  dq << 0.4, -0.2;
  tau_ext << 1.5, -0.8;
  const double t = 0.42;

  const auto total = total_leader_torque(m, q, dq, tau_ext, t, g);
  const Vec expected = force_feedback_torque(tau_ext, dq, g) +
                       nullspace_torque(dyn::jacobian(m, q), q, dq, g) +
                       gravity_comp(m, q, dq, g) + friction_comp(dq, t, g.friction) +
                       joint_limit_torque(q, m, g.limit);
  CHECK((total.raw - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((total.raw - total.clamped).cwiseAbs().maxCoeff() < 1e-15);

  // All components zero -> zero.
  auto quiet = zero_gains(m);
  ChainModel weightless = m;
  weightless.gravity = Vec2(0.0, 0.0);
  const auto rest = total_leader_torque(weightless, Vec::Zero(2), Vec::Zero(2), Vec::Zero(2), 0.0, quiet);
  CHECK(rest.raw.cwiseAbs().maxCoeff() == 0.0);

  // Saturation keeps the raw value for telemetry.
  g.tau_max = Vec::Constant(2, 0.5);
  const auto sat = total_leader_torque(m, q, dq, tau_ext, t, g);
  CHECK(sat.clamped.cwiseAbs().maxCoeff() <= 0.5 + 1e-15);
  CHECK((sat.raw - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(sat.raw.cwiseAbs().maxCoeff() > 0.5);
}

TEST_CASE("controller output is deterministic") {
  auto m = test_chain();
  auto g = zero_gains(m);
  g.k_fp = Vec::Constant(2, 0.4);
  g.friction.mu_s = Vec::Constant(2, 0.05);
  Vec q(2), dq(2), tau_ext(2);
  q << 0.2, 0.1;
  dq << -0.3, 0.7;
  tau_ext << 0.5, 0.25;
  const auto a = total_leader_torque(m, q, dq, tau_ext, 0.125, g);
  const auto b = total_leader_torque(m, q, dq, tau_ext, 0.125, g);
  CHECK(std::memcmp(a.raw.data(), b.raw.data(), sizeof(double) * 2) == 0);
  CHECK(std::memcmp(a.clamped.data(), b.clamped.data(), sizeof(double) * 2) == 0);
}

TEST_CASE("gains validation") {
  auto m = test_chain();
  auto g = zero_gains(m);
  CHECK_NOTHROW(g.validate(m));
  g.mu_f = 0.0;
  CHECK_THROWS_AS(g.validate(m), Error);
  g = zero_gains(m);
  g.limit.delta_q = 10.0;
  CHECK_THROWS_AS(g.validate(m), Error);
}

}  // TEST_SUITE
