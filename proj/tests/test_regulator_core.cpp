#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "gpreg/regulator_core.hpp"
#include "oracles.hpp"

using namespace gpreg;

namespace {

InternalModelParams highgain_im() { return {2.0, Eigen::Vector2d(15.0, 70.0)}; }

StabilizerParams stab(double l, double delta, double L) {
  StabilizerParams s;
  s.l = l;
  s.delta = delta;
  s.c = {Eigen::Vector3d(15.0, 75.0, 125.0)};
  s.L = Eigen::MatrixXd::Constant(1, 1, L);
  return s;
}

Eigen::VectorXd one(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TEST_SUITE("regulator_core") {
  TEST_CASE("structure matrices of a single triple chain") {
    const auto m = build_F_H_C({1, {3}, 2, 1});
    Eigen::Matrix3d F;
    F << 0, 1, 0, 0, 0, 1, 0, 0, 0;
    CHECK(m.F == F);
    CHECK(m.H == Eigen::Vector3d(0, 0, 1));
    CHECK(m.C == Eigen::RowVector3d(1, 0, 0));
  }

  TEST_CASE("structure matrices of a degenerate chain") {
    const auto m = build_F_H_C({1, {1}, 2, 1});
    CHECK(m.F.rows() == 1);
    CHECK(m.F(0, 0) == 0.0);
    CHECK(m.H(0, 0) == 1.0);
    CHECK(m.C(0, 0) == 1.0);
  }

  TEST_CASE("structure matrices of two chains are block diagonal") {
    const auto m = build_F_H_C({2, {2, 1}, 2, 2});
    Eigen::Matrix3d F;
    F << 0, 1, 0, 0, 0, 0, 0, 0, 0;
    Eigen::Matrix<double, 3, 2> H;
    H << 0, 0, 1, 0, 0, 1;
    Eigen::Matrix<double, 2, 3> C;
    C << 1, 0, 0, 0, 0, 1;
    CHECK(m.F == F);
    CHECK(m.H == H);
    CHECK(m.C == C);
  }

  TEST_CASE("structure validation") {
    CHECK_THROWS(build_F_H_C({2, {3}, 2, 2}));
    CHECK_THROWS(build_F_H_C({2, {3, 1}, 2, 1}));
    CHECK_THROWS(build_F_H_C({1, {0}, 2, 1}));
  }

  TEST_CASE("internal model at rest") {
    CHECK(internal_model_flow(Eigen::Vector2d::Zero(), one(0.0), one(0.0), highgain_im()).isZero());
  }

  TEST_CASE("internal model injection with the reference gains") {
    const auto rate = internal_model_flow(Eigen::Vector2d::Zero(), one(1.0), one(0.0), highgain_im());
    CHECK(rate(0) == 30.0);
    CHECK(rate(1) == 280.0);
  }

  TEST_CASE("internal model chain structure") {
    const auto rate = internal_model_flow(Eigen::Vector2d(0.7, -1.3), one(0.0), one(4.5), highgain_im());
    CHECK(rate(0) == -1.3);
    CHECK(rate(1) == 4.5);
  }

  TEST_CASE("internal model is affine in (eta, e, mu)") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const auto im = highgain_im();
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector2d a(u(rng), u(rng)), b(u(rng), u(rng));
      const double ea = u(rng), eb = u(rng), ma = u(rng), mb = u(rng), s = u(rng);
      const Eigen::VectorXd lhs = internal_model_flow(a + s * b, one(ea + s * eb), one(ma + s * mb), im);
      const Eigen::VectorXd rhs = internal_model_flow(a, one(ea), one(ma), im) +
                                  s * internal_model_flow(b, one(eb), one(mb), im) -
                                  s * internal_model_flow(Eigen::Vector2d::Zero(), one(0.0), one(0.0), im);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("observer with zero innovation integrates xi2") {
    const auto r = observer_flow(one(0.4), one(-2.0), one(0.4), one(3.0), {20, 20, 2});
    CHECK(r.xi1_dot(0) == -2.0);
    CHECK(r.xi2_dot(0) == 3.0);
  }

  TEST_CASE("observer injection with the reference gains") {
    const auto r = observer_flow(one(1.0), one(0.0), one(0.0), one(0.0), {20, 20, 2});
    CHECK(r.xi1_dot(0) == -40.0);
    CHECK(r.xi2_dot(0) == -80.0);
  }

  TEST_CASE("observer converges to a constant signal") {
    // Linear error system [[-m1 rho, 1], [-m2 rho^2, 0]]: integrate with small Euler steps.
    const ObserverParams p{20, 20, 2};
    double xi1 = 0.0, xi2 = 0.0;
    const double target = 1.5;
    for (int k = 0; k < 2000000; ++k) {  // slow pole near -2.1, so 20 s
      const auto r = observer_flow(one(xi1), one(xi2), one(target), one(0.0), p);
      xi1 += 1e-5 * r.xi1_dot(0);
      xi2 += 1e-5 * r.xi2_dot(0);
    }
    CHECK(xi1 == doctest::Approx(target).epsilon(1e-8));
    CHECK(std::abs(xi2) < 1e-6);
  }

  TEST_CASE("observer error eigenvalues scale with rho") {
    for (double rho : {0.5, 2.0, 8.0}) {
      const ObserverParams p{20, 20, rho};
      Eigen::Matrix2d A;
      A << -p.m1 * rho, 1.0, -p.m2 * rho * rho, 0.0;
      const Eigen::Vector2cd ev = Eigen::EigenSolver<Eigen::Matrix2d>(A).eigenvalues();
      // roots of s^2 + m1 s + m2, scaled by rho
      const double disc = std::sqrt(p.m1 * p.m1 - 4 * p.m2);
      const double r1 = rho * (-p.m1 + disc) / 2, r2 = rho * (-p.m1 - disc) / 2;
      const double lo = std::min(ev(0).real(), ev(1).real()), hi = std::max(ev(0).real(), ev(1).real());
      CHECK(lo == doctest::Approx(r2));
      CHECK(hi == doctest::Approx(r1));
      CHECK(hi < 0.0);
    }
  }

  TEST_CASE("mu derivative of an empty posterior is zero") {
    KernelParams kp;
    kp.lambda_eta = Eigen::Vector2d(0.1, 0.1);
    const auto post = GpPosterior::fit(SampleBuffer(5), kp);
    CHECK(mu_total_derivative(post, Eigen::Vector2d(0.1, 0.2), 0.3, one(1.0), one(0.0), highgain_im()).isZero());
  }

  TEST_CASE("mu derivative with frozen eta is the clock partial") {
    std::mt19937_64 rng(8);
    const auto c = oracle::random_case(rng, 8);
    const auto post = GpPosterior::fit(oracle::to_buffer(c.data, 10), oracle::to_params(c.hyper));
    const double dmu = mu_total_derivative(post, c.query, c.tau, Eigen::Vector2d::Zero())(0);
    const double h = 1e-6;
    const double fd = (post.mean(c.query, c.tau + h)(0) - post.mean(c.query, c.tau - h)(0)) / (2 * h);
    CHECK(dmu == doctest::Approx(fd).epsilon(1e-6));
  }

  TEST_CASE("mu derivative follows the integrated flow") {
    std::mt19937_64 rng(9);
    auto c = oracle::random_case(rng, 8);
    c.hyper.lambda_eta = Eigen::Vector2d(0.3, 0.3);
    const auto post = GpPosterior::fit(oracle::to_buffer(c.data, 10), oracle::to_params(c.hyper));
    InternalModelParams im{0.5, Eigen::Vector2d(3.0, 2.0)};
    const double e = 0.05;
    // RK4 on (eta, tau) with the internal model driven by the posterior mean.
    auto rate = [&](const Eigen::Vector3d& z) {
      Eigen::Vector3d r;
      r.head<2>() = internal_model_flow(z.head<2>(), one(e), post.mean(z.head<2>(), z(2)), im);
      r(2) = 1.0;
      return r;
    };
    auto step = [&](Eigen::Vector3d z, double h) {
      const Eigen::Vector3d k1 = rate(z), k2 = rate(z + h / 2 * k1), k3 = rate(z + h / 2 * k2), k4 = rate(z + h * k3);
      return Eigen::Vector3d(z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
    };
    Eigen::Vector3d z0;
    z0 << c.query, c.tau;
    const double h = 1e-4;
    const Eigen::Vector3d zp = step(z0, h), zm = step(z0, -h);
    const double fd = (post.mean(zp.head<2>(), zp(2))(0) - post.mean(zm.head<2>(), zm(2))(0)) / (2 * h);
    const Eigen::VectorXd mu0 = post.mean(z0.head<2>(), z0(2));
    const double dmu = mu_total_derivative(post, z0.head<2>(), z0(2), one(e), mu0, im)(0);
    CHECK(std::abs(dmu - fd) <= 1e-4 * std::abs(fd));
  }

  TEST_CASE("stabilizer is zero at the origin") {
    const StructureParams s{1, {3}, 2, 1};
    CHECK(control_action(Eigen::Vector3d::Zero(), one(0.0), one(0.0), s, stab(250, 150, -20)).isZero());
  }

  TEST_CASE("stabilizer gain row in descending powers of delta") {
    const StructureParams s{1, {3}, 2, 1};
    CHECK(control_action(Eigen::Vector3d(1, 0, 0), one(0.0), one(0.0), s, stab(1, 2, 1))(0) == -120.0);
    const Eigen::MatrixXd K = stabilizer_gain(s, stab(1, 2, 1));
    CHECK(K(0, 0) == -15.0 * 8);
    CHECK(K(0, 1) == -75.0 * 4);
    CHECK(K(0, 2) == -125.0 * 2);
  }

  TEST_CASE("eta gain equals the chi gain through C") {
    const StructureParams s{1, {3}, 2, 1};
    for (double l : {0.5, 10.0, 250.0}) {
      for (double delta : {1.0, 5.0, 150.0}) {
        const auto st = stab(l, delta, -20);
        const auto g = stabilizer_gains(s, st);
        CHECK(g.K_eta == g.K_chi * build_F_H_C(s).C.transpose());
        CHECK(control_action(Eigen::Vector3d::Zero(), one(0.0), one(0.7), s, st)(0) ==
              doctest::Approx(control_action(Eigen::Vector3d(0.7, 0, 0), one(0.0), one(0.0), s, st)(0)));
      }
    }
  }

  TEST_CASE("feedforward enters through K_w") {
    const StructureParams s{1, {3}, 2, 1};
    auto st = stab(2, 3, -1);
    st.K_w = Eigen::RowVector2d(1.0, 0.5);
    CHECK(control_action(Eigen::Vector3d::Zero(), one(0.0), one(0.0), s, st, Eigen::Vector2d(2.0, 4.0))(0) == -4.0);
  }

  TEST_CASE("Hurwitz checks on the reference coefficient sets") {
    CHECK(is_hurwitz(Eigen::Vector2d(15, 70)));
    CHECK(is_hurwitz(Eigen::Vector3d(125, 75, 15)));
    CHECK_FALSE(is_hurwitz(Eigen::Vector2d(-1, 2)));
    CHECK_FALSE(is_hurwitz(Eigen::Vector3d(1, 1, 5)));  // 1*1 < 5
    CHECK_THROWS(InternalModelParams({2.0, Eigen::Vector2d(-1, 1)}).validate());
    CHECK_NOTHROW(stab(250, 150, -20).validate({1, {3}, 2, 1}));
    CHECK_THROWS(stab(250, 150, 0).validate({1, {3}, 2, 1}));
  }

  TEST_CASE("RLS converges on linearly generated data") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    const Eigen::Vector2d truth(0.8, -1.7);
    auto ident = BaselineIdentifier::init(2, 1, 100.0, 0.99);
    for (int k = 0; k < 1000; ++k) {
      const Eigen::Vector2d eta(n(rng), n(rng));
      ident = baseline_step(ident, eta, one(truth.dot(eta)));
    }
    CHECK((ident.theta.col(0) - truth).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((ident.P - ident.P.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(ident.P).info() == Eigen::Success);
  }

  TEST_CASE("RLS ignores a zero regressor") {
    auto ident = BaselineIdentifier::init(2, 1, 1.0, 1.0);
    ident.theta << 0.3, -0.2;
    const auto next = baseline_step(ident, Eigen::Vector2d::Zero(), one(5.0));
    CHECK(next.theta == ident.theta);
  }

  TEST_CASE("single RLS update by hand") {
    const auto ident = BaselineIdentifier::init(2, 1, 1.0, 1.0);
    const auto next = baseline_step(ident, Eigen::Vector2d(1.0, 0.0), one(1.0));
    CHECK(next.theta(0, 0) == doctest::Approx(0.5));
    CHECK(next.theta(1, 0) == 0.0);
    CHECK(next.P(0, 0) == doctest::Approx(0.5));
  }

  TEST_CASE("RLS keeps a persistent residual on nonlinear data") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto ident = BaselineIdentifier::init(2, 1, 100.0, 0.99);
    double late = 0.0;
    for (int k = 0; k < 2000; ++k) {
      const Eigen::Vector2d eta(u(rng), u(rng));
      const double y = std::sin(3 * eta(0)) * eta(1) * eta(1) + eta(0) * eta(0) * eta(0);
      if (k >= 1500) late += std::pow(y - ident.predict(eta)(0), 2);
      ident = baseline_step(ident, eta, one(y));
    }
    CHECK(std::sqrt(late / 500) > 0.05);
  }

  TEST_CASE("threshold condition with the reference kernel") {
    KernelParams kp;
    kp.lambda_eta = Eigen::Vector2d(0.1, 0.1);
    const auto ok = check_sigma_condition(kp, 0.1);
    CHECK(ok.ok);
    CHECK(ok.lower == doctest::Approx(0.01 / 1.01).epsilon(1e-14));
    CHECK(ok.lower == doctest::Approx(0.0099010).epsilon(1e-5));
    CHECK(ok.upper == 1.0);
    CHECK_FALSE(check_sigma_condition(kp, 1.0).ok);
    CHECK_FALSE(check_sigma_condition(kp, 0.005).ok);
    CHECK_FALSE(check_sigma_condition(kp, kp.training_point_variance()).ok);
  }
}
