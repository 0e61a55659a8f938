#include "doctest.h"

#include "probeforce/estimator.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace probeforce;

namespace {

// Exact bilinear spring-damper data for a displacement sequence.
std::vector<double> forces(double K, double D, double T, const std::vector<double>& d) {
  const Eigen::Vector2d th = impedance_to_theta(K, D, T);
  std::vector<double> F(d.size());
  F[0] = K * d[0];
  for (std::size_t k = 1; k < d.size(); ++k) F[k] = th(0) * d[k] + th(1) * d[k - 1] - F[k - 1];
  return F;
}

std::vector<double> broadband(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1e-3);
  std::vector<double> d(n);
  for (auto& x : d) x = u(rng);
  return d;
}

// Samples after `start` until |K_hat - K| / K stays below 1%.
std::size_t samples_to_converge(const std::vector<double>& Ks, std::size_t start) {
  for (std::size_t k = start; k < Ks.size(); ++k) {
    bool stays = true;
    for (std::size_t j = k; j < Ks.size(); ++j) stays = stays && std::abs(Ks[j] - 2000.0) / 2000.0 < 0.01;
    if (stays) return k - start;
  }
  return std::numeric_limits<std::size_t>::max();
}

}  // namespace

TEST_SUITE("estimator") {
  TEST_CASE("make regressor") {
    const auto r = make_regressor(1.0, 1.0, 0.001, 0.001);
    REQUIRE(r);
    CHECK(r->y == 2.0);
    CHECK(r->phi(0) == 0.001);
    CHECK(r->phi(1) == 0.001);
    const auto z = make_regressor(0, 0, 0, 0);
    REQUIRE(z);
    CHECK(z->y == 0.0);
    CHECK(z->phi.isZero());
    CHECK_FALSE(make_regressor(std::nan(""), 0, 0, 0));
    CHECK_FALSE(make_regressor(0, 0, INFINITY, 0));

    // K = 1000, D = 0 gives A = B = 1000 exactly.
    const auto d = broadband(50, 3);
    const auto F = forces(1000.0, 0.0, 1e-3, d);
    for (std::size_t k = 1; k < d.size(); ++k) {
      const auto s = make_regressor(F[k], F[k - 1], d[k], d[k - 1]);
      CHECK(s->y == doctest::Approx(1000.0 * d[k] + 1000.0 * d[k - 1]).epsilon(1e-12));
    }
  }

  TEST_CASE("zero innovation leaves theta and resets P") {
    RlsConfig c;
    RlsState s = RlsState::initial(c);
    s.theta = Eigen::Vector2d(3000.0, -1000.0);
    RegressorSample r;
    r.phi = Eigen::Vector2d(0.001, 0.0005);
    r.y = s.theta.dot(r.phi);
    const auto n = rls_update(s, r, c);
    CHECK((n.theta - s.theta).norm() == doctest::Approx(0.0));
    CHECK(n.mu == 0.0);
    CHECK((n.P - c.g * c.J).norm() <= 1e-9 * c.g);
  }

  TEST_CASE("converges to batch least squares within 200 samples") {
    const double T = 1e-3;
    const auto d = broadband(201, 5);
    const auto F = forces(1000.0, 1.0, T, d);
    RlsConfig c;
    RlsState s = RlsState::initial(c);
    std::vector<RegressorSample> regs;
    for (std::size_t k = 1; k < d.size(); ++k) {
      regs.push_back(*make_regressor(F[k], F[k - 1], d[k], d[k - 1]));
      s = rls_update(s, regs.back(), c);
    }
    const auto ls = batch_ls(regs);
    CHECK((s.theta - ls).norm() / ls.norm() < 0.01);
    CHECK(s.P.isApprox(s.P.transpose()));
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(s.P).eigenvalues().minCoeff() > 0.0);
  }

  TEST_CASE("adaptive forgetting tracks a step faster than fixed forgetting") {
    const double T = 1e-3;
    const auto d = broadband(1500, 9);
    const Eigen::Vector2d th1 = impedance_to_theta(1000.0, 0.0, T), th2 = impedance_to_theta(2000.0, 0.0, T);
    std::vector<double> F(d.size());
    F[0] = 1000.0 * d[0];
    for (std::size_t k = 1; k < d.size(); ++k) {
      const auto& th = k < 500 ? th1 : th2;
      F[k] = th(0) * d[k] + th(1) * d[k - 1] - F[k - 1];
    }
    RlsConfig c;
    RlsState a = RlsState::initial(c), f = RlsState::initial(c);
    std::vector<double> Ka(1, 0.0), Kf(1, 0.0);
    for (std::size_t k = 1; k < d.size(); ++k) {
      const auto r = *make_regressor(F[k], F[k - 1], d[k], d[k - 1]);
      a = rls_update(a, r, c);
      f = rls_update_fixed(f, r, 0.999);
      Ka.push_back(recover_impedance(a.theta, T).stiffness);
      Kf.push_back(recover_impedance(f.theta, T).stiffness);
    }
    const auto na = samples_to_converge(Ka, 500), nf = samples_to_converge(Kf, 500);
    CHECK(na <= 300);
    CHECK(na < nf);
  }

  TEST_CASE("covariance guard") {
    RlsConfig c;
    c.g = 1e-9;
    RlsState s = RlsState::initial(c);
    s.P << 1.0, 2.0, 2.0, 1.0;  // indefinite
    RegressorSample r;
    r.phi = Eigen::Vector2d(1e-3, 1e-3);
    r.y = 1.0;
    const auto n = rls_update(s, r, c);
    CHECK(n.reset_event);
    CHECK(n.P.isApprox(c.p0 * Eigen::Matrix2d::Identity()));
  }

  TEST_CASE("recover impedance") {
    const auto th = impedance_to_theta(1000.0, 1.0, 1e-3);
    CHECK(th(0) == doctest::Approx(3000.0));
    CHECK(th(1) == doctest::Approx(-1000.0));
    const auto e = recover_impedance(Eigen::Vector2d(3000.0, -1000.0), 1e-3);
    CHECK(e.stiffness == doctest::Approx(1000.0).epsilon(1e-12));
    CHECK(e.damping == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.physical);
    CHECK(recover_impedance(Eigen::Vector2d(1234.0, 1234.0), 1e-3).damping == 0.0);
    CHECK(recover_impedance(Eigen::Vector2d(1234.0, -1234.0), 1e-3).stiffness == 0.0);
    CHECK_FALSE(recover_impedance(Eigen::Vector2d(-10.0, -10.0), 1e-3).physical);
  }

  TEST_CASE("batch least squares") {
    const auto d = broadband(300, 13);
    const auto F = forces(750.0, 3.0, 1e-3, d);
    std::vector<RegressorSample> regs;
    for (std::size_t k = 1; k < d.size(); ++k) regs.push_back(*make_regressor(F[k], F[k - 1], d[k], d[k - 1]));
    const auto th = batch_ls(regs);
    const auto ref = impedance_to_theta(750.0, 3.0, 1e-3);
    CHECK((th - ref).norm() / ref.norm() < 1e-9);

    std::vector<RegressorSample> same(10);
    for (auto& r : same) {
      r.phi = Eigen::Vector2d(1e-3, 2e-3);
      r.y = 1.0;
    }
    CHECK_THROWS_AS(batch_ls(same), SingularDesign);
    CHECK_THROWS_AS(batch_ls({}), SingularDesign);
  }

  TEST_CASE("batch error shrinks as one over root n") {
    const Eigen::Vector2d th(3000.0, -1000.0);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1e-3);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<double> mean_err;
    for (std::size_t n : {100, 1000, 10000}) {
      double acc = 0.0;
      const int trials = 40;
      for (int t = 0; t < trials; ++t) {
        std::vector<RegressorSample> regs(n);
        for (auto& r : regs) {
          r.phi = Eigen::Vector2d(u(rng), u(rng));
          r.y = th.dot(r.phi) + noise(rng);
        }
        acc += (batch_ls(regs) - th).norm();
      }
      mean_err.push_back(acc / trials);
    }
    for (std::size_t i = 1; i < mean_err.size(); ++i) {
      const double ratio = mean_err[i - 1] / mean_err[i];
      CHECK(ratio == doctest::Approx(std::sqrt(10.0)).epsilon(0.25));
    }
  }

  TEST_CASE("streaming estimator pairs only consecutive valid samples") {
    const auto d = broadband(40, 21);
    const auto F = forces(500.0, 0.0, 1e-3, d);
    ImpedanceEstimator est;
    std::size_t produced = 0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      const bool valid = k != 10;
      if (est.update(static_cast<double>(k) * 1e-3, d[k], F[k], valid)) ++produced;
    }
    // 39 pairs, minus the two that touch sample 10.
    CHECK(produced == 37);
    CHECK(est.updates() == 37);
    REQUIRE(est.latest());
    CHECK(est.latest()->stiffness == doctest::Approx(500.0).epsilon(0.01));

    ImpedanceEstimator scaled(RlsConfig{}, 2.0);
    for (std::size_t k = 0; k < d.size(); ++k) scaled.update(static_cast<double>(k) * 1e-3, d[k], F[k], true);
    CHECK(scaled.latest()->stiffness == doctest::Approx(1000.0).epsilon(0.01));
  }

  TEST_CASE("config validation") {
    RlsConfig c;
    CHECK_NOTHROW(c.validate());
    c.p0 = 0.0;
    CHECK_THROWS(c.validate());
    c = RlsConfig{};
    c.sample_period = -1.0;
    CHECK_THROWS(c.validate());
    c = RlsConfig{};
    c.J << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS(c.validate());
  }
}
