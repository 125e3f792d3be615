#include <doctest.h>

#include <cmath>

#include "fbmlan/fisher.hpp"
#include "fbmlan/likelihood.hpp"
#include "fbmlan/stats.hpp"

using namespace fbmlan;
using doctest::Approx;

namespace {

const double kH = 0.35;

ObservedPath fou_obs(double T, double dt, Seed seed, double theta = 1.0, double sigma = 1.0) {
  const auto m = make_model("fou");
  return observe(stationary_burnin(*m, Params{theta}, sigma, kH, Grid::span(T, dt), default_burnin(*m, Params{theta}),
                                   seed));
}

double sup_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

TEST_CASE("observed path validation") {
  ObservedPath bad{Grid(0.0, 0.1, 3), {0.0, 1.0}, 1.0, 0.0};
  CHECK_THROWS(validate(bad));
  ObservedPath nan{Grid(0.0, 0.1, 3), {0.0, NAN, 1.0}, 1.0, 0.0};
  CHECK_THROWS(validate(nan));
}

TEST_CASE("B^theta recovers the driver") {
  const auto m = make_model("fou");
  const auto B = generate_fbm(Grid::span(20, 0.01), kH, Seed{1, 0});
  const auto X = euler_solve(*m, Params{1.0}, 0.8, 0.3, B);
  const auto bt = b_theta_path(observe(X), *m, Params{1.0});
  double err = 0.0;
  for (std::size_t k = 0; k < B.values.size(); ++k) err = std::max(err, std::abs(bt.values[k] - B.values[k]));
  CHECK(err <= 2.0 * 0.01);

  SUBCASE("zero drift is exact") {
    const auto Z = euler_solve(*make_model("zero"), Params{0.0}, 0.8, 0.3, B);
    const auto bz = b_theta_path(observe(Z), *make_model("zero"), Params{0.0});
    for (std::size_t k = 0; k < B.values.size(); ++k) CHECK(bz.values[k] == Approx((Z.values[k] - 0.3) / 0.8));
  }
  SUBCASE("linear in theta for FOU") {
    const auto obs = observe(X);
    const auto b1 = b_theta_path(obs, *m, Params{1.0}), b2 = b_theta_path(obs, *m, Params{1.7});
    double integral = 0.0;
    for (std::size_t k = 1; k < obs.values.size(); ++k) {
      integral += 0.5 * 0.01 * (obs.values[k - 1] + obs.values[k]);
      // B^th - B^th' = sigma^{-1} (th' - th) int X ds, with th = 1, th' = 1.7
      CHECK(b1.values[k] - b2.values[k] == Approx((1.0 - 1.7) * integral / 0.8).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("innovation W: anchoring, serial reference, Brownian calibration") {
  const auto m = make_model("fou");
  const auto obs = fou_obs(20, 0.05, Seed{2, 0});
  const auto W = innovation_W(obs, *m, Params{1.0}, kH);
  const auto Ws = innovation_W_serial(obs, *m, Params{1.0}, kH);
  CHECK(W.values.front() == 0.0);
  for (std::size_t k = 0; k < W.values.size(); ++k) CHECK(W.values[k] == Approx(Ws.values[k]).epsilon(1e-12));
  const std::vector<std::size_t> idx{10, 200, 400};
  const auto at = innovation_W_at(obs, *m, Params{1.0}, kH, idx);
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(at[i] == Approx(W.values[idx[i]]).epsilon(1e-12));

  SUBCASE("variance t and uncorrelated increments over 300 paths") {
    const double T = 40.0;
    const std::vector<std::size_t> cp{200, 400, 800};
    const std::size_t N = 300;
    std::vector<std::vector<double>> w(cp.size(), std::vector<double>(N));
    std::vector<double> d1(N), d2(N);
    for (std::size_t r = 0; r < N; ++r) {
      const auto o = fou_obs(T, 0.05, Seed{3, r});
      const auto v = innovation_W_at(o, *m, Params{1.0}, kH, cp);
      for (std::size_t i = 0; i < cp.size(); ++i) w[i][r] = v[i];
      d1[r] = v[1] - v[0];
      d2[r] = v[2] - v[1];
    }
    for (std::size_t i = 0; i < cp.size(); ++i) {
      const double t = cp[i] * 0.05;
      CHECK(std::abs(stats::variance(w[i]) / t - 1.0) <= 0.2);
    }
    double c = 0.0;
    for (std::size_t r = 0; r < N; ++r) c += d1[r] * d2[r];
    c /= std::sqrt(stats::variance(d1) * stats::variance(d2)) * (N - 1);
    CHECK(std::abs(c) < 3.0 / std::sqrt(double(N)));
  }
}

TEST_CASE("Z path does not depend on the reference parameter") {
  const auto m = make_model("fou");
  const auto obs = fou_obs(4096 * 0.05, 0.05, Seed{4, 0});
  const auto z1 = z_path(obs, *m, Params{1.0}, kH), z2 = z_path(obs, *m, Params{1.5}, kH);
  CHECK(z1.values.front() == 0.0);
  double d = 0.0;
  for (std::size_t k = 0; k < z1.values.size(); ++k) d = std::max(d, std::abs(z1.values[k] - z2.values[k]));
  CHECK(d <= 1e-2 * sup_abs(z1.values));

  SUBCASE("fast increments agree with the direct sum and with the kernel route") {
    const auto dz = z_increments(obs, kH), dd = z_increments_direct(obs, kH);
    for (std::size_t k = 0; k < dz.size(); ++k) REQUIRE(dz[k] == Approx(dd[k]).epsilon(1e-9).scale(1e-9));
    double acc = 0.0, gap = 0.0;
    for (std::size_t k = 0; k < dz.size(); ++k) {
      acc += dz[k];
      gap = std::max(gap, std::abs(acc - z1.values[k + 1]));
    }
    CHECK(gap <= 1e-2 * sup_abs(z1.values));
  }
  SUBCASE("zero drift: Z equals W^0") {
    const auto B = generate_fbm(Grid::span(20, 0.05), kH, Seed{4, 1});
    const auto o = observe(euler_solve(*make_model("zero"), Params{0.0}, 1.0, 0.0, B));
    const auto z = z_path(o, *make_model("zero"), Params{0.0}, kH);
    const auto w = innovation_W(o, *make_model("zero"), Params{0.0}, kH);
    for (std::size_t k = 0; k < z.values.size(); ++k) CHECK(z.values[k] == Approx(w.values[k]).epsilon(1e-12));
  }
}

TEST_CASE("log-likelihood ratio") {
  const auto m = make_model("sine");
  const Params th{2.0, 0.5}, th2{2.3, 0.2};
  const auto obs = observe(stationary_burnin(*m, th, 1.0, kH, Grid::span(100, 0.05), 40, Seed{5, 0}));
  const Likelihood lik(obs, m, kH);
  SUBCASE("identity is exactly zero") {
    const auto r = lik.loglik(th, th);
    CHECK(r.value == 0.0);
    CHECK(loglik_ratio(obs, *m, th2, th2, kH).value == 0.0);
  }
  SUBCASE("cocycle") {
    const Params th3{1.8, 0.7};
    const double a = lik.loglik(th, th2).value, b = lik.loglik(th2, th3).value, c = lik.loglik(th, th3).value;
    CHECK(std::abs(a + b - c) <= 1e-10 * (std::abs(a) + std::abs(b)));
    CHECK(lik.loglik(th2, th).value == Approx(-a).epsilon(1e-10));
  }
  SUBCASE("free function matches the evaluator") {
    CHECK(loglik_ratio(obs, *m, th, th2, kH).value == Approx(lik.loglik(th, th2).value).epsilon(1e-12));
  }
}

TEST_CASE("Girsanov density has mean one") {
  const auto m = make_model("fou");
  const std::size_t N = 400;
  std::vector<double> e(N);
  for (std::size_t r = 0; r < N; ++r) {
    const Likelihood lik(fou_obs(50, 0.05, Seed{6, r}), m, kH);
    e[r] = std::exp(lik.loglik(Params{1.0}, Params{1.15}).value);
  }
  CHECK(std::abs(stats::mean(e) - 1.0) <= 3.0 * std::sqrt(stats::variance(e) / N));
}

TEST_CASE("closed-form MLE") {
  const auto m = make_model("fou");
  const auto aff = m->affine();
  REQUIRE(aff);
  SUBCASE("within 5 asymptotic SDs on almost every replication") {
    const std::size_t N = 100;
    std::size_t inside = 0;
    for (std::size_t r = 0; r < N; ++r) {
      const double th = mle_linear(fou_obs(500, 0.05, Seed{7, r}), aff->basis, kH, aff->offset);
      if (std::abs(th - 1.0) <= 5.0 * std::sqrt(2.0 / 500.0)) ++inside;
    }
    CHECK(inside >= 99);
  }
  SUBCASE("degenerate design") {
    CHECK_THROWS_AS(mle_linear(fou_obs(10, 0.05, Seed{7, 0}), [](double) { return 0.0; }, kH), EstimationError);
  }
  SUBCASE("scale equivariance") {
    const auto obs = fou_obs(100, 0.05, Seed{7, 1});
    const double a = mle_linear(obs, aff->basis, kH);
    const double b = mle_linear(obs, [&](double x) { return 2.0 * aff->basis(x); }, kH);
    CHECK(b == Approx(a / 2.0).epsilon(1e-14));
  }
  SUBCASE("maximizes the discrete log-likelihood") {
    const Likelihood lik(fou_obs(100, 0.05, Seed{7, 2}), m, kH);
    const double th = mle_linear(lik, aff->basis, aff->offset);
    const double at = lik.loglik(Params{1.0}, Params{th}).value;
    CHECK(at >= lik.loglik(Params{1.0}, Params{th + 1e-3}).value);
    CHECK(at >= lik.loglik(Params{1.0}, Params{th - 1e-3}).value);
  }
}

TEST_CASE("numeric MLE") {
  SUBCASE("FOU agrees with the closed form") {
    const auto m = make_model("fou");
    const auto aff = m->affine();
    const Likelihood lik(fou_obs(200, 0.05, Seed{8, 0}), m, kH);
    const double closed = mle_linear(lik, aff->basis, aff->offset);
    const auto r = mle_numeric(lik, Params{1.0});
    CHECK(r.theta[0] == Approx(closed).epsilon(1e-7));
    CHECK(r.objective >= 0.0);
    CHECK(mle_numeric(lik, Params{2.5}).theta[0] == Approx(closed).epsilon(1e-7));
  }
  SUBCASE("MEAN_REVERT (nonzero offset) agrees with the closed form") {
    const auto m = make_model("mean_revert");
    const auto aff = m->affine();
    const Likelihood lik(observe(stationary_burnin(*m, Params{0.3}, 1.0, kH, Grid::span(200, 0.05), 40, Seed{8, 1})),
                         m, kH);
    const double closed = mle_linear(lik, aff->basis, aff->offset);
    CHECK(mle_numeric(lik, Params{0.0}).theta[0] == Approx(closed).epsilon(1e-7));
    CHECK(mle_numeric(lik, Params{1.0}).theta[0] == Approx(closed).epsilon(1e-7));
  }
  SUBCASE("SINE lands within 3 predicted SDs") {
    const auto m = make_model("sine");
    const Params th{2.0, 0.5};
    const double T = 1000;
    // Fisher matrix from the spectral-free Monte Carlo route.
    const auto cov = estimate_cov_mc(*m, th, 1.0, kH, [] {
      std::vector<double> l;
      for (int i = 0; i <= 1200; ++i) l.push_back(i * 0.05);
      return l;
    }(), 100, Seed{99, 0});
    const auto I = fisher_zero_mean(cov, kH, 1.0).value;
    const Eigen::MatrixXd inv = I.inverse();
    const std::size_t N = 20;
    std::size_t ok = 0;
    for (std::size_t r = 0; r < N; ++r) {
      const auto obs = observe(stationary_burnin(*m, th, 1.0, kH, Grid::span(T, 0.05), 40, Seed{9, r}));
      const auto est = mle_numeric(obs, m, th, kH);
      bool inside = true;
      for (int i = 0; i < 2; ++i) inside &= std::abs(est.theta[i] - th[i]) <= 3.0 * std::sqrt(inv(i, i) / T);
      ok += inside;
    }
    CHECK(ok >= 19);
  }
}
