#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "fbmlan/fisher.hpp"
#include "fbmlan/fracops.hpp"
#include "fbmlan/stats.hpp"

using namespace fbmlan;
using doctest::Approx;

namespace {

std::vector<double> lag_grid(double max_lag, double step) {
  std::vector<double> l;
  const auto n = static_cast<std::size_t>(std::llround(max_lag / step));
  for (std::size_t i = 0; i <= n; ++i) l.push_back(i * step);
  return l;
}

// Time-domain oracle: X_t = sigma th int_0^inf e^{-th u} (B_t - B_{t-u}) du. Expanding
// the fBM covariance and substituting w = u - v in the cross term leaves 1-D integrals:
// c(D) = sigma^2 th^2 / 2 [ th^{-1} int_0^inf e^{-th v} (|D+v|^{2H} + |D-v|^{2H}) dv
//        - th^{-2} |D|^{2H} - (2 th)^{-1} int_R e^{-th|w|} |D-w|^{2H} dw ].
double fou_cov_time_domain(double th, double sigma, double H, double D) {
  using gk = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double h2 = 2 * H, inf = std::numeric_limits<double>::infinity();
  auto half_line = [&](auto f, double kink) {
    double r = gk::integrate(f, kink, inf, 15, 1e-13);
    if (kink > 0) r += gk::integrate(f, 0.0, kink, 15, 1e-13);
    return r;
  };
  const double a = half_line([&](double v) { return std::exp(-th * v) * std::pow(D + v, h2); }, 0.0);
  const double b = half_line([&](double v) { return std::exp(-th * v) * std::pow(std::abs(D - v), h2); }, D);
  const double neg = half_line([&](double w) { return std::exp(-th * w) * std::pow(D + w, h2); }, 0.0);
  const double cross = neg + b;
  return 0.5 * sigma * sigma * th * th * ((a + b) / th - std::pow(D, h2) / (th * th) - cross / (2 * th));
}

// Stationary variance of the Euler chain X_{k+1} = (1 - th dt) X_k + sigma dB_k
// driven by fGn: sigma^2 dt^{2H} sum_{i,j >= 0} rho^{i+j} r(|i-j|).
double euler_fou_variance(double th, double sigma, double H, double dt) {
  const double rho = 1.0 - th * dt;
  auto r = [&](double k) {
    return 0.5 * (std::pow(k + 1, 2 * H) - 2 * std::pow(k, 2 * H) + std::pow(std::abs(k - 1), 2 * H));
  };
  // sum over lag l = |i - j|: sum_i rho^{2i} (1 + 2 sum_{l>=1} rho^l r(l))
  double lagsum = r(0);
  double rl = 1.0;
  for (int l = 1; l < 20000; ++l) {
    rl *= rho;
    lagsum += 2 * rl * r(l);
  }
  return sigma * sigma * std::pow(dt, 2 * H) * lagsum / (1 - rho * rho);
}

}  // namespace

TEST_CASE("rate exponents") {
  CHECK(kappa(1, 1, 0.35, 2) == -0.5);
  CHECK(kappa(2, 1, 0.35, 2) == Approx(-0.65));
  CHECK(kappa(1, 0, 0.4999999, 1) == Approx(-0.5).epsilon(1e-6));
  CHECK_THROWS_AS(kappa(3, 1, 0.35, 2), DomainError);
}

TEST_CASE("fOU spectral covariance") {
  SUBCASE("lag 0 in closed form: sigma^2 Gamma(2H + 1) theta^{-2H} / 2") {
    for (double H : {0.3, 0.35, 0.4})
      for (double th : {0.5, 1.0, 2.0})
        CHECK(fou_spectral_cov(th, 1.3, H, 0.0) ==
              Approx(1.69 * std::tgamma(2 * H + 1) * std::pow(th, -2 * H) / 2).epsilon(1e-10));
  }
  SUBCASE("agrees with the time-domain double integral") {
    for (double D : {0.5, 2.3, 5.0}) {
      const double ref = fou_cov_time_domain(1.0, 1.0, 0.35, D);
      CHECK(fou_spectral_cov(1.0, 1.0, 0.35, D) == Approx(ref).epsilon(1e-6).scale(1e-6));
    }
  }
  SUBCASE("symmetric in the lag") {
    CHECK(fou_spectral_cov(1.0, 1.0, 0.35, -3.0) == fou_spectral_cov(1.0, 1.0, 0.35, 3.0));
  }
  SUBCASE("far tail obeys the t^{2H-2} envelope") {
    const double H = 0.35;
    std::vector<double> t, c;
    for (double D = 20; D <= 40; D += 2) {
      t.push_back(D);
      c.push_back(fou_spectral_cov(1.0, 1.0, H, D));
    }
    // C fitted on [20, 40] with the slope fixed at 2H - 2
    double C = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) C = std::max(C, std::abs(c[i]) / std::pow(t[i], 2 * H - 2));
    CHECK(std::abs(fou_spectral_cov(1.0, 1.0, H, 50.0)) <= 1.5 * C * std::pow(50.0, 2 * H - 2));
  }
}

TEST_CASE("u integral is B(1/2 - H, 2H)") {
  for (double H : {0.26, 0.35, 0.45})
    CHECK(u_integral(H) == Approx(std::tgamma(0.5 - H) * std::tgamma(2 * H) / std::tgamma(0.5 + H)).epsilon(1e-10));
}

TEST_CASE("zero-mean block") {
  const double H = 0.35;
  const auto lags = lag_grid(100, 0.05);
  SUBCASE("c = 0 gives 0") {
    CovEstimate z;
    z.lags = lags;
    z.values.assign(1, std::vector<double>(lags.size(), 0.0));
    z.se.assign(1, std::vector<double>(lags.size(), 0.0));
    CHECK(fisher_zero_mean(z, H, 1.0).value(0, 0) == 0.0);
  }
  SUBCASE("fOU reaches 1 / (2 theta) and scales like sigma^{-2}") {
    const auto cov = fou_cov_from_spectrum(1.0, 1.0, H, lags);
    const auto r = fisher_zero_mean(cov, H, 1.0);
    CHECK(std::abs(r.value(0, 0) / 0.5 - 1.0) <= 0.05);
    CHECK(std::abs(r.direct(0, 0) / 0.5 - 1.0) <= 0.05);
    CHECK(r.max_rel_gap <= 0.05);
    CHECK(fisher_zero_mean(cov, H, 0.5).value(0, 0) == Approx(4.0 * r.value(0, 0)).epsilon(1e-12));
  }
}

TEST_CASE("nonzero-mean block") {
  const double H = 0.35, dp = make_constants(H).d_prime_H;
  CHECK(fisher_nonzero_mean(std::vector<double>{0.0}, H, 1.0)(0, 0) == 0.0);
  CHECK(fisher_nonzero_mean(std::vector<double>{1.0}, H, 1.0)(0, 0) == Approx(dp));
  CHECK(fisher_nonzero_mean(std::vector<double>{2.0}, H, 1.0)(0, 0) == Approx(4 * dp));
  // d'_H = bar d^{-2} B(1/2 - H, 3/2 - H)^2 / (2 - 2H) with B from Gamma functions
  const double b = std::tgamma(0.5 - H) * std::tgamma(1.5 - H) / std::tgamma(2 - 2 * H);
  CHECK(dp == Approx(b * b / (std::pow(make_constants(H).bar_d_H, 2) * (2 - 2 * H))).epsilon(1e-12));
}

TEST_CASE("closed-form fOU information") {
  CHECK(fou_fisher_closed(1.0) == 0.5);
  CHECK(fou_fisher_closed(2.0) == 0.25);
  CHECK(fou_fisher_closed(3.0 * 0.7) == Approx(fou_fisher_closed(0.7) / 3.0));
}

TEST_CASE("Monte Carlo covariance") {
  const double H = 0.35;
  const auto lags = lag_grid(20, 0.5);
  SUBCASE("FOU lag 0 against the stationary variance of the Euler chain") {
    const auto m = make_model("fou");
    const auto c = estimate_cov_mc(*m, Params{1.0}, 1.0, H, lags, 100, Seed{1, 0});
    const double target = euler_fou_variance(1.0, 1.0, H, 0.05);
    CHECK(std::abs(c.at(0, 0, 0) - target) <= 3.0 * c.se_at(0, 0, 0));
    // the Euler bias is O(dt) relative to the continuous-time value
    CHECK(std::abs(target / fou_spectral_cov(1.0, 1.0, H, 0.0) - 1.0) <= 0.05);
    CHECK(c.replications == 100);
  }
  SUBCASE("SINE: variances nonnegative, lag 20 consistent with zero") {
    const auto m = make_model("sine");
    const auto c = estimate_cov_mc(*m, Params{2.0, 0.5}, 1.0, H, lags, 100, Seed{2, 0});
    CHECK(c.dim == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(c.at(i, i, 0) > -c.se_at(i, i, 0));
      CHECK(std::abs(c.at(i, i, lags.size() - 1)) <= 3.0 * c.se_at(i, i, lags.size() - 1));
    }
  }
  SUBCASE("lags off the dt grid are rejected") {
    CHECK_THROWS_AS(estimate_cov_mc(*make_model("fou"), Params{1.0}, 1.0, H, std::vector<double>{0.0, 0.03}, 4,
                                    Seed{}),
                    DomainError);
  }
}

TEST_CASE("assembly") {
  Eigen::MatrixXd z(1, 1), nz(1, 1);
  z << 0.5;
  nz << 0.9;
  SUBCASE("all zero-mean") {
    const auto f = assemble_fisher(z, Eigen::MatrixXd(0, 0), 1);
    CHECK(f.I(0, 0) == 0.5);
  }
  SUBCASE("all nonzero-mean") {
    const auto f = assemble_fisher(Eigen::MatrixXd(0, 0), nz, 0);
    CHECK(f.I(0, 0) == 0.9);
  }
  SUBCASE("mixed has exact zero off-diagonal") {
    const auto f = assemble_fisher(z, nz, 1);
    CHECK(f.I(0, 1) == 0.0);
    CHECK(f.I(1, 0) == 0.0);
    CHECK(f.I(1, 1) == 0.9);
    CHECK(f.m0 == 1);
  }
}

TEST_CASE("Monte Carlo SINE information is symmetric positive semidefinite") {
  const auto m = make_model("sine");
  const auto cov = estimate_cov_mc(*m, Params{2.0, 0.5}, 1.0, 0.35, lag_grid(40, 0.05), 60, Seed{3, 0});
  const auto r = fisher_zero_mean(cov, 0.35, 1.0);
  const Eigen::MatrixXd& I = r.value;
  CHECK((I - I.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(I);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}
