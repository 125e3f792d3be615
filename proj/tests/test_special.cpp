#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <vector>

#include "fbmlan/common.hpp"
#include "fbmlan/special.hpp"

using namespace fbmlan;
using doctest::Approx;

namespace {

double ts_integral(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b, 1e-14);
}

// f(v, 1 - v) with 1 - v taken from the quadrature's exact endpoint distance,
// so (1 - v)^{b-1} keeps its precision next to v = 1.
double ts_integral_to_one(const std::function<double(double, double)>& f, double a) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate([&](double v, double vc) { return f(v, vc > 0 ? vc : 1.0 - v); }, a, 1.0, 1e-14);
}

}  // namespace

TEST_CASE("beta matches the Gamma ratio") {
  for (double a : {0.15, 0.5, 1.2, 3.7})
    for (double b : {0.2, 1.0, 2.5}) {
      const double ref = std::tgamma(a) * std::tgamma(b) / std::tgamma(a + b);
      CHECK(special::beta(a, b) == Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("beta_inc over an interval agrees with direct quadrature") {
  const double a = 0.65, b = 0.35;
  for (auto [u0, u1] : std::vector<std::pair<double, double>>{{0.0, 0.3}, {0.2, 0.45}, {0.4, 0.9}, {0.6, 1.0}}) {
    auto f = [&](double u, double uc) { return std::pow(u, a - 1) * std::pow(uc, b - 1); };
    const double ref = u1 == 1.0 ? ts_integral_to_one(f, u0) : ts_integral([&](double u) { return f(u, 1 - u); }, u0, u1);
    CHECK(special::beta_inc(a, b, u0, u1) == Approx(ref).epsilon(1e-10));
  }
  CHECK(special::beta_inc(a, b, 0.0, 1.0) == Approx(special::beta(a, b)).epsilon(1e-14));
  CHECK(special::beta_inc(a, b, 0.3, 0.3) == 0.0);
  CHECK_THROWS_AS(special::beta_inc(-1.0, b, 0.0, 0.5), DomainError);
  CHECK_THROWS_AS(special::beta_inc(a, b, 0.6, 0.5), DomainError);
}

TEST_CASE("kstar_tail against endpoint-aware quadrature on both series branches") {
  for (double b : {0.05, 0.2, 0.35})
    for (double x : {1e-4, 0.1, 0.5, 0.7, 0.99}) {
      const double ref = ts_integral_to_one([&](double v, double vc) { return std::pow(vc, b - 1) / v; }, x);
      CHECK(special::kstar_tail(x, b) == Approx(ref).epsilon(1e-9));
    }
  CHECK(special::kstar_tail(1.0, 0.2) == 0.0);
}

TEST_CASE("power_hat_moments: the two halves sum to the plain moment") {
  for (double p : {-0.85, -0.3, 0.15, 1.7})
    for (double m : {0.0, 1.0, 3.0, 10.0, 500.0}) {
      const auto hm = special::power_hat_moments(p, m);
      const double ref = ts_integral([&](double y) { return std::pow(y, p); }, m, m + 1);
      CHECK(hm.rising + hm.falling == Approx(ref).epsilon(1e-11));
      CHECK(hm.rising > 0.0);
      CHECK(hm.falling > 0.0);
    }
}

TEST_CASE("neg_binomial_coeffs follow (1 - x)^a") {
  std::vector<double> c(6);
  special::neg_binomial_coeffs(0.5, c.size(), c.data());
  CHECK(c[0] == 1.0);
  CHECK(c[1] == Approx(-0.5));
  CHECK(c[2] == Approx(-0.125));
  // sum c_n x^n vs (1 - x)^a
  std::vector<double> d(60);
  special::neg_binomial_coeffs(0.3, d.size(), d.data());
  double s = 0.0, xn = 1.0;
  for (double v : d) s += v * xn, xn *= 0.4;
  CHECK(s == Approx(std::pow(0.6, 0.3)).epsilon(1e-12));
}
