#include <doctest.h>

#include <cmath>
#include <random>

#include "fbmlan/common.hpp"
#include "fbmlan/stats.hpp"

using namespace fbmlan;
using doctest::Approx;

TEST_CASE("moments and median") {
  const std::vector<double> x{3, 1, 4, 1, 5};
  CHECK(stats::mean(x) == Approx(2.8));
  CHECK(stats::variance(x) == Approx(3.2));
  CHECK(stats::median(x) == 3.0);
  CHECK(stats::median(std::vector<double>{4, 1, 3, 2}) == 2.5);
  CHECK(std::isnan(stats::variance(std::vector<double>{1.0})));
}

TEST_CASE("Kolmogorov survival function at tabulated points") {
  // Q_KS(lambda) for large n: 1.0 -> 0.26999967, 1.36 -> 0.04937
  const std::size_t n = 1000000;
  const double corr = std::sqrt(double(n)) + 0.12 + 0.11 / std::sqrt(double(n));
  CHECK(stats::kolmogorov_p(1.0 / corr, n) == Approx(0.26999967).epsilon(1e-6));
  CHECK(stats::kolmogorov_p(1.36 / corr, n) == Approx(0.0493).epsilon(1e-2));
  CHECK(stats::kolmogorov_p(0.0, 10) == 1.0);
}

TEST_CASE("KS test accepts a normal sample and rejects a shifted one") {
  std::mt19937_64 g(11);
  std::normal_distribution<double> nd(0.0, std::sqrt(2.0));
  std::vector<double> x(500);
  for (auto& v : x) v = nd(g);
  CHECK(stats::ks_normal(x, 0.0, 2.0).p_value > 0.01);
  CHECK(stats::ks_normal(x, 1.0, 2.0).p_value < 1e-6);
  CHECK_THROWS_AS(stats::ks_normal(x, 0.0, 0.0), DomainError);
}

TEST_CASE("KS statistic of a single point") {
  const auto r = stats::ks_normal(std::vector<double>{0.0}, 0.0, 1.0);
  CHECK(r.statistic == Approx(0.5));
}

TEST_CASE("line fits") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{3, 5, 7, 9};
  const auto f = stats::fit_line(x, y);
  CHECK(f.slope == Approx(2.0));
  CHECK(f.intercept == Approx(1.0));
  CHECK(f.slope_se == Approx(0.0).epsilon(1e-12));
  std::vector<double> t{1, 10, 100}, c{-2, -2 * std::pow(10, -1.3), -2 * std::pow(100, -1.3)};
  CHECK(stats::fit_loglog(t, c).slope == Approx(-1.3));
  CHECK_THROWS_AS(stats::fit_line(std::vector<double>{1, 1}, std::vector<double>{1, 2}), DomainError);
}
