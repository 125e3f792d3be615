#include <doctest.h>

#include <cmath>

#include "fbmlan/fbm.hpp"

using namespace fbmlan;
using doctest::Approx;

TEST_CASE("fbm_cov special cases") {
  CHECK(fbm_cov(1.7, 1.7, 0.35) == Approx(std::pow(1.7, 0.7)));
  CHECK(fbm_cov(1.0, 2.0, 0.5) == Approx(1.0));
  // 0.5 * (1 + 2^{0.5} - 1^{0.5})
  CHECK(fbm_cov(1.0, 2.0, 0.25) == Approx(0.5 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(fbm_cov(-1.0, 2.0, 0.3) == Approx(0.5 * (1.0 + std::pow(2.0, 0.6) - std::pow(3.0, 0.6))));
}

TEST_CASE("fgn autocovariance is the increment covariance") {
  const double H = 0.35;
  for (double k : {0.0, 1.0, 5.0}) {
    const double ref = fbm_cov(k + 1, 1, H) - fbm_cov(k, 1, H) - fbm_cov(k + 1, 0, H) + fbm_cov(k, 0, H);
    CHECK(fgn_autocov(k, H) == Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("paths are anchored at zero and deterministic in the seed") {
  const Grid g(0.0, 0.01, 257);
  const auto a = generate_fbm(g, 0.35, Seed{7, 3});
  const auto b = generate_fbm(g, 0.35, Seed{7, 3});
  const auto c = generate_fbm(g, 0.35, Seed{7, 4});
  CHECK(a.values.front() == 0.0);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);

  const Grid two(-1.0, 0.01, 301);
  const auto p = generate_fbm(two, 0.35, Seed{1, 0});
  CHECK(p.values[two.zero_index()] == 0.0);
  CHECK_THROWS_AS(generate_fbm(Grid(0.5, 0.1, 10), 0.35, Seed{}), DomainError);
}

TEST_CASE("variance at t = 1 over 10^4 paths") {
  const Grid g(0.0, 1.0 / 63.0, 64);
  const std::size_t N = 10000;
  double s = 0.0;
  for (std::size_t r = 0; r < N; ++r) {
    const auto p = generate_fbm(g, 0.35, Seed{42, r});
    s += p.values.back() * p.values.back();
  }
  CHECK(s / N == Approx(1.0).epsilon(0.05));
}

TEST_CASE("H = 1/2 gives uncorrelated increments") {
  const Grid g(0.0, 0.01, 4097);
  const auto p = generate_fbm(g, 0.5, Seed{5, 0});
  std::vector<double> d(p.values.size() - 1);
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = p.values[k + 1] - p.values[k];
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    s0 += d[k] * d[k];
    if (k + 1 < d.size()) s1 += d[k] * d[k + 1];
  }
  CHECK(std::abs(s1 / s0) < 3.0 / std::sqrt(double(d.size())));
}

TEST_CASE("circulant embedding is nonnegative for H < 1/2 and Cholesky agrees in law") {
  CHECK(circulant_min_ratio(1024, 0.35) >= -1e-12);
  CHECK(circulant_min_ratio(1024, 0.26) >= -1e-12);
  // Lag-0 and lag-1 sample moments of both samplers vs the exact fGn covariance.
  const std::size_t n = 64, reps = 3000;
  double v_c = 0, v_h = 0, l_c = 0, l_h = 0;
  Rng r1 = make_rng(Seed{9, 0}), r2 = make_rng(Seed{9, 1});
  for (std::size_t r = 0; r < reps; ++r) {
    const auto a = fgn_circulant(n, 0.35, r1);
    const auto b = fgn_cholesky(n, 0.35, r2);
    v_c += a[10] * a[10];
    v_h += b[10] * b[10];
    l_c += a[10] * a[11];
    l_h += b[10] * b[11];
  }
  const double se = std::sqrt(2.0 / reps);
  CHECK(std::abs(v_c / reps - 1.0) < 4 * se);
  CHECK(std::abs(v_h / reps - 1.0) < 4 * se);
  CHECK(std::abs(l_c / reps - fgn_autocov(1, 0.35)) < 4 * se);
  CHECK(std::abs(l_h / reps - fgn_autocov(1, 0.35)) < 4 * se);
}

TEST_CASE("two-sided grid restricted to t >= 0 has the one-sided law") {
  // Entrywise 3 SE on a 16-point restriction; at most 2% of entries may exceed it by chance.
  const Grid g(-1.0, 1.0 / 15.0, 31);
  const std::size_t z = g.zero_index(), m = 16, N = 4000;
  std::vector<double> s1(m * m, 0.0), s2(m * m, 0.0);
  for (std::size_t r = 0; r < N; ++r) {
    const auto p = generate_fbm(g, 0.35, Seed{77, r});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double v = p.values[z + i] * p.values[z + j];
        s1[i * m + j] += v;
        s2[i * m + j] += v * v;
      }
  }
  std::size_t bad = 0, total = 0;
  for (std::size_t i = 1; i < m; ++i)
    for (std::size_t j = 1; j < m; ++j) {
      const double mean = s1[i * m + j] / N;
      const double se = std::sqrt((s2[i * m + j] / N - mean * mean) / N);
      ++total;
      if (std::abs(mean - fbm_cov(g.t(z + i), g.t(z + j), 0.35)) > 3 * se) ++bad;
    }
  CHECK(bad <= total / 50);
}

TEST_CASE("CSV export") {
  const auto p = generate_fbm(Grid(0.0, 0.5, 3), 0.35, Seed{});
  const auto csv = to_csv(p);
  CHECK(csv.rfind("t,value\n0,0\n", 0) == 0);
}
