#include <doctest.h>

#include <cmath>

#include "fbmlan/fisher.hpp"
#include "fbmlan/models.hpp"
#include "fbmlan/stats.hpp"

using namespace fbmlan;
using doctest::Approx;

namespace {

const Params kFou{1.0};
const Params kMr{0.7};
const Params kSine{2.0, 0.5};

FbmPath driver(double T, double dt, double H, Seed seed) { return generate_fbm(Grid::span(T, dt), H, seed); }

}  // namespace

namespace {

// a = -theta x - x^3 / 100: dissipativity fails at large |x|, and the x^3 term
// is not covered by growth exponent 1.
class CubicDrift final : public DriftModel {
 public:
  std::string name() const override { return "cubic"; }
  std::size_t param_dim() const override { return 1; }
  double drift(double x, ParamView th) const override { return -th[0] * x - 0.01 * x * x * x; }
  double drift_dx(double x, ParamView th) const override { return -th[0] - 0.03 * x * x; }
  void drift_dtheta(double x, ParamView, std::span<double> out) const override { out[0] = -x * x * x; }
  void drift_dx_dtheta(double x, ParamView, std::span<double> out) const override { out[0] = -3 * x * x; }
  double alpha(ParamView th) const override { return std::min(th[0], 1.0 / th[0]); }
  bool admissible(ParamView th) const override { return th[0] > 0; }
};

}  // namespace

TEST_CASE("probe flags a drift outside the assumptions") {
  const auto p = probe_assumptions(CubicDrift{}, Params{1.0}, 1000, 50.0);
  CHECK_FALSE(p.dissipative);
  CHECK_FALSE(p.growth_ok);
}

TEST_CASE("built-in models satisfy the dissipativity probe") {
  for (auto [name, th] : std::vector<std::pair<std::string, Params>>{{"fou", kFou}, {"mean_revert", kMr},
                                                                       {"sine", kSine}}) {
    const auto m = make_model(name);
    const auto p = probe_assumptions(*m, th, 1000, 50.0);
    CHECK(p.dissipative);
    CHECK(p.growth_ok);
    CHECK(p.cross_bounded);
    CHECK(p.worst_upper <= -m->alpha(th));
    CHECK(p.worst_lower >= -1.0 / m->alpha(th));
  }
  CHECK(make_model("zero")->exempt_from_dissipativity());
  CHECK_THROWS_AS(make_model("nope"), DomainError);
}

TEST_CASE("parameter and sigma validation") {
  CHECK_THROWS_AS(check_params(*make_model("fou"), Params{-1.0}), DomainError);
  CHECK_THROWS_AS(check_params(*make_model("fou"), Params{1.0, 2.0}), DomainError);
  CHECK_THROWS_AS(check_params(*make_model("sine"), Params{1.0, 0.95}), DomainError);
  CHECK_NOTHROW(check_params(*make_model("mean_revert"), Params{-3.0}));
  CHECK_THROWS_AS(check_sigma(0.0), DomainError);
  CHECK_THROWS_AS(euler_solve(*make_model("fou"), kFou, 0.0, 0.0, driver(1, 0.1, 0.35, {})), DomainError);
}

TEST_CASE("SINE: alpha and contraction rate") {
  const auto m = make_model("sine");
  CHECK(m->contraction_rate(kSine) == Approx(1.5));
  CHECK(m->alpha(kSine) == Approx(0.4));
}

TEST_CASE("zero drift reproduces x0 + sigma B exactly") {
  const auto B = driver(5, 0.05, 0.35, Seed{1, 0});
  const auto X = euler_solve(*make_model("zero"), Params{0.0}, 1.5, 0.3, B);
  for (std::size_t k = 0; k < B.values.size(); ++k) CHECK(X.values[k] == Approx(0.3 + 1.5 * B.values[k]).epsilon(1e-12));
}

TEST_CASE("MEAN_REVERT started at its fixed point stays there without noise") {
  FbmPath B{Grid::span(10, 0.1), std::vector<double>(101, 0.0), 0.35};
  const auto X = euler_solve(*make_model("mean_revert"), kMr, 1.0, 0.7, B);
  for (double v : X.values) CHECK(v == Approx(0.7).epsilon(1e-15));
}

TEST_CASE("FOU Euler converges at first order to the exact OU recursion") {
  // Oracle with B linear on each cell: X_{k+1} = e^{-th dt} X_k + sigma dB_k (1 - e^{-th dt}) / (th dt).
  const double th = 1.0, sigma = 1.0, T = 4.0;
  const auto fine = driver(T, 1.0 / 512, 0.35, Seed{3, 0});
  std::vector<double> errs;
  for (std::size_t stride : {32u, 16u, 8u}) {
    const double dt = stride / 512.0;
    FbmPath B{Grid::span(T, dt), {}, 0.35};
    for (std::size_t k = 0; k < fine.values.size(); k += stride) B.values.push_back(fine.values[k]);
    const auto X = euler_solve(*make_model("fou"), Params{th}, sigma, 0.5, B);
    double x = 0.5, err = 0.0;
    const double e = std::exp(-th * dt), g = (1 - e) / (th * dt);
    for (std::size_t k = 0; k + 1 < B.values.size(); ++k) {
      x = e * x + sigma * (B.values[k + 1] - B.values[k]) * g;
      err = std::max(err, std::abs(X.values[k + 1] - x));
    }
    CHECK(err < 1.0 * dt);
    errs.push_back(err);
  }
  CHECK(errs[0] / errs[1] > 1.6);
  CHECK(errs[1] / errs[2] > 1.6);
}

TEST_CASE("contraction gap") {
  const auto B = driver(10, 0.01, 0.35, Seed{4, 0});
  SUBCASE("identical starts") {
    for (double v : contraction_gap(*make_model("sine"), kSine, 1.0, 0.4, 0.4, B)) CHECK(v == 0.0);
  }
  SUBCASE("FOU follows e^{-t} within O(dt)") {
    const auto gap = contraction_gap(*make_model("fou"), kFou, 1.0, 2.0, -1.0, B);
    for (std::size_t k = 0; k < gap.size(); ++k)
      CHECK(std::abs(gap[k] - 3.0 * std::exp(-B.grid.t(k))) <= 3.0 * 0.01);
  }
  SUBCASE("SINE stays under the e^{-1.5 t} envelope on every replication") {
    const auto m = make_model("sine");
    for (std::uint64_t r = 0; r < 20; ++r) {
      const auto Br = driver(10, 0.01, 0.35, Seed{40, r});
      const auto gap = contraction_gap(*m, kSine, 1.0, 5.0, -5.0, Br);
      for (std::size_t k = 0; k < gap.size(); ++k)
        REQUIRE(gap[k] <= 10.0 * std::exp(-1.5 * Br.grid.t(k)) * (1 + kEulerGapSlack));
    }
  }
}

TEST_CASE("stationary burn-in forgets its initial value") {
  const auto m = make_model("fou");
  const double S = 40.0;
  FbmPath B = generate_fbm(Grid(-S, 0.05, static_cast<std::size_t>((S + 5) / 0.05) + 1), 0.35, Seed{5, 0});
  const auto a = stationary_from_driver(*m, kFou, 1.0, B, 0.0);
  const auto b = stationary_from_driver(*m, kFou, 1.0, B, 10.0);
  double d = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) d = std::max(d, std::abs(a.values[k] - b.values[k]));
  CHECK(d <= 10.0 * std::exp(-m->alpha(kFou) * S));
  CHECK(a.grid.t_start() == 0.0);
}

TEST_CASE("burn-in length: doubling the default changes the path by < 1e-6") {
  const auto m = make_model("sine");
  const Grid g = Grid::span(5, 0.05);
  const double S = default_burnin(*m, kSine);
  CHECK(S >= 40.0);
  // Same driver on [-2S, T]; start either at -2S or at -S with the driver restricted.
  const FbmPath B = generate_fbm(Grid(-2 * S, 0.05, static_cast<std::size_t>(std::llround((2 * S + 5) / 0.05)) + 1),
                                 0.35, Seed{6, 0});
  FbmPath half{Grid(-S, 0.05, B.values.size() - static_cast<std::size_t>(std::llround(S / 0.05))), {}, 0.35};
  half.values.assign(B.values.end() - half.grid.size(), B.values.end());
  const auto a = stationary_from_driver(*m, kSine, 1.0, B, 3.0);
  const auto b = stationary_from_driver(*m, kSine, 1.0, half, 3.0);
  REQUIRE(a.values.size() == g.size());
  double d = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) d = std::max(d, std::abs(a.values[k] - b.values[k]));
  CHECK(d < 1e-6);
}

TEST_CASE("stationary FOU: mean zero, variance from the spectral formula") {
  const auto m = make_model("fou");
  const std::size_t N = 1000;
  std::vector<double> x0(N);
  for (std::size_t r = 0; r < N; ++r)
    x0[r] = stationary_burnin(*m, kFou, 1.0, 0.35, Grid::span(0.5, 0.01), 40.0, Seed{8, r}).values.front();
  const double mean = stats::mean(x0), var = stats::variance(x0);
  CHECK(std::abs(mean) < 3 * std::sqrt(var / N));
  // SE of a Gaussian sample variance: var sqrt(2 / (N - 1)).
  const double target = fou_spectral_cov(1.0, 1.0, 0.35, 0.0);
  CHECK(std::abs(var - target) < 3 * target * std::sqrt(2.0 / (N - 1)));
}

TEST_CASE("Malliavin kernel") {
  const auto B = driver(3, 0.001, 0.35, Seed{9, 0});
  const auto X = euler_solve(*make_model("fou"), kFou, 1.3, 0.2, B);
  CHECK(malliavin_kernel(*make_model("fou"), kFou, 1.3, X, 1.0, 1.0) == 1.3);
  CHECK(malliavin_kernel(*make_model("fou"), kFou, 1.3, X, 0.5, 2.5) == Approx(1.3 * std::exp(-2.0)).epsilon(1e-12));
  const auto S = euler_solve(*make_model("sine"), kSine, 1.0, 0.2, B);
  const auto sm = make_model("sine");
  const double a = sm->alpha(kSine);
  const double v = malliavin_kernel(*sm, kSine, 1.0, S, 0.5, 2.0);
  CHECK(v <= std::exp(-a * 1.5));
  CHECK(v >= std::exp(-1.5 / a));
}

TEST_CASE("finite-difference Malliavin check") {
  const auto B = driver(3, 0.001, 0.35, Seed{10, 0});
  SUBCASE("zero drift passes sigma through") {
    const auto r = fd_malliavin_check(*make_model("zero"), Params{0.0}, 0.8, 0.0, B, 1.0, 2.0, 1e-4);
    CHECK(r.fd_value == Approx(0.8).epsilon(1e-10));
  }
  SUBCASE("FOU against sigma e^{-(t-s)}") {
    const auto r = fd_malliavin_check(*make_model("fou"), kFou, 1.0, 0.0, B, 1.0, 2.0, 1e-4);
    CHECK(std::abs(r.fd_value - std::exp(-1.0)) <= 1e-3);
    CHECK(std::abs(r.fd_value - r.kernel_value) <= 1e-3);
  }
  SUBCASE("SINE error shrinks with eps down to the dt floor") {
    const auto m = make_model("sine");
    const auto a = fd_malliavin_check(*m, kSine, 1.0, 0.0, B, 1.0, 2.0, 1e-1);
    const auto b = fd_malliavin_check(*m, kSine, 1.0, 0.0, B, 1.0, 2.0, 5e-2);
    const auto c = fd_malliavin_check(*m, kSine, 1.0, 0.0, B, 1.0, 2.0, 1e-6);
    const double floor = std::abs(c.fd_value - c.kernel_value);
    CHECK(std::abs(b.fd_value - b.kernel_value) <= 0.6 * std::abs(a.fd_value - a.kernel_value) + floor);
    CHECK(floor <= 1e-3);
  }
}

TEST_CASE("zero_mean_count counts leading zeros") {
  CHECK(zero_mean_count(std::vector<double>{0.0, 0.0, 1.0}) == 2);
  CHECK(zero_mean_count(std::vector<double>{1.0, 2.0}) == 0);
  CHECK_THROWS_AS(zero_mean_count(std::vector<double>{1.0, 0.0}), DomainError);
  CHECK(zero_mean_count(std::vector<double>{0.01, 0.5}, 0.02) == 1);
}

TEST_CASE("state path CSV") {
  const auto X = euler_solve(*make_model("zero"), Params{0.0}, 1.0, 2.0,
                             FbmPath{Grid::span(1, 0.5), {0.0, 0.0, 0.0}, 0.35});
  CHECK(to_csv(X) == "t,x\n0,2\n0.5,2\n1,2\n");
}
