#include "fbmlan/fracops.hpp"

#include <cmath>
#include <numbers>

#include "fbmlan/special.hpp"

namespace fbmlan {
namespace {

void check_h(double H) {
  if (!(H > 0.0 && H < 0.5)) throw DomainError("H must lie in (0, 1/2)");
}

void check_order(double g) {
  if (!(g > 0.0 && g < 1.0)) throw DomainError("fractional order must lie in (0, 1)");
}

// y_i = sum_{m >= 0} w[m] x[i + m]
std::vector<double> anticausal(std::span<const double> w, std::span<const double> x) {
  std::vector<double> xr(x.rbegin(), x.rend());
  fft::CausalConvolver conv(w.first(x.size()));
  auto y = conv.apply(xr);
  return {y.rbegin(), y.rend()};
}

}  // namespace

FracConstants make_constants(double H) {
  check_h(H);
  const double d2 = 2.0 * H * std::exp(std::lgamma(1.5 - H) + std::lgamma(H + 0.5) - std::lgamma(2.0 - 2.0 * H));
  const double d = std::sqrt(d2);
  const double bar = std::tgamma(0.5 - H) * d;
  const double bb = special::beta(0.5 - H, 1.5 - H);
  const double dprime = bb * bb / (bar * bar * (2.0 - 2.0 * H));
  const double e = std::tgamma(2.0 * H + 1.0) * std::sin(std::numbers::pi * H);
  return {H, d, bar, dprime, e};
}

double bar_d_beta_route(double H) {
  check_h(H);
  return std::sqrt(2.0 * H * special::beta(1.5 - H, 0.5 - H) * special::beta(0.5 + H, 0.5 - H));
}

double kernel_mass(double H) { return special::beta(1.5 - H, 0.5 - H); }

FuncPath frac_integral_minus(const FuncPath& f, double order) {
  check_order(order);
  const std::size_t n = f.values.size();
  const double h = f.grid.dt();
  // Node i + m collects the falling half of cell m and the rising half of cell m - 1.
  std::vector<double> w(n + 1);
  for (std::size_t m = 0; m <= n; ++m) {
    const double md = static_cast<double>(m);
    w[m] = special::power_hat_moments(order - 1.0, md).falling +
           (m >= 1 ? special::power_hat_moments(order - 1.0, md - 1).rising : 0.0);
  }
  std::vector<double> x(f.values);
  x.push_back(0.0);
  auto y = anticausal(w, x);
  const double scale = std::pow(h, order) / std::tgamma(order);
  FuncPath out{f.grid, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) out.values[i] = scale * y[i];
  return out;
}

FuncPath marchaud_minus(const FuncPath& f, double order) {
  check_order(order);
  const double g = order;
  const std::size_t n = f.values.size();
  const double h = f.grid.dt();
  std::vector<double> psi(f.values);
  psi.push_back(0.0);
  // Cells beyond the first: sum_{j > i} w[j - i] psi_j. The psi_i terms of all
  // cells and of the tail past the grid telescope to psi_i / g.
  std::vector<double> w(n + 1, 0.0);
  for (std::size_t m = 1; m <= n; ++m) {
    const double md = static_cast<double>(m);
    w[m] = special::power_hat_moments(-1.0 - g, md).falling +
           (m >= 2 ? special::power_hat_moments(-1.0 - g, md - 1).rising : 0.0);
  }
  auto body = anticausal(w, psi);
  const double scale = g / std::tgamma(1.0 - g) * std::pow(h, -g);
  FuncPath out{f.grid, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double first_cell = -(psi[i + 1] - psi[i]) / (1.0 - g);
    out.values[i] = scale * (psi[i] / g - body[i] + first_cell);
  }
  return out;
}

BetaPath beta_from_drift(std::span<const double> a, const Grid& grid, double sigma, double H) {
  check_h(H);
  check_sigma(sigma);
  if (grid.t_start() != 0.0) throw DomainError("beta_process needs a grid starting at t = 0");
  if (a.size() != grid.size()) throw DomainError("beta_process: size mismatch");
  const auto q = SingularQuadrature::get(H, grid.size());
  auto I = q->apply(a);
  const auto fc = make_constants(H);
  const double c = 0.5 - H;
  const double pre = std::pow(grid.dt(), c) / (fc.bar_d_H * sigma);
  BetaPath out{grid, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t k = 1; k < grid.size(); ++k) out.values[k] = pre * std::pow(static_cast<double>(k), -c) * I[k];
  return out;
}

BetaPath beta_process(const DriftModel& model, ParamView th, double sigma, double H, const Grid& grid,
                      std::span<const double> x) {
  std::vector<double> a(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) a[k] = model.drift(x[k], th);
  return beta_from_drift(a, grid, sigma, H);
}

BetaPath beta_process(const DriftModel& model, ParamView th, double H, const StatePath& path) {
  return beta_process(model, th, path.sigma, H, path.grid, path.values);
}

std::vector<BetaPath> dbeta_process(const DriftModel& model, ParamView th, double sigma, double H, const Grid& grid,
                                    std::span<const double> x) {
  const std::size_t m = model.param_dim();
  std::vector<std::vector<double>> a(m, std::vector<double>(x.size()));
  std::vector<double> g(m);
  for (std::size_t k = 0; k < x.size(); ++k) {
    model.drift_dtheta(x[k], th, g);
    for (std::size_t i = 0; i < m; ++i) a[i][k] = g[i];
  }
  std::vector<BetaPath> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(beta_from_drift(a[i], grid, sigma, H));
  return out;
}

std::vector<BetaPath> dbeta_process(const DriftModel& model, ParamView th, double H, const StatePath& path) {
  return dbeta_process(model, th, path.sigma, H, path.grid, path.values);
}

double kstar_inv_indicator(double s, double t, double H) {
  check_h(H);
  if (!(s > 0.0)) throw DomainError("kstar_inv_indicator: s must be positive");
  if (s >= t) return 0.0;
  // r = s / v turns the integral into int_{s/t}^1 v^{-1} (1 - v)^{-1/2-H} dv.
  static thread_local double cached_h = -1.0, cached_bar = 0.0;
  if (cached_h != H) {
    cached_h = H;
    cached_bar = make_constants(H).bar_d_H;
  }
  return std::pow(s, 0.5 - H) * special::kstar_tail(s / t, 0.5 - H) / cached_bar;
}

}  // namespace fbmlan
