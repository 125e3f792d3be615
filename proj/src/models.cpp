#include "fbmlan/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fbmlan {
namespace {

class FouModel final : public DriftModel {
 public:
  std::string name() const override { return "fou"; }
  std::size_t param_dim() const override { return 1; }
  double drift(double x, ParamView th) const override { return -th[0] * x; }
  double drift_dx(double, ParamView th) const override { return -th[0]; }
  void drift_dtheta(double x, ParamView, std::span<double> out) const override { out[0] = -x; }
  void drift_dx_dtheta(double, ParamView, std::span<double> out) const override { out[0] = -1.0; }
  double alpha(ParamView th) const override { return std::min(th[0], 1.0 / th[0]); }
  double contraction_rate(ParamView th) const override { return th[0]; }
  bool admissible(ParamView th) const override { return th[0] > 0.0 && std::isfinite(th[0]); }
  std::optional<AffineForm> affine() const override {
    return AffineForm{[](double x) { return -x; }, [](double) { return 0.0; }};
  }
  std::optional<Params> stationary_mean_grad(ParamView) const override { return Params{0.0}; }
};

class MeanRevertModel final : public DriftModel {
 public:
  std::string name() const override { return "mean_revert"; }
  std::size_t param_dim() const override { return 1; }
  double drift(double x, ParamView th) const override { return th[0] - x; }
  double drift_dx(double, ParamView) const override { return -1.0; }
  void drift_dtheta(double, ParamView, std::span<double> out) const override { out[0] = 1.0; }
  void drift_dx_dtheta(double, ParamView, std::span<double> out) const override { out[0] = 0.0; }
  double alpha(ParamView) const override { return 1.0; }
  double growth_p() const override { return 0.0; }
  bool admissible(ParamView th) const override { return std::isfinite(th[0]); }
  std::optional<AffineForm> affine() const override {
    return AffineForm{[](double) { return 1.0; }, [](double x) { return -x; }};
  }
  std::optional<Params> stationary_mean_grad(ParamView) const override { return Params{1.0}; }
};

class SineModel final : public DriftModel {
 public:
  std::string name() const override { return "sine"; }
  std::size_t param_dim() const override { return 2; }
  double drift(double x, ParamView th) const override { return -th[0] * x + th[1] * std::sin(x); }
  double drift_dx(double x, ParamView th) const override { return -th[0] + th[1] * std::cos(x); }
  void drift_dtheta(double x, ParamView, std::span<double> out) const override {
    out[0] = -x;
    out[1] = std::sin(x);
  }
  void drift_dx_dtheta(double x, ParamView, std::span<double> out) const override {
    out[0] = -1.0;
    out[1] = std::cos(x);
  }
  // d_x a ranges over [-(t1 + |t2|), -(t1 - |t2|)], so one alpha must cover both ends.
  double alpha(ParamView th) const override {
    const double lo = th[0] - std::abs(th[1]);
    const double hi = th[0] + std::abs(th[1]);
    return std::min(lo, 1.0 / hi);
  }
  double contraction_rate(ParamView th) const override { return th[0] - std::abs(th[1]); }
  bool admissible(ParamView th) const override {
    return std::isfinite(th[0]) && std::isfinite(th[1]) && th[0] - std::abs(th[1]) >= kSineAlphaMin;
  }
  // Odd drift and symmetric noise give a symmetric stationary law.
  std::optional<Params> stationary_mean_grad(ParamView) const override { return Params{0.0, 0.0}; }
};

class ZeroModel final : public DriftModel {
 public:
  std::string name() const override { return "zero"; }
  std::size_t param_dim() const override { return 1; }
  double drift(double, ParamView) const override { return 0.0; }
  double drift_dx(double, ParamView) const override { return 0.0; }
  void drift_dtheta(double, ParamView, std::span<double> out) const override { out[0] = 0.0; }
  void drift_dx_dtheta(double, ParamView, std::span<double> out) const override { out[0] = 0.0; }
  double alpha(ParamView) const override { return 0.0; }
  double contraction_rate(ParamView) const override { return 0.0; }
  bool admissible(ParamView) const override { return true; }
  std::optional<Params> stationary_mean_grad(ParamView) const override { return Params{0.0}; }
  bool exempt_from_dissipativity() const override { return true; }
};

}  // namespace

ModelPtr make_model(std::string_view name) {
  if (name == "fou") return std::make_shared<FouModel>();
  if (name == "mean_revert") return std::make_shared<MeanRevertModel>();
  if (name == "sine") return std::make_shared<SineModel>();
  if (name == "zero") return std::make_shared<ZeroModel>();
  throw DomainError("unknown model '" + std::string(name) + "'");
}

void check_params(const DriftModel& model, ParamView th) {
  if (th.size() != model.param_dim())
    throw DomainError(model.name() + ": expected " + std::to_string(model.param_dim()) + " parameters, got " +
                      std::to_string(th.size()));
  if (!model.admissible(th)) throw DomainError(model.name() + ": parameter outside the admissible set");
}

void check_sigma(double sigma) {
  if (sigma == 0.0 || !std::isfinite(sigma)) throw DomainError("sigma must be finite and nonzero");
}

ProbeResult probe_assumptions(const DriftModel& model, ParamView th, std::size_t n_probe, double range) {
  ProbeResult r;
  const std::size_t m = model.param_dim();
  const double a = model.alpha(th);
  const double p = model.growth_p();
  std::vector<double> g(m), gx(m);
  double c_inner = 0.0, c_outer = 0.0;
  r.worst_upper = -INFINITY;
  r.worst_lower = INFINITY;
  for (std::size_t i = 0; i < n_probe; ++i) {
    const double x = -range + 2.0 * range * static_cast<double>(i) / static_cast<double>(n_probe - 1);
    const double d = model.drift_dx(x, th);
    r.worst_upper = std::max(r.worst_upper, d);
    r.worst_lower = std::min(r.worst_lower, d);
    if (!(d <= -a && d >= -1.0 / a)) r.dissipative = false;
    model.drift_dtheta(x, th, g);
    model.drift_dx_dtheta(x, th, gx);
    for (std::size_t j = 0; j < m; ++j) {
      const double ratio = std::abs(g[j]) / (1.0 + std::pow(std::abs(x), p));
      if (std::abs(x) <= 0.5 * range)
        c_inner = std::max(c_inner, ratio);
      else
        c_outer = std::max(c_outer, ratio);
      if (!std::isfinite(gx[j]) || std::abs(gx[j]) > 1e6) r.cross_bounded = false;
    }
  }
  // A growth exponent that is too small shows up as the ratio still rising over
  // the outer half of the probe range.
  r.growth_ok = std::isfinite(c_outer) && c_outer <= 1.5 * c_inner + 1e-12;
  return r;
}

std::size_t zero_mean_count(std::span<const double> mean_grads, double tol) {
  std::size_t m0 = 0;
  while (m0 < mean_grads.size() && std::abs(mean_grads[m0]) <= tol) ++m0;
  for (std::size_t i = m0; i < mean_grads.size(); ++i)
    if (std::abs(mean_grads[i]) <= tol) throw DomainError("zero-mean components must come first");
  return m0;
}

StatePath euler_solve(const DriftModel& model, ParamView th, double sigma, double x0, const FbmPath& driver) {
  check_sigma(sigma);
  if (th.size() != model.param_dim()) throw DomainError("parameter dimension mismatch");
  const std::size_t n = driver.grid.size();
  const double dt = driver.grid.dt();
  StatePath out{driver.grid, std::vector<double>(n), model.name(), Params(th.begin(), th.end()), sigma, x0};
  double x = x0;
  out.values[0] = x;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    x += model.drift(x, th) * dt + sigma * (driver.values[k + 1] - driver.values[k]);
    if (!std::isfinite(x)) throw IntegrationError("euler_solve: non-finite state at step " + std::to_string(k + 1), k + 1);
    out.values[k + 1] = x;
  }
  return out;
}

double default_burnin(const DriftModel& model, ParamView th) {
  const double rate = model.contraction_rate(th);
  if (!(rate > 0.0)) throw DomainError("burn-in needs a positive contraction rate");
  return std::max(40.0, std::log(1e8) / rate);
}

StatePath stationary_from_driver(const DriftModel& model, ParamView th, double sigma, const FbmPath& driver,
                                 double init) {
  const std::size_t zero = driver.grid.zero_index();
  if (zero == 0) throw DomainError("stationary driver must start before t = 0");
  auto full = euler_solve(model, th, sigma, init, driver);
  const std::size_t n = driver.grid.size() - zero;
  StatePath out{Grid(0.0, driver.grid.dt(), n), {}, full.model, full.theta, sigma, full.values[zero]};
  out.values.assign(full.values.begin() + static_cast<std::ptrdiff_t>(zero), full.values.end());
  return out;
}

StatePath stationary_burnin(const DriftModel& model, ParamView th, double sigma, double H, const Grid& obs_grid,
                            double burnin, Seed seed) {
  if (!(burnin > 0.0)) throw DomainError("burn-in length must be positive");
  if (obs_grid.t_start() != 0.0) throw DomainError("observation grid must start at 0");
  const double dt = obs_grid.dt();
  const auto nb = static_cast<std::size_t>(std::ceil(burnin / dt - 1e-9));
  const Grid two_sided(-static_cast<double>(nb) * dt, dt, nb + obs_grid.size());
  const auto driver = generate_fbm(two_sided, H, seed);
  return stationary_from_driver(model, th, sigma, driver, 0.0);
}

std::vector<double> contraction_gap(const DriftModel& model, ParamView th, double sigma, double x0, double y0,
                                    const FbmPath& driver) {
  const auto X = euler_solve(model, th, sigma, x0, driver);
  const auto Y = euler_solve(model, th, sigma, y0, driver);
  std::vector<double> gap(X.values.size());
  for (std::size_t k = 0; k < gap.size(); ++k) gap[k] = std::abs(X.values[k] - Y.values[k]);
  return gap;
}

double malliavin_kernel(const DriftModel& model, ParamView th, double sigma, const StatePath& path, double s,
                        double t) {
  const std::size_t i = path.grid.index_of(s);
  const std::size_t j = path.grid.index_of(t);
  if (i > j) throw DomainError("malliavin_kernel: need s <= t");
  double acc = 0.0;
  for (std::size_t k = i; k < j; ++k)
    acc += 0.5 * (model.drift_dx(path.values[k], th) + model.drift_dx(path.values[k + 1], th));
  return sigma * std::exp(acc * path.grid.dt());
}

FdMalliavin fd_malliavin_check(const DriftModel& model, ParamView th, double sigma, double x0,
                               const FbmPath& driver, double s, double t, double eps) {
  if (!(eps > 0.0)) throw DomainError("fd_malliavin_check: eps must be positive");
  const std::size_t i = driver.grid.index_of(s);
  const std::size_t j = driver.grid.index_of(t);
  if (i >= j) throw DomainError("fd_malliavin_check: need s < t");
  const auto base = euler_solve(model, th, sigma, x0, driver);
  FbmPath bumped = driver;
  for (std::size_t k = i + 1; k < bumped.values.size(); ++k) bumped.values[k] += eps;
  const auto moved = euler_solve(model, th, sigma, x0, bumped);
  return {(moved.values[j] - base.values[j]) / eps, malliavin_kernel(model, th, sigma, base, s, t)};
}

std::string to_csv(const StatePath& path) {
  std::ostringstream os;
  os.precision(17);
  os << "t,x\n";
  for (std::size_t k = 0; k < path.values.size(); ++k) os << path.grid.t(k) << ',' << path.values[k] << '\n';
  return os.str();
}

}  // namespace fbmlan
