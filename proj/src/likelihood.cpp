#include "fbmlan/likelihood.hpp"

#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>

#include "fbmlan/special.hpp"

namespace fbmlan {

ObservedPath observe(const StatePath& path) { return {path.grid, path.values, path.sigma, path.values.front()}; }

void validate(const ObservedPath& obs) {
  check_sigma(obs.sigma);
  if (obs.grid.t_start() != 0.0) throw DomainError("observed path must start at t = 0");
  if (obs.values.size() != obs.grid.size()) throw DomainError("observed path: size mismatch");
  if (obs.values.front() != obs.x0) throw DomainError("observed path: first value differs from x0");
  for (double v : obs.values)
    if (!std::isfinite(v)) throw DomainError("observed path has non-finite values");
}

namespace {

std::vector<double> drift_values(const ObservedPath& obs, const DriftModel& model, ParamView th) {
  std::vector<double> a(obs.values.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = model.drift(obs.values[k], th);
  return a;
}

// dB^theta_j = sigma^{-1} (dX_j - trapezoid of a over the cell)
std::vector<double> driver_increments(const ObservedPath& obs, const DriftModel& model, ParamView th) {
  const auto a = drift_values(obs, model, th);
  const double dt = obs.grid.dt();
  std::vector<double> db(a.size() - 1);
  for (std::size_t j = 0; j + 1 < a.size(); ++j)
    db[j] = (obs.values[j + 1] - obs.values[j] - 0.5 * dt * (a[j] + a[j + 1])) / obs.sigma;
  return db;
}

// int_{k-1}^k s^c F(s / k) ds in grid units.
double diagonal_cell(std::size_t k, double H) {
  static thread_local boost::math::quadrature::tanh_sinh<double> ts;
  const double c = 0.5 - H;
  const double kd = static_cast<double>(k);
  auto f = [&](double s) {
    if (s <= 0.0 || s >= kd) return 0.0;
    return std::pow(s, c) * special::kstar_tail(s / kd, c);
  };
  return ts.integrate(f, kd - 1.0, kd, 1e-13);
}

std::shared_ptr<const std::vector<double>> diagonal_table(double H, std::size_t n) {
  static std::mutex mu;
  static std::map<std::pair<double, std::size_t>, std::shared_ptr<const std::vector<double>>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({H, n});
    if (it != cache.end()) return it->second;
  }
  auto tab = std::make_shared<std::vector<double>>(n, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t k = 1; k < n; ++k) (*tab)[k] = diagonal_cell(k, H);
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{H, n}];
  if (!slot) slot = tab;
  return slot;
}

// W at grid index k without the d_bar^{-1} dt^c prefactor.
double w_sum(std::span<const double> db, std::size_t k, double H, double diag) {
  if (k == 0) return 0.0;
  const double c = 0.5 - H;
  const double kd = static_cast<double>(k);
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const double mid = static_cast<double>(j) + 0.5;
    s += std::pow(mid, c) * special::kstar_tail(mid / kd, c) * db[j];
  }
  return s + diag * db[k - 1];
}

InnovationPath innovation_impl(const ObservedPath& obs, const DriftModel& model, ParamView th, double H,
                               bool parallel) {
  validate(obs);
  const auto db = driver_increments(obs, model, th);
  const std::size_t n = obs.grid.size();
  const auto diag = diagonal_table(H, n);
  const double pre = std::pow(obs.grid.dt(), 0.5 - H) / make_constants(H).bar_d_H;
  InnovationPath out{obs.grid, std::vector<double>(n, 0.0), Params(th.begin(), th.end())};
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 32)
    for (std::size_t k = 1; k < n; ++k) out.values[k] = pre * w_sum(db, k, H, (*diag)[k]);
  } else {
    for (std::size_t k = 1; k < n; ++k) out.values[k] = pre * w_sum(db, k, H, (*diag)[k]);
  }
  return out;
}

}  // namespace

FuncPath b_theta_path(const ObservedPath& obs, const DriftModel& model, ParamView th) {
  validate(obs);
  const auto a = drift_values(obs, model, th);
  const double dt = obs.grid.dt();
  FuncPath out{obs.grid, std::vector<double>(a.size(), 0.0)};
  double integral = 0.0;
  for (std::size_t k = 1; k < a.size(); ++k) {
    integral += 0.5 * dt * (a[k - 1] + a[k]);
    out.values[k] = (obs.values[k] - obs.x0 - integral) / obs.sigma;
  }
  return out;
}

InnovationPath innovation_W(const ObservedPath& obs, const DriftModel& model, ParamView th, double H) {
  return innovation_impl(obs, model, th, H, true);
}

InnovationPath innovation_W_serial(const ObservedPath& obs, const DriftModel& model, ParamView th, double H) {
  return innovation_impl(obs, model, th, H, false);
}

std::vector<double> innovation_W_at(const ObservedPath& obs, const DriftModel& model, ParamView th, double H,
                                    std::span<const std::size_t> indices) {
  validate(obs);
  const auto db = driver_increments(obs, model, th);
  const double pre = std::pow(obs.grid.dt(), 0.5 - H) / make_constants(H).bar_d_H;
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t k = indices[i];
    if (k >= obs.grid.size()) throw DomainError("innovation_W_at: index out of range");
    out[i] = k == 0 ? 0.0 : pre * w_sum(db, k, H, diagonal_cell(k, H));
  }
  return out;
}

ZPath z_path(const ObservedPath& obs, const DriftModel& model, ParamView theta_ref, double H) {
  const auto W = innovation_W(obs, model, theta_ref, H);
  const auto beta = beta_process(model, theta_ref, obs.sigma, H, obs.grid, obs.values);
  const double dt = obs.grid.dt();
  ZPath out{obs.grid, std::vector<double>(W.values.size(), 0.0)};
  double integral = 0.0;
  for (std::size_t k = 1; k < out.values.size(); ++k) {
    integral += 0.5 * dt * (beta.values[k - 1] + beta.values[k]);
    out.values[k] = W.values[k] + integral;
  }
  return out;
}

namespace {
std::vector<double> z_increments_impl(const ObservedPath& obs, double H, bool direct) {
  validate(obs);
  const std::size_t cells = obs.grid.size() - 1;
  std::vector<double> dx(cells);
  for (std::size_t j = 0; j < cells; ++j) dx[j] = obs.values[j + 1] - obs.values[j];
  const auto q = IncrementQuadrature::get(H, cells);
  auto dz = direct ? q->apply_direct(dx) : q->apply(dx);
  const double pre = std::pow(obs.grid.dt(), 0.5 - H) / (make_constants(H).bar_d_H * obs.sigma);
  for (double& v : dz) v *= pre;
  return dz;
}
}  // namespace

std::vector<double> z_increments(const ObservedPath& obs, double H) { return z_increments_impl(obs, H, false); }
std::vector<double> z_increments_direct(const ObservedPath& obs, double H) {
  return z_increments_impl(obs, H, true);
}

Likelihood::Likelihood(ObservedPath obs, ModelPtr model, double H)
    : obs_(std::move(obs)), model_(std::move(model)), H_(H) {
  if (model_->exempt_from_dissipativity()) throw DomainError("the zero-drift stub is not an estimation model");
  dz_ = z_increments(obs_, H_);
}

BetaPath Likelihood::beta(ParamView th) const {
  return beta_process(*model_, th, obs_.sigma, H_, obs_.grid, obs_.values);
}

std::vector<double> Likelihood::innovation_increments(ParamView th) const {
  const auto b = beta(th);
  const double dt = obs_.grid.dt();
  std::vector<double> dw(dz_.size());
  for (std::size_t k = 0; k < dw.size(); ++k) dw[k] = dz_[k] - dt * b.values[k];
  return dw;
}

LogLikResult Likelihood::loglik(ParamView th, ParamView th_new) const {
  check_params(*model_, th);
  check_params(*model_, th_new);
  const auto b0 = beta(th);
  const auto b1 = beta(th_new);
  const double dt = obs_.grid.dt();
  std::vector<double> d(b0.values.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = b1.values[k] - b0.values[k];
  // J(th_new) - J(th) with J = sum beta_k dZ_k - 1/2 trap(beta^2): the dZ sum is
  // left-point, the Lebesgue parts are all trapezoid, so the ratio is an exact cocycle.
  LogLikResult r;
  for (std::size_t k = 0; k < dz_.size(); ++k) {
    r.stochastic += d[k] * dz_[k] - 0.5 * (d[k] * b0.values[k] + d[k + 1] * b0.values[k + 1]) * dt;
    r.quadratic += 0.5 * (d[k] * d[k] + d[k + 1] * d[k + 1]) * dt;
  }
  r.value = r.stochastic - 0.5 * r.quadratic;
  return r;
}

LogLikResult loglik_ratio(const ObservedPath& obs, const DriftModel& model, ParamView th, ParamView th_new,
                          double H) {
  // Non-owning handle; the Likelihood does not outlive this call.
  Likelihood lik(obs, ModelPtr(&model, [](const DriftModel*) {}), H);
  return lik.loglik(th, th_new);
}

namespace {

double linear_estimate(const ObservedPath& obs, const std::vector<double>& dz, double H,
                       const std::function<double(double)>& b, const std::function<double(double)>& h) {
  const std::size_t n = obs.values.size();
  std::vector<double> bv(n), hv(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    bv[k] = b(obs.values[k]);
    if (h) hv[k] = h(obs.values[k]);
  }
  const auto q = beta_from_drift(bv, obs.grid, obs.sigma, H).values;
  std::vector<double> p(n, 0.0);
  if (h) p = beta_from_drift(hv, obs.grid, obs.sigma, H).values;
  const double dt = obs.grid.dt();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    num += q[k] * dz[k] - 0.5 * (q[k] * p[k] + q[k + 1] * p[k + 1]) * dt;
    den += 0.5 * (q[k] * q[k] + q[k + 1] * q[k + 1]) * dt;
  }
  const double T = obs.grid.t_end();
  if (!(std::abs(den) >= 1e-12 * T)) throw EstimationError("mle_linear: degenerate design (denominator ~ 0)");
  return num / den;
}

}  // namespace

double mle_linear(const Likelihood& lik, const std::function<double(double)>& b,
                  const std::function<double(double)>& h) {
  return linear_estimate(lik.obs(), lik.dz(), lik.hurst(), b, h);
}

double mle_linear(const ObservedPath& obs, const std::function<double(double)>& b, double H,
                  const std::function<double(double)>& h) {
  return linear_estimate(obs, z_increments(obs, H), H, b, h);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MleResult golden(const Likelihood& lik, double x0, const MleOptions& opts) {
  const Params base{x0};
  std::size_t evals = 0;
  auto f = [&](double u) {
    ++evals;
    const Params p{u};
    if (!lik.model().admissible(p)) return kNegInf;
    return lik.loglik(base, p).value;
  };
  const double step0 = opts.initial_step * std::max(1.0, std::abs(x0));
  double b = x0, fb = 0.0;
  double a = x0 - step0, fa = f(a);
  double c = x0 + step0, fc = f(c);
  // Walk uphill until the middle point is the best of three.
  double step = step0;
  while (!(fb >= fa && fb >= fc)) {
    if (evals > opts.max_iter) throw EstimationError("mle_numeric: could not bracket the maximum", {b});
    step *= 2.0;
    if (fc > fb) {
      a = b, fa = fb;
      b = c, fb = fc;
      c = b + step, fc = f(c);
    } else {
      c = b, fc = fb;
      b = a, fb = fa;
      a = b - step, fa = f(a);
    }
  }
  constexpr double g = 0.3819660112501051;
  double lo = a, hi = c;
  double x1 = lo + g * (hi - lo), f1 = f(x1);
  double x2 = lo + (1.0 - g) * (hi - lo), f2 = f(x2);
  while (hi - lo > opts.xtol * std::max(1.0, std::abs(x1))) {
    if (evals > opts.max_iter) throw EstimationError("mle_numeric: iteration cap reached", {f1 >= f2 ? x1 : x2});
    if (f1 >= f2) {
      hi = x2;
      x2 = x1, f2 = f1;
      x1 = lo + g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2, f1 = f2;
      x2 = lo + (1.0 - g) * (hi - lo);
      f2 = f(x2);
    }
  }
  const double best = f1 >= f2 ? x1 : x2;
  return {{best}, std::max(f1, f2), evals};
}

MleResult nelder_mead(const Likelihood& lik, ParamView x0, const MleOptions& opts) {
  const std::size_t m = x0.size();
  const Params base(x0.begin(), x0.end());
  std::size_t evals = 0;
  auto cost = [&](const Params& u) {
    ++evals;
    if (!lik.model().admissible(u)) return std::numeric_limits<double>::infinity();
    return -lik.loglik(base, u).value;
  };
  std::vector<Params> pts(m + 1, base);
  std::vector<double> fv(m + 1);
  for (std::size_t i = 0; i < m; ++i) pts[i + 1][i] += opts.initial_step * std::max(1.0, std::abs(base[i]));
  for (std::size_t i = 0; i <= m; ++i) fv[i] = cost(pts[i]);
  std::vector<std::size_t> order(m + 1);
  std::size_t iter = 0;
  for (;; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return fv[i] < fv[j]; });
    const Params& best = pts[order[0]];
    double spread = 0.0;
    for (std::size_t i = 1; i <= m; ++i)
      for (std::size_t d = 0; d < m; ++d) spread = std::max(spread, std::abs(pts[order[i]][d] - best[d]));
    double scale = 1.0;
    for (double v : best) scale = std::max(scale, std::abs(v));
    if (spread <= opts.xtol * scale) break;
    if (iter >= opts.max_iter) throw EstimationError("mle_numeric: iteration cap reached", best);

    const std::size_t worst = order[m];
    Params centroid(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t d = 0; d < m; ++d) centroid[d] += pts[order[i]][d] / static_cast<double>(m);
    auto along = [&](double t) {
      Params p(m);
      for (std::size_t d = 0; d < m; ++d) p[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
      return p;
    };
    const Params xr = along(-1.0);
    const double fr = cost(xr);
    if (fr < fv[order[0]]) {
      const Params xe = along(-2.0);
      const double fe = cost(xe);
      if (fe < fr) pts[worst] = xe, fv[worst] = fe;
      else pts[worst] = xr, fv[worst] = fr;
    } else if (fr < fv[order[m - 1]]) {
      pts[worst] = xr, fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const Params xc = along(outside ? -0.5 : 0.5);
      const double fc = cost(xc);
      if (fc < (outside ? fr : fv[worst])) {
        pts[worst] = xc, fv[worst] = fc;
      } else {
        for (std::size_t i = 1; i <= m; ++i) {
          auto& p = pts[order[i]];
          for (std::size_t d = 0; d < m; ++d) p[d] = best[d] + 0.5 * (p[d] - best[d]);
          fv[order[i]] = cost(p);
        }
      }
    }
  }
  return {pts[order[0]], -fv[order[0]], iter};
}

}  // namespace

MleResult mle_numeric(const Likelihood& lik, ParamView theta_init, const MleOptions& opts) {
  check_params(lik.model(), theta_init);
  if (theta_init.size() == 1) return golden(lik, theta_init[0], opts);
  return nelder_mead(lik, theta_init, opts);
}

MleResult mle_numeric(const ObservedPath& obs, ModelPtr model, ParamView theta_init, double H,
                      const MleOptions& opts) {
  Likelihood lik(obs, std::move(model), H);
  return mle_numeric(lik, theta_init, opts);
}

}  // namespace fbmlan
