#include "fbmlan/fisher.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "fbmlan/fft.hpp"
#include "fbmlan/fracops.hpp"
#include "fbmlan/special.hpp"

namespace fbmlan {

double kappa(std::size_t i, std::size_t m0, double H, std::size_t m) {
  if (i < 1 || i > m || m0 > m) throw DomainError("kappa: index out of range");
  return i <= m0 ? -0.5 : -(1.0 - H);
}

double u_integral(double H) {
  if (!(H > 0.0 && H < 0.5)) throw DomainError("u_integral: H must lie in (0, 1/2)");
  // u = 1/(1-v) gives int_0^1 v^{-1/2-H} (1-v)^{2H-1} dv.
  static thread_local boost::math::quadrature::tanh_sinh<double> ts;
  auto f = [&](double v, double vc) {
    // vc is the distance to the nearer endpoint, so 1 - v stays accurate near v = 1.
    const double one_minus = v > 0.5 ? vc : 1.0 - v;
    return std::pow(v, -0.5 - H) * std::pow(one_minus, 2.0 * H - 1.0);
  };
  double err = 0.0;
  const double val = ts.integrate(f, 0.0, 1.0, 1e-12, &err);
  if (err > 1e-9 * val) throw QuadratureError("u_integral did not converge", err);
  return val;
}

double fit_tail_constant(std::span<const double> lags, std::span<const double> c, double H) {
  const double L = lags.back();
  double sum = 0.0, sign = 0.0;
  std::size_t n = 0;
  for (std::size_t l = 0; l < lags.size(); ++l) {
    if (lags[l] < 0.1 * L || lags[l] <= 0.0 || c[l] == 0.0) continue;
    // log|c| = log C + (H - 3/2) log t with the exponent held fixed
    sum += std::log(std::abs(c[l])) - (H - 1.5) * std::log(lags[l]);
    sign += c[l];
    ++n;
  }
  if (n == 0) return 0.0;
  return std::copysign(std::exp(sum / static_cast<double>(n)), sign);
}

namespace {

void check_uniform(std::span<const double> lags) {
  if (lags.size() < 3 || lags[0] != 0.0) throw DomainError("fisher_zero_mean: lags must start at 0");
  const double h = lags[1] - lags[0];
  for (std::size_t l = 1; l < lags.size(); ++l)
    if (std::abs(lags[l] - lags[l - 1] - h) > 1e-9 * h) throw DomainError("fisher_zero_mean: lags must be uniform");
}

// Hat-function moments of r^p on a uniform grid of step h, nodes 0..n.
std::vector<double> hat_weights(double p, double h, std::size_t n) {
  std::vector<double> w(n + 1);
  const double scale = std::pow(h, p + 1.0);
  for (std::size_t m = 0; m <= n; ++m) {
    const double md = static_cast<double>(m);
    const double left = m >= 1 ? special::power_hat_moments(p, md - 1).rising : 0.0;
    const double right = m < n ? special::power_hat_moments(p, md).falling : 0.0;
    w[m] = scale * (left + right);
  }
  return w;
}

}  // namespace

ZeroMeanFisher fisher_zero_mean(const CovEstimate& cov, double H, double sigma, const ZeroMeanOptions& opts) {
  check_sigma(sigma);
  check_uniform(cov.lags);
  const std::size_t d = cov.dim;
  const std::size_t nl = cov.lags.size();
  const double h = cov.lags[1];
  const double L = cov.lags.back();
  const auto fc = make_constants(H);
  const double pre = 1.0 / (sigma * sigma * fc.bar_d_H * fc.bar_d_H);
  const double U = u_integral(H);

  const auto w2h = hat_weights(-2.0 * H, h, nl - 1);
  const auto nd = static_cast<std::size_t>(std::ceil(std::max(opts.horizon, L) / h));
  const auto wa = hat_weights(-0.5 - H, h, nd);
  const auto auto_w = fft::autocorrelation(wa);

  ZeroMeanFisher out{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d), 0.0};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      std::vector<double> c(nl);
      for (std::size_t l = 0; l < nl; ++l) c[l] = 0.5 * (cov.at(i, j, l) + cov.at(j, i, l));
      const double C = fit_tail_constant(cov.lags, c, H);

      // (ii) 2 int_0^inf c(r) r^{-2H} dr * U
      double J = 0.0;
      for (std::size_t l = 0; l < nl; ++l) J += w2h[l] * c[l];
      J += C * std::pow(L, -0.5 - H) / (0.5 + H);
      const double route2 = pre * 2.0 * J * U;

      // (i) sum_{a,b} w_a w_b c(|a-b| h) over [0, horizon]^2
      double direct = 0.0;
      for (std::size_t m = 0; m <= nd; ++m) {
        double cm;
        if (m < nl) {
          cm = c[m];
        } else {
          cm = C * std::pow(static_cast<double>(m) * h, H - 1.5);
        }
        direct += (m == 0 ? 1.0 : 2.0) * auto_w[m] * cm;
      }
      const double route1 = pre * direct;

      out.value(i, j) = out.value(j, i) = route2;
      out.direct(i, j) = out.direct(j, i) = route1;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double scale = std::sqrt(std::abs(out.value(i, i) * out.value(j, j)));
      if (scale == 0.0) continue;
      const double gap = std::abs(out.value(i, j) - out.direct(i, j)) / scale;
      out.max_rel_gap = std::max(out.max_rel_gap, gap);
    }
  }
  if (out.max_rel_gap > opts.tolerance)
    throw InconsistencyError("fisher_zero_mean: quadrature routes differ by " + std::to_string(out.max_rel_gap));
  return out;
}

Eigen::MatrixXd fisher_nonzero_mean(std::span<const double> mean_grads, double H, double sigma) {
  check_sigma(sigma);
  const auto fc = make_constants(H);
  const auto n = static_cast<Eigen::Index>(mean_grads.size());
  Eigen::Map<const Eigen::VectorXd> g(mean_grads.data(), n);
  return fc.d_prime_H / (sigma * sigma) * g * g.transpose();
}

double fou_fisher_closed(double theta) {
  if (!(theta > 0.0)) throw DomainError("fou_fisher_closed: theta must be positive");
  return 1.0 / (2.0 * theta);
}

double fou_spectral_cov(double theta, double sigma, double H, double lag) {
  if (!(theta > 0.0)) throw DomainError("fou_spectral_cov: theta must be positive");
  if (!(H > 0.0 && H < 1.0)) throw DomainError("fou_spectral_cov: H must lie in (0, 1)");
  const double p = 1.0 - 2.0 * H;
  const double t2 = theta * theta;
  auto S = [&](double x) { return std::pow(x, p) / (t2 + x * x); };
  auto S1 = [&](double x) {
    const double D = t2 + x * x, xp = std::pow(x, p);
    return p * xp / (x * D) - 2.0 * xp * x / (D * D);
  };
  auto S2 = [&](double x) {
    const double x2 = x * x, D = t2 + x2, xp = std::pow(x, p);
    return xp * (p * (p - 1) / (x2 * D) - (4 * p + 2) / (D * D) + 8 * x2 / (D * D * D));
  };
  const double e_h = std::tgamma(2 * H + 1) * std::sin(std::numbers::pi * H);
  const double pre = sigma * sigma * e_h / std::numbers::pi;
  const double delta = std::abs(lag);

  static thread_local boost::math::quadrature::tanh_sinh<double> ts;
  double err_total = 0.0, err = 0.0;
  if (delta < 1e-12) {
    const double x0 = 10.0 * theta;
    static thread_local boost::math::quadrature::exp_sinh<double> es;
    const double head = ts.integrate(S, 0.0, x0, 1e-13, &err);
    err_total += err;
    const double tail = es.integrate(S, x0, std::numeric_limits<double>::infinity(), 1e-13, &err);
    err_total += err;
    const double v = head + tail;
    if (err_total > 1e-9 * std::abs(v)) throw QuadratureError("fou_spectral_cov: no convergence", err_total);
    return pre * v;
  }

  const double half = std::numbers::pi / delta;
  const double x0 = std::max(10.0 * theta, 10.0 / delta);
  const double x1 = std::min({x0, theta, half});
  auto f = [&](double x) { return std::cos(delta * x) * S(x); };
  double head = ts.integrate(f, 0.0, x1, 1e-13, &err);
  err_total += err;
  for (double a = x1, b; a < x0; a = b) {
    b = std::min({a + half, 2.0 * a, x0});
    // Half a period of a smooth integrand away from the origin: fixed Gauss is at roundoff.
    head += boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
  }
  // Two integrations by parts; the smooth remainder goes to a double-exponential Fourier rule.
  const double ibp = -std::sin(delta * x0) * S(x0) / delta - std::cos(delta * x0) * S1(x0) / (delta * delta);
  // Rescaled so the oscillation has unit frequency; Ooura tables are then shared across lags.
  auto g = [&](double u) { return S2(u / delta + x0) / delta; };
  const double scale = std::abs(head) + std::abs(ibp) + 1e-300;
  static thread_local boost::math::quadrature::ooura_fourier_cos<double> oc(1e-10);
  static thread_local boost::math::quadrature::ooura_fourier_sin<double> os(1e-10);
  const auto [rc, ec] = oc.integrate(g, 1.0);
  const auto [rs, es] = os.integrate(g, 1.0);
  const double r = std::cos(delta * x0) * rc - std::sin(delta * x0) * rs;
  err_total += (std::abs(ec * rc) + std::abs(es * rs)) / (delta * delta);
  const double v = head + ibp - r / (delta * delta);
  if (err_total > 1e-8 * std::max(std::abs(v), 1e-12 * scale))
    throw QuadratureError("fou_spectral_cov: no convergence", err_total);
  return pre * v;
}

CovEstimate fou_cov_from_spectrum(double theta, double sigma, double H, std::span<const double> lags) {
  CovEstimate out;
  out.lags.assign(lags.begin(), lags.end());
  out.dim = 1;
  out.values.assign(1, std::vector<double>(lags.size()));
  out.se.assign(1, std::vector<double>(lags.size(), 0.0));
  for (std::size_t l = 0; l < lags.size(); ++l) out.values[0][l] = fou_spectral_cov(theta, sigma, H, lags[l]);
  return out;
}

CovEstimate estimate_cov_mc(const DriftModel& model, ParamView th, double sigma, double H,
                            std::span<const double> lags, std::size_t reps, Seed seed, const CovMcOptions& opts) {
  if (reps < 2) throw DomainError("estimate_cov_mc: need at least two replications");
  check_params(model, th);
  const double dt = opts.dt;
  const std::size_t d = model.param_dim();
  std::vector<std::size_t> lag_idx(lags.size());
  std::size_t max_lag = 0;
  for (std::size_t l = 0; l < lags.size(); ++l) {
    const double x = lags[l] / dt;
    if (lags[l] < 0.0 || std::abs(x - std::round(x)) > 1e-8) throw DomainError("lags must be multiples of dt");
    lag_idx[l] = static_cast<std::size_t>(std::round(x));
    max_lag = std::max(max_lag, lag_idx[l]);
  }
  const auto n_win = static_cast<std::size_t>(std::round(opts.window / dt));
  const Grid grid(0.0, dt, n_win + max_lag + 1);
  const double burnin = opts.burnin > 0.0 ? opts.burnin : default_burnin(model, th);

  // Per-replication raw sums; centering happens after the pooled mean is known.
  struct Rep {
    std::vector<double> mean;           // d
    std::vector<double> cross, ahead;   // (d*d) x lags, d x lags
    std::vector<double> behind;         // d
  };
  std::vector<Rep> per(reps);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < reps; ++r) {
    const auto path = stationary_burnin(model, th, sigma, H, grid, burnin, Seed{seed.master, seed.stream + r});
    const std::size_t n = path.values.size();
    std::vector<double> f(d * n), g(d);
    for (std::size_t k = 0; k < n; ++k) {
      model.drift_dtheta(path.values[k], th, g);
      for (std::size_t i = 0; i < d; ++i) f[i * n + k] = g[i];
    }
    Rep& rep = per[r];
    rep.mean.assign(d, 0.0);
    rep.behind.assign(d, 0.0);
    rep.cross.assign(d * d * lags.size(), 0.0);
    rep.ahead.assign(d * lags.size(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < n; ++k) rep.mean[i] += f[i * n + k];
      rep.mean[i] /= static_cast<double>(n);
      for (std::size_t t = 0; t < n_win; ++t) rep.behind[i] += f[i * n + t];
    }
    for (std::size_t l = 0; l < lags.size(); ++l) {
      const std::size_t s = lag_idx[l];
      for (std::size_t i = 0; i < d; ++i) {
        double a = 0.0;
        for (std::size_t t = 0; t < n_win; ++t) a += f[i * n + t + s];
        rep.ahead[i * lags.size() + l] = a;
        for (std::size_t j = 0; j < d; ++j) {
          double sum = 0.0;
          for (std::size_t t = 0; t < n_win; ++t) sum += f[i * n + t + s] * f[j * n + t];
          rep.cross[(i * d + j) * lags.size() + l] = sum;
        }
      }
    }
  }

  std::vector<double> mu(d, 0.0);
  for (const auto& rep : per)
    for (std::size_t i = 0; i < d; ++i) mu[i] += rep.mean[i] / static_cast<double>(reps);

  CovEstimate out;
  out.lags.assign(lags.begin(), lags.end());
  out.dim = d;
  out.replications = reps;
  out.values.assign(d * d, std::vector<double>(lags.size(), 0.0));
  out.se.assign(d * d, std::vector<double>(lags.size(), 0.0));
  const double nw = static_cast<double>(n_win);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t l = 0; l < lags.size(); ++l) {
        double s1 = 0.0, s2 = 0.0;
        for (const auto& rep : per) {
          const double c = (rep.cross[(i * d + j) * lags.size() + l] - mu[i] * rep.behind[j] -
                            mu[j] * rep.ahead[i * lags.size() + l]) / nw + mu[i] * mu[j];
          s1 += c;
          s2 += c * c;
        }
        const double R = static_cast<double>(reps);
        const double mean = s1 / R;
        const double var = std::max(0.0, (s2 - R * mean * mean) / (R - 1.0));
        out.values[i * d + j][l] = mean;
        out.se[i * d + j][l] = std::sqrt(var / R);
      }
    }
  }
  return out;
}

FisherMatrix assemble_fisher(const Eigen::MatrixXd& zero_block, const Eigen::MatrixXd& nonzero_block,
                             std::size_t m0) {
  if (zero_block.rows() != zero_block.cols() || nonzero_block.rows() != nonzero_block.cols())
    throw DomainError("assemble_fisher: blocks must be square");
  if (static_cast<std::size_t>(zero_block.rows()) != m0) throw DomainError("assemble_fisher: zero block is not m0 x m0");
  const auto m = zero_block.rows() + nonzero_block.rows();
  FisherMatrix out{Eigen::MatrixXd::Zero(m, m), m0};
  out.I.topLeftCorner(zero_block.rows(), zero_block.rows()) = zero_block;
  out.I.bottomRightCorner(nonzero_block.rows(), nonzero_block.rows()) = nonzero_block;
  out.I = 0.5 * (out.I + out.I.transpose()).eval();
  return out;
}

}  // namespace fbmlan
