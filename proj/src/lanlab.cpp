#include "fbmlan/lanlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "fbmlan/fft.hpp"
#include "fbmlan/fracops.hpp"
#include "fbmlan/likelihood.hpp"
#include "fbmlan/special.hpp"
#include "fbmlan/stats.hpp"

namespace fbmlan {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double burnin_for(const DriftModel& model, ParamView th, double requested) {
  if (requested > 0.0) return requested;
  return model.contraction_rate(th) > 0.0 ? default_burnin(model, th) : 40.0;
}

struct Setup {
  ModelPtr model;
  FisherTarget target;
  std::vector<double> kappa;
  Grid grid;
  double burnin = 0.0;
};

Setup make_setup(const ExperimentConfig& cfg, double T) {
  Setup s;
  s.model = make_model(cfg.model);
  check_params(*s.model, cfg.theta);
  FisherOptions fo;
  fo.dt = cfg.dt;
  fo.reps = cfg.fisher_reps;
  fo.max_lag = cfg.fisher_max_lag;
  fo.seed = Seed{cfg.seed ^ 0x9e3779b97f4a7c15ULL, 0};
  s.target = fisher_compute(*s.model, cfg.theta, cfg.sigma, cfg.H, fo);
  const std::size_t m = s.model->param_dim();
  for (std::size_t i = 1; i <= m; ++i) s.kappa.push_back(kappa(i, s.target.fisher.m0, cfg.H, m));
  s.grid = Grid::span(T, cfg.dt);
  s.burnin = burnin_for(*s.model, cfg.theta, cfg.burnin);
  return s;
}

void fill_target(LanReport& r, const Setup& s) {
  const auto& I = s.target.fisher.I;
  r.m0 = s.target.fisher.m0;
  r.kappa = s.kappa;
  r.fisher_method = s.target.method;
  r.fisher.clear();
  for (Eigen::Index i = 0; i < I.rows(); ++i)
    for (Eigen::Index j = 0; j < I.cols(); ++j) r.fisher.push_back(I(i, j));
}

ComponentSummary summarize(std::span<const double> x, double target_var) {
  ComponentSummary c;
  c.target_variance = target_var;
  c.mean = x.empty() ? 0.0 : stats::mean(x);
  c.variance_defined = x.size() >= 2;
  c.variance = c.variance_defined ? stats::variance(x) : 0.0;
  if (!x.empty() && target_var > 0.0) {
    const auto ks = stats::ks_normal(x, 0.0, target_var);
    c.ks_statistic = ks.statistic;
    c.ks_p = ks.p_value;
  }
  return c;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t i) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[i]);
  return out;
}

void enforce_exclusions(const LanReport& r) {
  if (r.excluded * 20 > r.replications)
    throw ExperimentError("experiment: " + std::to_string(r.excluded) + " of " + std::to_string(r.replications) +
                          " replications failed (limit 5%); first: " + r.failures.front().message);
}

// Runs body(rep, result_slot) in parallel; exceptions become Failures.
template <class Result, class Body>
void for_replications(std::size_t n, Body body, std::vector<std::optional<Result>>& out,
                      std::vector<std::string>& errors) {
  out.assign(n, std::nullopt);
  errors.assign(n, {});
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < n; ++r) {
    try {
      out[r] = body(r);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
}

StatePath simulate(const Setup& s, const ExperimentConfig& cfg, Seed seed) {
  return stationary_burnin(*s.model, cfg.theta, cfg.sigma, cfg.H, s.grid, s.burnin, seed);
}

Params estimate(const ExperimentConfig& cfg, const Setup& s, const ObservedPath& obs) {
  const auto aff = s.model->affine();
  if (cfg.estimator == "auto" && aff) return {mle_linear(obs, aff->basis, cfg.H, aff->offset)};
  return mle_numeric(obs, s.model, cfg.theta, cfg.H).theta;
}

LanReport mle_core(const ExperimentConfig& cfg, double T, std::uint64_t stream_base, const Setup& s) {
  LanReport r;
  r.config = cfg;
  r.replications = cfg.replications;
  fill_target(r, s);
  const std::size_t m = s.model->param_dim();

  std::vector<std::optional<Params>> est;
  std::vector<std::string> err;
  for_replications<Params>(
      cfg.replications,
      [&](std::size_t rep) {
        const auto path = simulate(s, cfg, Seed{cfg.seed, stream_base + rep});
        auto th = estimate(cfg, s, observe(path));
        for (double v : th)
          if (!std::isfinite(v)) throw EstimationError("non-finite estimate");
        return th;
      },
      est, err);

  const bool cheap_plugin = m == 1 && (s.target.method == "closed" || s.target.method == "nonzero-mean");
  for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
    if (!est[rep]) {
      r.failures.push_back({rep, err[rep]});
      continue;
    }
    const Params& th = *est[rep];
    std::vector<double> z(m);
    for (std::size_t i = 0; i < m; ++i) z[i] = std::pow(T, -s.kappa[i]) * (th[i] - cfg.theta[i]);
    r.rep_index.push_back(rep);
    r.theta_hat.push_back(th);
    if (cheap_plugin) {
      double p = std::numeric_limits<double>::quiet_NaN();
      if (s.model->admissible(th)) {
        const auto t = fisher_compute(*s.model, th, cfg.sigma, cfg.H);
        p = z[0] * std::sqrt(t.fisher.I(0, 0));
      }
      r.plugin.push_back({p});
    }
    r.normalized.push_back(std::move(z));
  }
  r.included = r.rep_index.size();
  r.excluded = r.failures.size();
  return r;
}

void mle_checks(LanReport& r) {
  const std::size_t m = r.kappa.size();
  Eigen::MatrixXd I(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) I(i, j) = r.fisher[i * m + j];
  Eigen::MatrixXd inv = I.determinant() != 0.0 ? Eigen::MatrixXd(I.inverse()) : Eigen::MatrixXd::Zero(m, m);
  r.summary.clear();
  for (std::size_t i = 0; i < m; ++i) {
    const auto col = column(r.normalized, i);
    r.summary.push_back(summarize(col, inv(i, i)));
    const auto& c = r.summary.back();
    const std::string tag = "theta" + std::to_string(i + 1);
    if (!c.variance_defined) {
      r.checks.push_back({"variance_" + tag, false, "variance undefined for fewer than two replications"});
    } else {
      const double rel = c.variance / c.target_variance - 1.0;
      r.checks.push_back({"variance_" + tag, std::abs(rel) <= r.config.var_tolerance,
                          "var " + fmt(c.variance) + " target " + fmt(c.target_variance) + " rel " + fmt(rel)});
    }
    r.checks.push_back({"ks_" + tag, c.ks_p > r.config.ks_alpha, "D " + fmt(c.ks_statistic) + " p " + fmt(c.ks_p)});
  }
}

std::vector<std::vector<double>> dbeta_values(const DriftModel& model, ParamView th, double sigma, double H,
                                              const StatePath& path) {
  const auto db = dbeta_process(model, th, sigma, H, path.grid, path.values);
  std::vector<std::vector<double>> out;
  for (const auto& b : db) out.push_back(b.values);
  return out;
}

}  // namespace

bool is_lan_kind(const std::string& kind) { return kind == "mle" || kind == "score" || kind == "rate"; }

void validate(const ExperimentConfig& cfg) {
  static const char* kinds[] = {"mle", "quadratic", "score", "decay", "rate"};
  if (std::find(std::begin(kinds), std::end(kinds), cfg.kind) == std::end(kinds))
    throw DomainError("experiment.kind: unknown kind '" + cfg.kind + "'");
  const auto model = make_model(cfg.model);
  if (cfg.theta.size() != model->param_dim())
    throw DomainError("model.theta: expected " + std::to_string(model->param_dim()) + " values");
  check_params(*model, cfg.theta);
  if (cfg.sigma == 0.0 || !std::isfinite(cfg.sigma)) throw DomainError("model.sigma: must be finite and nonzero");
  if (!(cfg.H > 0.0 && cfg.H < 0.5)) throw DomainError("model.H: must lie in (0, 1/2)");
  if ((is_lan_kind(cfg.kind) || cfg.kind == "quadratic") && !(cfg.H > 0.25 && cfg.H < 0.5))
    throw DomainError("model.H: LAN verification assumes H in (1/4, 1/2), got " + fmt(cfg.H));
  if (!(cfg.dt > 0.0)) throw DomainError("grid.dt: must be positive");
  auto multiple = [&](double T) {
    const double k = T / cfg.dt;
    return T > 0.0 && std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, k);
  };
  if (!multiple(cfg.T)) throw DomainError("grid.T: must be a positive multiple of dt");
  if (cfg.kind == "rate") {
    if (cfg.horizons.size() < 2) throw DomainError("experiment.horizons: need at least two values");
    for (double T : cfg.horizons)
      if (!multiple(T)) throw DomainError("experiment.horizons: each must be a positive multiple of dt");
  }
  if (cfg.burnin < 0.0) throw DomainError("grid.burnin: must be >= 0");
  if (cfg.replications < 1) throw DomainError("experiment.replications: must be >= 1");
  if (cfg.estimator != "auto" && cfg.estimator != "numeric")
    throw DomainError("experiment.estimator: expected auto or numeric");
  if (model->exempt_from_dissipativity() && (cfg.kind == "mle" || cfg.kind == "rate"))
    throw DomainError("model: the zero-drift stub cannot be estimated");
  if (cfg.cov_source != "auto" && cfg.cov_source != "spectral" && cfg.cov_source != "mc")
    throw DomainError("decay.cov_source: expected auto, spectral or mc");
  if (cfg.kind == "decay") {
    if (!(cfg.lag_step > 0.0) || !(cfg.lag_max > cfg.lag_min) || !(cfg.lag_min >= 0.0))
      throw DomainError("decay: need 0 <= lag_min < lag_max and lag_step > 0");
    const double k = cfg.lag_step / cfg.dt;
    if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k))
      throw DomainError("decay.lag_step: must be a multiple of dt");
  }
}

FisherTarget fisher_compute(const DriftModel& model, ParamView th, double sigma, double H, const FisherOptions& opts) {
  check_params(model, th);
  check_sigma(sigma);
  const std::size_t m = model.param_dim();
  FisherTarget t;
  if (model.exempt_from_dissipativity()) {
    t.method = "stub";
    t.mean_grads.assign(m, 0.0);
    t.fisher = assemble_fisher(Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(0, 0), m);
    return t;
  }
  auto lags_upto = [&](double L) {
    std::vector<double> lags;
    const auto n = static_cast<std::size_t>(std::llround(L / opts.dt));
    for (std::size_t l = 0; l <= n; ++l) lags.push_back(static_cast<double>(l) * opts.dt);
    return lags;
  };
  CovMcOptions co;
  co.dt = opts.dt;
  co.window = opts.window;

  double tol = 0.0;
  if (auto g = model.stationary_mean_grad(th)) {
    t.mean_grads = *g;
  } else {
    // Pooled time average over stationary paths, spread across replications for the SE.
    const Grid grid = Grid::span(opts.window, opts.dt);
    const std::size_t reps = std::max<std::size_t>(opts.reps, 2);
    std::vector<std::vector<double>> means(reps, std::vector<double>(m, 0.0));
    const double S = burnin_for(model, th, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t r = 0; r < reps; ++r) {
      const auto p = stationary_burnin(model, th, sigma, H, grid, S, Seed{opts.seed.master, opts.seed.stream + r});
      std::vector<double> g(m);
      for (double x : p.values) {
        model.drift_dtheta(x, th, g);
        for (std::size_t i = 0; i < m; ++i) means[r][i] += g[i] / static_cast<double>(p.values.size());
      }
    }
    t.mean_grads.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto col = column(means, i);
      t.mean_grads[i] = stats::mean(col);
      tol = std::max(tol, 3.0 * std::sqrt(stats::variance(col) / static_cast<double>(reps)));
    }
  }
  const std::size_t m0 = zero_mean_count(t.mean_grads, tol);
  std::string method = opts.method;
  if (method == "auto") method = (model.name() == "fou") ? "closed" : (m0 == 0 ? "nonzero-mean" : "mc");

  Eigen::MatrixXd zero_block = Eigen::MatrixXd::Zero(m0, m0);
  if (m0 > 0) {
    if (method == "closed") {
      if (model.name() != "fou") throw DomainError("fisher: closed form is available for fou only");
      zero_block(0, 0) = fou_fisher_closed(th[0]);
    } else if (method == "spectral") {
      if (model.name() != "fou") throw DomainError("fisher: spectral covariance is available for fou only");
      const auto lags = lags_upto(opts.max_lag);
      const auto z = fisher_zero_mean(fou_cov_from_spectrum(th[0], sigma, H, lags), H, sigma);
      zero_block = z.value;
      t.route_gap = z.max_rel_gap;
    } else if (method == "mc") {
      const auto lags = lags_upto(opts.max_lag);
      const auto full = estimate_cov_mc(model, th, sigma, H, lags, opts.reps, opts.seed, co);
      CovEstimate sub;
      sub.lags = full.lags;
      sub.dim = m0;
      sub.replications = full.replications;
      for (std::size_t i = 0; i < m0; ++i)
        for (std::size_t j = 0; j < m0; ++j) {
          sub.values.push_back(full.values[i * m + j]);
          sub.se.push_back(full.se[i * m + j]);
        }
      const auto z = fisher_zero_mean(sub, H, sigma);
      zero_block = z.value;
      t.route_gap = z.max_rel_gap;
    } else if (method != "nonzero-mean") {
      throw DomainError("fisher: unknown method '" + method + "'");
    }
  }
  const std::span<const double> g(t.mean_grads);
  const Eigen::MatrixXd nonzero =
      m0 < m ? fisher_nonzero_mean(g.subspan(m0), H, sigma) : Eigen::MatrixXd::Zero(0, 0);
  t.fisher = assemble_fisher(zero_block, nonzero, m0);
  t.method = m0 == 0 ? "nonzero-mean" : method;
  return t;
}

bool LanReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

LanReport run_mle_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  const auto s = make_setup(cfg, cfg.T);
  LanReport r = mle_core(cfg, cfg.T, 0, s);
  enforce_exclusions(r);
  mle_checks(r);
  r.runtime_seconds = seconds_since(t0);
  return r;
}

LanReport run_rate_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  LanReport r;
  r.config = cfg;
  RateSummary rate;
  rate.horizons = cfg.horizons;
  std::size_t m = 0;
  for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
    const double T = cfg.horizons[h];
    const auto s = make_setup(cfg, T);
    m = s.model->param_dim();
    if (h == 0) {
      fill_target(r, s);
      rate.expected = s.kappa;
    }
    // Disjoint streams per horizon.
    auto part = mle_core(cfg, T, (static_cast<std::uint64_t>(h) + 1) << 32, s);
    r.replications += part.replications;
    r.included += part.included;
    r.excluded += part.excluded;
    for (auto& f : part.failures) r.failures.push_back(std::move(f));
    std::vector<double> med(m);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> a;
      for (const auto& th : part.theta_hat) a.push_back(std::abs(th[i] - cfg.theta[i]));
      med[i] = stats::median(a);
    }
    rate.medians.push_back(med);
  }
  enforce_exclusions(r);
  for (std::size_t i = 0; i < m; ++i) {
    const auto f = stats::fit_loglog(rate.horizons, column(rate.medians, i));
    rate.slopes.push_back(f.slope);
    rate.slope_se.push_back(f.slope_se);
    r.checks.push_back({"rate_theta" + std::to_string(i + 1),
                        std::abs(f.slope - rate.expected[i]) <= cfg.slope_tolerance,
                        "slope " + fmt(f.slope) + " expected " + fmt(rate.expected[i])});
  }
  r.rate = std::move(rate);
  r.runtime_seconds = seconds_since(t0);
  return r;
}

LanReport verify_quadratic_term(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  const auto s = make_setup(cfg, cfg.T);
  const std::size_t m = s.model->param_dim();
  LanReport r;
  r.config = cfg;
  r.replications = cfg.replications;
  fill_target(r, s);
  const double T = cfg.T, dt = cfg.dt;

  std::vector<std::optional<std::vector<double>>> res;
  std::vector<std::string> err;
  for_replications<std::vector<double>>(
      cfg.replications,
      [&](std::size_t rep) {
        const auto path = simulate(s, cfg, Seed{cfg.seed, rep});
        const auto db = dbeta_values(*s.model, cfg.theta, cfg.sigma, cfg.H, path);
        std::vector<double> q(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = i; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k + 1 < db[i].size(); ++k)
              acc += 0.5 * dt * (db[i][k] * db[j][k] + db[i][k + 1] * db[j][k + 1]);
            q[i * m + j] = q[j * m + i] = std::pow(T, s.kappa[i] + s.kappa[j]) * acc;
          }
        return q;
      },
      res, err);

  QuadraticSummary qs;
  for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
    if (!res[rep]) {
      r.failures.push_back({rep, err[rep]});
      continue;
    }
    r.rep_index.push_back(rep);
    qs.samples.push_back(*res[rep]);
  }
  r.included = r.rep_index.size();
  r.excluded = r.failures.size();
  enforce_exclusions(r);
  qs.target = r.fisher;
  for (std::size_t e = 0; e < m * m; ++e) {
    const auto col = column(qs.samples, e);
    qs.mean.push_back(stats::mean(col));
    qs.sd.push_back(col.size() >= 2 ? std::sqrt(stats::variance(col)) : 0.0);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t e = i * m + i;
    r.checks.push_back({"quadratic_theta" + std::to_string(i + 1),
                        std::abs(qs.mean[e] - qs.target[e]) <= cfg.quad_tolerance,
                        "mean " + fmt(qs.mean[e]) + " target " + fmt(qs.target[e]) + " sd " + fmt(qs.sd[e])});
  }
  r.quadratic = std::move(qs);
  r.runtime_seconds = seconds_since(t0);
  return r;
}

LanReport verify_score_clt(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  const auto s = make_setup(cfg, cfg.T);
  const std::size_t m = s.model->param_dim();
  LanReport r;
  r.config = cfg;
  r.replications = cfg.replications;
  fill_target(r, s);

  std::vector<std::optional<std::vector<double>>> res;
  std::vector<std::string> err;
  for_replications<std::vector<double>>(
      cfg.replications,
      [&](std::size_t rep) {
        const auto path = simulate(s, cfg, Seed{cfg.seed, rep});
        const Likelihood lik(observe(path), s.model, cfg.H);
        const auto dw = lik.innovation_increments(cfg.theta);
        const auto db = dbeta_values(*s.model, cfg.theta, cfg.sigma, cfg.H, path);
        std::vector<double> score(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t k = 0; k < dw.size(); ++k) score[i] += db[i][k] * dw[k];
          score[i] *= std::pow(cfg.T, s.kappa[i]);
        }
        return score;
      },
      res, err);

  ScoreSummary sc;
  for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
    if (!res[rep]) {
      r.failures.push_back({rep, err[rep]});
      continue;
    }
    r.rep_index.push_back(rep);
    sc.samples.push_back(*res[rep]);
  }
  r.included = r.rep_index.size();
  r.excluded = r.failures.size();
  enforce_exclusions(r);
  const double n = static_cast<double>(r.included);
  for (std::size_t i = 0; i < m; ++i) {
    const double Iii = r.fisher[i * m + i];
    sc.summary.push_back(summarize(column(sc.samples, i), Iii));
    const auto& c = sc.summary.back();
    const std::string tag = "theta" + std::to_string(i + 1);
    r.checks.push_back({"score_ks_" + tag, c.ks_p > cfg.ks_alpha, "D " + fmt(c.ks_statistic) + " p " + fmt(c.ks_p)});
    r.checks.push_back({"score_mean_" + tag, std::abs(c.mean) <= 3.0 * std::sqrt(Iii / n),
                        "mean " + fmt(c.mean) + " bound " + fmt(3.0 * std::sqrt(Iii / n))});
    const double rel = c.variance_defined ? c.variance / Iii - 1.0 : std::numeric_limits<double>::infinity();
    r.checks.push_back({"score_variance_" + tag, std::abs(rel) <= cfg.var_tolerance,
                        "var " + fmt(c.variance) + " target " + fmt(Iii)});
  }
  r.score = std::move(sc);
  r.runtime_seconds = seconds_since(t0);
  return r;
}

DecaySummary verify_cov_decay(const CovEstimate& cov, double H, std::size_t i, std::size_t j, double lag_lo,
                              double lag_hi, double slack) {
  DecaySummary d;
  d.bound = H - 1.5 + slack;
  // Fit the longest contiguous same-sign run of significant lags. Isolated
  // 3 SE exceedances past the noise floor are selected on |c| and flatten the slope.
  std::vector<double> x, y, run_x, run_y;
  auto close_run = [&] {
    if (run_x.size() > x.size()) x = run_x, y = run_y;
    run_x.clear();
    run_y.clear();
  };
  for (std::size_t l = 0; l < cov.lags.size(); ++l) {
    const double t = cov.lags[l];
    if (t <= 0.0 || t < lag_lo || t > lag_hi) continue;
    const double c = cov.at(i, j, l);
    const double se = cov.se.empty() ? 0.0 : cov.se_at(i, j, l);
    if (!(std::isfinite(c) && std::abs(c) > 3.0 * se && c != 0.0) ||
        (!run_y.empty() && (c > 0.0) != (run_y.back() > 0.0))) {
      close_run();
      if (!(std::isfinite(c) && std::abs(c) > 3.0 * se && c != 0.0)) continue;
    }
    run_x.push_back(t);
    run_y.push_back(c);
  }
  close_run();
  d.points = x.size();
  if (x.size() < 3 || x.back() < 10.0 * x.front()) {
    d.status = "inconclusive";
    d.reason = std::to_string(x.size()) + " contiguous same-sign lags with |c| > 3 SE" +
               (x.empty() ? std::string() : ", spanning " + fmt(x.front()) + ".." + fmt(x.back())) +
               "; a fit needs one decade";
    if (!x.empty()) d.lag_lo = x.front(), d.lag_hi = x.back();
    return d;
  }
  d.lag_lo = x.front();
  d.lag_hi = x.back();
  const auto f = stats::fit_loglog(x, y);
  d.slope = f.slope;
  d.slope_se = f.slope_se;
  d.status = f.slope <= d.bound ? "pass" : "fail";
  d.reason = "slope " + fmt(f.slope) + " vs bound " + fmt(d.bound);
  return d;
}

LanReport run_decay_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = Clock::now();
  const auto model = make_model(cfg.model);
  LanReport r;
  r.config = cfg;
  std::vector<double> lags;
  const auto n = static_cast<std::size_t>(std::llround(cfg.lag_max / cfg.lag_step));
  for (std::size_t l = 0; l <= n; ++l) lags.push_back(static_cast<double>(l) * cfg.lag_step);

  std::string source = cfg.cov_source;
  if (source == "auto") source = model->name() == "fou" ? "spectral" : "mc";
  CovEstimate cov;
  if (source == "spectral") {
    if (model->name() != "fou") throw DomainError("decay.cov_source: spectral is available for fou only");
    cov = fou_cov_from_spectrum(cfg.theta[0], cfg.sigma, cfg.H, lags);
  } else {
    CovMcOptions co;
    co.dt = cfg.dt;
    co.window = cfg.cov_window;
    co.burnin = burnin_for(*model, cfg.theta, cfg.burnin);
    cov = estimate_cov_mc(*model, cfg.theta, cfg.sigma, cfg.H, lags, cfg.replications, Seed{cfg.seed, 0}, co);
  }
  r.replications = source == "mc" ? cfg.replications : 0;
  r.included = r.replications;
  for (std::size_t i = 0; i < cov.dim; ++i) {
    auto d = verify_cov_decay(cov, cfg.H, i, i, cfg.lag_min, cfg.lag_max, cfg.decay_slack);
    r.checks.push_back({"decay_theta" + std::to_string(i + 1), d.status != "fail", d.status + ": " + d.reason});
    r.decay.push_back(std::move(d));
  }
  r.runtime_seconds = seconds_since(t0);
  return r;
}

LanReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind == "mle") return run_mle_experiment(cfg);
  if (cfg.kind == "quadratic") return verify_quadratic_term(cfg);
  if (cfg.kind == "score") return verify_score_clt(cfg);
  if (cfg.kind == "rate") return run_rate_experiment(cfg);
  if (cfg.kind == "decay") return run_decay_experiment(cfg);
  throw DomainError("experiment.kind: unknown kind '" + cfg.kind + "'");
}

std::vector<double> riemann_liouville_left(std::span<const double> f, double dt, double H) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  const double a = -0.5 - H, p = a + 2.0, norm = 1.0 / ((a + 1.0) * (a + 2.0));
  // Weight of an interior hat at distance m from the target node.
  std::vector<double> w(n);
  w[0] = norm;
  w[1] = (std::pow(2.0, p) - 2.0) * norm;
  for (std::size_t m = 2; m < n; ++m) {
    const double x = 1.0 / static_cast<double>(m);
    w[m] = std::pow(static_cast<double>(m), p) * norm *
           (std::expm1(p * std::log1p(x)) + std::expm1(p * std::log1p(-x)));
  }
  std::vector<double> g(f.begin(), f.end());
  g[0] = 0.0;
  const auto body = fft::CausalConvolver(w).apply(g);
  const double scale = std::pow(dt, a + 1.0);
  for (std::size_t k = 1; k < n; ++k) {
    // Half hat at s = 0: int_{k-1}^{k} u^a (u - k + 1) du.
    const double K = static_cast<double>(k);
    double edge;
    if (k == 1) {
      edge = 1.0 / (a + 2.0);
    } else {
      const double x = 1.0 / K;
      const double dp = -std::pow(K, p) * std::expm1(p * std::log1p(-x));       // k^p - (k-1)^p
      const double d1 = -std::pow(K, a + 1) * std::expm1((a + 1) * std::log1p(-x));  // k^{a+1} - (k-1)^{a+1}
      edge = dp / (a + 2.0) - (K - 1.0) * d1 / (a + 1.0);
    }
    out[k] = scale * (body[k] + edge * f[0]);
  }
  return out;
}

GammaParts gamma_decompose(const DriftModel& model, ParamView th, double H, const StatePath& path,
                           ParamView mean_grads) {
  const std::size_t m = model.param_dim();
  if (mean_grads.size() != m) throw DomainError("gamma_decompose: mean gradient has the wrong size");
  const auto& grid = path.grid;
  if (grid.t_start() != 0.0) throw DomainError("gamma_decompose: path must start at t = 0");
  const std::size_t n = path.values.size();
  const auto fc = make_constants(H);
  const double pre = 1.0 / (fc.bar_d_H * path.sigma);
  const double mass = special::beta(1.5 - H, 0.5 - H);

  GammaParts out;
  out.dbeta = dbeta_values(model, th, path.sigma, H, path);
  std::vector<double> g(m);
  std::vector<std::vector<double>> centered(m, std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    model.drift_dtheta(path.values[k], th, g);
    for (std::size_t i = 0; i < m; ++i) centered[i][k] = g[i] - mean_grads[i];
  }
  double gap = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> g1(n), g2(n), g3(n);
    for (std::size_t k = 0; k < n; ++k) g1[k] = pre * mean_grads[i] * mass * std::pow(grid.t(k), 0.5 - H);
    const auto rl = riemann_liouville_left(centered[i], grid.dt(), H);
    const auto bc = beta_from_drift(centered[i], grid, path.sigma, H).values;
    double scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      g2[k] = pre * rl[k];
      g3[k] = bc[k] - g2[k];
      scale = std::max(scale, std::abs(out.dbeta[i][k]));
    }
    for (std::size_t k = 0; k < n; ++k)
      gap = std::max(gap, std::abs(g1[k] + g2[k] + g3[k] - out.dbeta[i][k]) / std::max(scale, 1e-300));
    out.g1.push_back(std::move(g1));
    out.g2.push_back(std::move(g2));
    out.g3.push_back(std::move(g3));
  }
  out.max_rel_gap = gap;
  return out;
}

// ---- persistence ----

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double get_num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json nums(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
std::vector<double> get_nums(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(get_num(x));
  return v;
}
json rows(const std::vector<std::vector<double>>& r) {
  json a = json::array();
  for (const auto& x : r) a.push_back(nums(x));
  return a;
}
std::vector<std::vector<double>> get_rows(const json& j) {
  std::vector<std::vector<double>> r;
  for (const auto& x : j) r.push_back(get_nums(x));
  return r;
}

json to_json(const ExperimentConfig& c) {
  return json{{"kind", c.kind},
              {"model", c.model},
              {"theta", nums(c.theta)},
              {"sigma", c.sigma},
              {"H", c.H},
              {"T", c.T},
              {"dt", c.dt},
              {"burnin", c.burnin},
              {"replications", c.replications},
              {"seed", c.seed},
              {"estimator", c.estimator},
              {"horizons", nums(c.horizons)},
              {"var_tolerance", c.var_tolerance},
              {"ks_alpha", c.ks_alpha},
              {"quad_tolerance", c.quad_tolerance},
              {"slope_tolerance", c.slope_tolerance},
              {"cov_source", c.cov_source},
              {"lag_min", c.lag_min},
              {"lag_max", c.lag_max},
              {"lag_step", c.lag_step},
              {"cov_window", c.cov_window},
              {"decay_slack", c.decay_slack},
              {"fisher_reps", c.fisher_reps},
              {"fisher_max_lag", c.fisher_max_lag}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.kind = j.at("kind");
  c.model = j.at("model");
  c.theta = get_nums(j.at("theta"));
  c.sigma = j.at("sigma");
  c.H = j.at("H");
  c.T = j.at("T");
  c.dt = j.at("dt");
  c.burnin = j.at("burnin");
  c.replications = j.at("replications");
  c.seed = j.at("seed");
  c.estimator = j.at("estimator");
  c.horizons = get_nums(j.at("horizons"));
  c.var_tolerance = j.at("var_tolerance");
  c.ks_alpha = j.at("ks_alpha");
  c.quad_tolerance = j.at("quad_tolerance");
  c.slope_tolerance = j.at("slope_tolerance");
  c.cov_source = j.at("cov_source");
  c.lag_min = j.at("lag_min");
  c.lag_max = j.at("lag_max");
  c.lag_step = j.at("lag_step");
  c.cov_window = j.at("cov_window");
  c.decay_slack = j.at("decay_slack");
  c.fisher_reps = j.at("fisher_reps");
  c.fisher_max_lag = j.at("fisher_max_lag");
  return c;
}

json to_json(const ComponentSummary& c) {
  return json{{"mean", num(c.mean)},
              {"variance", c.variance_defined ? num(c.variance) : json(nullptr)},
              {"variance_defined", c.variance_defined},
              {"target_variance", num(c.target_variance)},
              {"ks_statistic", num(c.ks_statistic)},
              {"ks_p", num(c.ks_p)}};
}

ComponentSummary summary_from_json(const json& j) {
  ComponentSummary c;
  c.mean = get_num(j.at("mean"));
  c.variance_defined = j.at("variance_defined");
  c.variance = c.variance_defined ? get_num(j.at("variance")) : 0.0;
  c.target_variance = get_num(j.at("target_variance"));
  c.ks_statistic = get_num(j.at("ks_statistic"));
  c.ks_p = get_num(j.at("ks_p"));
  return c;
}

json summaries(const std::vector<ComponentSummary>& v) {
  json a = json::array();
  for (const auto& c : v) a.push_back(to_json(c));
  return a;
}
std::vector<ComponentSummary> get_summaries(const json& j) {
  std::vector<ComponentSummary> v;
  for (const auto& x : j) v.push_back(summary_from_json(x));
  return v;
}

}  // namespace

std::string report_to_json(const LanReport& r) {
  json j;
  j["schema"] = r.schema;
  j["config"] = to_json(r.config);
  j["seed"] = r.config.seed;
  j["replications"] = r.replications;
  j["included"] = r.included;
  j["excluded"] = r.excluded;
  json fails = json::array();
  for (const auto& f : r.failures) fails.push_back({{"replication", f.replication}, {"message", f.message}});
  j["failures"] = fails;
  j["rep_index"] = r.rep_index;
  j["theta_hat"] = rows(r.theta_hat);
  j["normalized"] = rows(r.normalized);
  j["plugin"] = rows(r.plugin);
  j["summary"] = summaries(r.summary);
  j["m0"] = r.m0;
  j["kappa"] = nums(r.kappa);
  j["fisher"] = nums(r.fisher);
  j["fisher_method"] = r.fisher_method;
  if (r.quadratic)
    j["quadratic"] = {{"samples", rows(r.quadratic->samples)},
                      {"mean", nums(r.quadratic->mean)},
                      {"sd", nums(r.quadratic->sd)},
                      {"target", nums(r.quadratic->target)}};
  if (r.score) j["score"] = {{"samples", rows(r.score->samples)}, {"summary", summaries(r.score->summary)}};
  json dec = json::array();
  for (const auto& d : r.decay)
    dec.push_back({{"status", d.status},
                   {"slope", num(d.slope)},
                   {"slope_se", num(d.slope_se)},
                   {"bound", num(d.bound)},
                   {"points", d.points},
                   {"lag_lo", num(d.lag_lo)},
                   {"lag_hi", num(d.lag_hi)},
                   {"reason", d.reason}});
  j["decay"] = dec;
  if (r.rate)
    j["rate"] = {{"horizons", nums(r.rate->horizons)},
                 {"medians", rows(r.rate->medians)},
                 {"slopes", nums(r.rate->slopes)},
                 {"slope_se", nums(r.rate->slope_se)},
                 {"expected", nums(r.rate->expected)}};
  j["runtime_seconds"] = r.runtime_seconds;
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = checks;
  return j.dump(2);
}

LanReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("report: not valid JSON: ") + e.what());
  }
  if (!j.contains("schema") || j["schema"] != "lanlab/1")
    throw IoError("report: schema mismatch (expected lanlab/1)");
  try {
    LanReport r;
    r.schema = j.at("schema");
    r.config = config_from_json(j.at("config"));
    r.replications = j.at("replications");
    r.included = j.at("included");
    r.excluded = j.at("excluded");
    for (const auto& f : j.at("failures")) r.failures.push_back({f.at("replication"), f.at("message")});
    r.rep_index = j.at("rep_index").get<std::vector<std::size_t>>();
    r.theta_hat = get_rows(j.at("theta_hat"));
    r.normalized = get_rows(j.at("normalized"));
    r.plugin = get_rows(j.at("plugin"));
    r.summary = get_summaries(j.at("summary"));
    r.m0 = j.at("m0");
    r.kappa = get_nums(j.at("kappa"));
    r.fisher = get_nums(j.at("fisher"));
    r.fisher_method = j.at("fisher_method");
    if (j.contains("quadratic")) {
      const auto& q = j["quadratic"];
      r.quadratic = QuadraticSummary{get_rows(q.at("samples")), get_nums(q.at("mean")), get_nums(q.at("sd")),
                                     get_nums(q.at("target"))};
    }
    if (j.contains("score"))
      r.score = ScoreSummary{get_rows(j["score"].at("samples")), get_summaries(j["score"].at("summary"))};
    for (const auto& d : j.at("decay"))
      r.decay.push_back({d.at("status"), get_num(d.at("slope")), get_num(d.at("slope_se")), get_num(d.at("bound")),
                         d.at("points"), get_num(d.at("lag_lo")), get_num(d.at("lag_hi")), d.at("reason")});
    if (j.contains("rate")) {
      const auto& q = j["rate"];
      r.rate = RateSummary{get_nums(q.at("horizons")), get_rows(q.at("medians")), get_nums(q.at("slopes")),
                           get_nums(q.at("slope_se")), get_nums(q.at("expected"))};
    }
    r.runtime_seconds = j.at("runtime_seconds");
    for (const auto& c : j.at("checks")) r.checks.push_back({c.at("name"), c.at("passed"), c.at("detail")});
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("report: missing or malformed field: ") + e.what());
  }
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

void persist_report(const LanReport& r, const std::string& path) { write_atomic(path, report_to_json(r)); }

LanReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

std::string errors_csv(const LanReport& r) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t m = r.theta_hat.empty() ? r.kappa.size() : r.theta_hat.front().size();
  os << "replication";
  for (std::size_t i = 1; i <= m; ++i) os << ",theta_hat_" << i;
  for (std::size_t i = 1; i <= m; ++i) os << ",normalized_" << i;
  if (!r.plugin.empty())
    for (std::size_t i = 1; i <= m; ++i) os << ",plugin_" << i;
  os << '\n';
  for (std::size_t k = 0; k < r.theta_hat.size(); ++k) {
    os << r.rep_index[k];
    for (double v : r.theta_hat[k]) os << ',' << v;
    for (double v : r.normalized[k]) os << ',' << v;
    if (!r.plugin.empty())
      for (double v : r.plugin[k]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace fbmlan
