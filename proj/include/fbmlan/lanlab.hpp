#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbmlan/common.hpp"
#include "fbmlan/fisher.hpp"
#include "fbmlan/models.hpp"

namespace fbmlan {

struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string kind = "mle";  // mle | quadratic | score | decay | rate
  std::string model = "fou";
  Params theta{1.0};
  double sigma = 1.0;
  double H = 0.35;
  double T = 500.0;
  double dt = 0.05;
  double burnin = 0.0;  // 0: model default
  std::size_t replications = 500;
  std::uint64_t seed = 1;
  std::string estimator = "auto";  // auto (closed form when affine) | numeric
  std::vector<double> horizons{125.0, 500.0, 2000.0};  // rate study

  // Acceptance thresholds evaluated into LanReport::checks.
  double var_tolerance = 0.2;   // relative, normalized-error variance
  double ks_alpha = 0.01;
  double quad_tolerance = 0.1;  // absolute, mean of the quadratic functional
  double slope_tolerance = 0.1;

  // Covariance decay study.
  std::string cov_source = "auto";  // auto | spectral | mc
  double lag_min = 5.0;
  double lag_max = 100.0;
  double lag_step = 0.05;
  double cov_window = 200.0;
  double decay_slack = 0.35;

  // Fisher target by Monte Carlo (models without a closed form).
  std::size_t fisher_reps = 200;
  double fisher_max_lag = 60.0;
};

bool is_lan_kind(const std::string& kind);
// Throws DomainError with a message naming the offending field.
void validate(const ExperimentConfig& cfg);

struct FisherTarget {
  FisherMatrix fisher;
  std::string method;  // closed | spectral | mc | nonzero-mean | stub
  Params mean_grads;
  double route_gap = 0.0;  // relative gap of the two zero-mean routes, when computed
};

struct FisherOptions {
  std::string method = "auto";  // auto | closed | spectral | mc
  double dt = 0.05;
  double max_lag = 60.0;
  std::size_t reps = 200;
  double window = 200.0;
  Seed seed{0x5eed, 0};
};

FisherTarget fisher_compute(const DriftModel& model, ParamView th, double sigma, double H,
                            const FisherOptions& opts = {});

struct Failure {
  std::size_t replication = 0;
  std::string message;
};

struct ComponentSummary {
  double mean = 0.0;
  double variance = 0.0;
  bool variance_defined = false;
  double target_variance = 0.0;
  double ks_statistic = 0.0;
  double ks_p = 1.0;
};

struct QuadraticSummary {
  std::vector<std::vector<double>> samples;  // per replication, m*m row-major
  std::vector<double> mean, sd, target;
};

struct ScoreSummary {
  std::vector<std::vector<double>> samples;  // per replication, m
  std::vector<ComponentSummary> summary;     // target_variance = I_ii
};

struct DecaySummary {
  std::string status;  // pass | fail | inconclusive
  double slope = 0.0;
  double slope_se = 0.0;
  double bound = 0.0;  // H - 3/2 + slack
  std::size_t points = 0;
  double lag_lo = 0.0, lag_hi = 0.0;
  std::string reason;
};

struct RateSummary {
  std::vector<double> horizons;
  std::vector<std::vector<double>> medians;  // [horizon][component]
  std::vector<double> slopes, slope_se, expected;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct LanReport {
  std::string schema = "lanlab/1";
  ExperimentConfig config;
  std::size_t replications = 0;
  std::size_t included = 0;
  std::size_t excluded = 0;
  std::vector<Failure> failures;
  std::vector<std::size_t> rep_index;               // included replications
  std::vector<std::vector<double>> theta_hat;       // per included replication
  std::vector<std::vector<double>> normalized;      // T^{-kappa_i} (theta_hat - theta*)
  std::vector<std::vector<double>> plugin;          // normalized * sqrt(I(theta_hat)_ii); empty without a cheap I
  std::vector<ComponentSummary> summary;
  std::size_t m0 = 0;
  std::vector<double> kappa;
  std::vector<double> fisher;  // target I(theta*), m*m row-major
  std::string fisher_method;
  std::optional<QuadraticSummary> quadratic;
  std::optional<ScoreSummary> score;
  std::vector<DecaySummary> decay;  // one per diagonal component
  std::optional<RateSummary> rate;
  double runtime_seconds = 0.0;
  std::vector<Check> checks;

  bool all_passed() const;
};

LanReport run_mle_experiment(const ExperimentConfig& cfg);
LanReport verify_quadratic_term(const ExperimentConfig& cfg);
LanReport verify_score_clt(const ExperimentConfig& cfg);
LanReport run_rate_experiment(const ExperimentConfig& cfg);
LanReport run_decay_experiment(const ExperimentConfig& cfg);
// Dispatch on cfg.kind.
LanReport run_experiment(const ExperimentConfig& cfg);

// Slope of log|c_ij| on lags in [lag_lo, lag_hi] with |c| > 3 SE.
DecaySummary verify_cov_decay(const CovEstimate& cov, double H, std::size_t i = 0, std::size_t j = 0,
                              double lag_lo = 1.0, double lag_hi = 1e300, double slack = 0.35);

struct GammaParts {
  // [component][grid index]
  std::vector<std::vector<double>> g1, g2, g3;
  std::vector<std::vector<double>> dbeta;
  double max_rel_gap = 0.0;  // |g1 + g2 + g3 - dbeta| / max|dbeta|
};

// Splits d_theta beta into the deterministic mean term, the centered integral
// against (t-s)^{-1/2-H}, and the remainder with weight ((1 - r/t)^{1/2-H} - 1).
GammaParts gamma_decompose(const DriftModel& model, ParamView th, double H, const StatePath& path,
                           ParamView mean_grads);

// Convolution with (t-s)^{-1/2-H} by product integration of the piecewise
// linear interpolant.
std::vector<double> riemann_liouville_left(std::span<const double> f, double dt, double H);

std::string report_to_json(const LanReport& r);
LanReport report_from_json(const std::string& text);
void persist_report(const LanReport& r, const std::string& path);
LanReport load_report(const std::string& path);
// One row per included replication: rep, theta_hat_i, normalized_i[, plugin_i].
std::string errors_csv(const LanReport& r);

// Temp file + rename.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace fbmlan
