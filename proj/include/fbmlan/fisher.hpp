#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "fbmlan/common.hpp"
#include "fbmlan/models.hpp"

namespace fbmlan {

// i is 1-based.
double kappa(std::size_t i, std::size_t m0, double H, std::size_t m);

struct CovEstimate {
  std::vector<double> lags;  // uniform, starting at 0
  std::size_t dim = 1;
  // values[i * dim + j][l] = Cov(f_i(X_{t_l}), f_j(X_0))
  std::vector<std::vector<double>> values;
  std::vector<std::vector<double>> se;
  std::size_t replications = 0;

  double at(std::size_t i, std::size_t j, std::size_t l) const { return values[i * dim + j][l]; }
  double se_at(std::size_t i, std::size_t j, std::size_t l) const { return se[i * dim + j][l]; }
};

struct ZeroMeanFisher {
  Eigen::MatrixXd value;   // route (ii), the returned block
  Eigen::MatrixXd direct;  // route (i)
  double max_rel_gap = 0.0;
};

struct ZeroMeanOptions {
  double horizon = 4000.0;  // truncation of the direct 2-D route
  double tolerance = 0.05;  // allowed relative gap between the routes
};

ZeroMeanFisher fisher_zero_mean(const CovEstimate& cov, double H, double sigma, const ZeroMeanOptions& opts = {});

// sigma^{-2} d'_H g g^T
Eigen::MatrixXd fisher_nonzero_mean(std::span<const double> mean_grads, double H, double sigma);

// int_1^inf (u-1)^{-H-1/2} u^{-H-1/2} du by quadrature after u = 1/(1-v).
double u_integral(double H);

// Tail of c beyond the last lag, c(t) ~ C t^{H-3/2}; C fitted on the last decade.
double fit_tail_constant(std::span<const double> lags, std::span<const double> c, double H);

double fou_spectral_cov(double theta, double sigma, double H, double lag);
double fou_fisher_closed(double theta);

// fOU covariance of d_theta a = -x from the spectral formula, SE = 0.
CovEstimate fou_cov_from_spectrum(double theta, double sigma, double H, std::span<const double> lags);

struct CovMcOptions {
  double dt = 0.05;
  double window = 200.0;  // time shifts pooled per replication
  double burnin = 0.0;    // 0: model default
};

// Lags must be multiples of dt. Centering uses the pooled sample mean.
CovEstimate estimate_cov_mc(const DriftModel& model, ParamView th, double sigma, double H,
                            std::span<const double> lags, std::size_t reps, Seed seed, const CovMcOptions& opts = {});

struct FisherMatrix {
  Eigen::MatrixXd I;
  std::size_t m0 = 0;
};

FisherMatrix assemble_fisher(const Eigen::MatrixXd& zero_block, const Eigen::MatrixXd& nonzero_block,
                             std::size_t m0);

}  // namespace fbmlan
