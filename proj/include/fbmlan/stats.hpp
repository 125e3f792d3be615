#pragma once

#include <span>
#include <vector>

namespace fbmlan::stats {

double mean(std::span<const double> x);
// Unbiased (n - 1) sample variance; NaN for fewer than two samples.
double variance(std::span<const double> x);
double median(std::span<const double> x);
double normal_cdf(double x, double mu, double var);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against Normal(mu, var).
KsResult ks_normal(std::span<const double> x, double mu, double var);
// Asymptotic Kolmogorov survival function with the small-sample correction
// lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D.
double kolmogorov_p(double d, std::size_t n);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);
// Slope of log|y| against log x.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace fbmlan::stats
