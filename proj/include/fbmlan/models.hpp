#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fbmlan/common.hpp"
#include "fbmlan/fbm.hpp"

namespace fbmlan {

// a(x, theta) = theta * basis(x) + offset(x), one-dimensional theta.
struct AffineForm {
  std::function<double(double)> basis;
  std::function<double(double)> offset;
};

class DriftModel {
 public:
  virtual ~DriftModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t param_dim() const = 0;

  virtual double drift(double x, ParamView th) const = 0;
  virtual double drift_dx(double x, ParamView th) const = 0;
  virtual void drift_dtheta(double x, ParamView th, std::span<double> out) const = 0;
  virtual void drift_dx_dtheta(double x, ParamView th, std::span<double> out) const = 0;

  // The constant of -1/alpha <= d_x a <= -alpha.
  virtual double alpha(ParamView th) const = 0;
  // Best rate with d_x a <= -rate; governs pathwise contraction. Never below alpha.
  virtual double contraction_rate(ParamView th) const { return alpha(th); }
  virtual double growth_p() const { return 1.0; }
  virtual bool admissible(ParamView th) const = 0;

  virtual std::optional<AffineForm> affine() const { return std::nullopt; }
  // E*{d_theta a(X_0)} under the stationary law when known without simulation.
  virtual std::optional<Params> stationary_mean_grad(ParamView) const { return std::nullopt; }
  // Test stub flag: skips (A2) probing and is refused by estimators.
  virtual bool exempt_from_dissipativity() const { return false; }
};

using ModelPtr = std::shared_ptr<const DriftModel>;

// "fou", "mean_revert", "sine", "zero".
ModelPtr make_model(std::string_view name);

// Minimum margin theta1 - |theta2| accepted for SINE.
inline constexpr double kSineAlphaMin = 0.1;

// Size and admissibility check; throws DomainError.
void check_params(const DriftModel& model, ParamView th);
void check_sigma(double sigma);

struct ProbeResult {
  bool dissipative = true;  // -1/alpha <= d_x a <= -alpha on every probe
  bool growth_ok = true;    // |d_theta a| <= C (1 + |x|^p)
  bool cross_bounded = true;
  double worst_upper = 0.0;  // max d_x a seen
  double worst_lower = 0.0;  // min d_x a seen
};
ProbeResult probe_assumptions(const DriftModel& model, ParamView th, std::size_t n_probe = 1000, double range = 50.0);

// Number of leading components whose stationary mean gradient is zero.
std::size_t zero_mean_count(std::span<const double> mean_grads, double tol = 0.0);

struct StatePath {
  Grid grid;
  std::vector<double> values;
  std::string model;
  Params theta;
  double sigma = 1.0;
  double x0 = 0.0;
};

StatePath euler_solve(const DriftModel& model, ParamView th, double sigma, double x0, const FbmPath& driver);

// Default burn-in length max(40, ln(1e8) / rate).
double default_burnin(const DriftModel& model, ParamView th);

// Driver on [-S, T]; solve from -S with initial value init and keep [0, T].
StatePath stationary_from_driver(const DriftModel& model, ParamView th, double sigma, const FbmPath& driver,
                                 double init = 0.0);
StatePath stationary_burnin(const DriftModel& model, ParamView th, double sigma, double H, const Grid& obs_grid,
                            double burnin, Seed seed);

std::vector<double> contraction_gap(const DriftModel& model, ParamView th, double sigma, double x0, double y0,
                                    const FbmPath& driver);

// Relative slack of the Euler contraction bound, valid while dt * sup|d_x a| <= 1.
inline constexpr double kEulerGapSlack = 1e-9;

double malliavin_kernel(const DriftModel& model, ParamView th, double sigma, const StatePath& path, double s,
                        double t);

struct FdMalliavin {
  double fd_value;
  double kernel_value;
};
// The bump shifts the driver by eps at every grid time strictly after s.
FdMalliavin fd_malliavin_check(const DriftModel& model, ParamView th, double sigma, double x0,
                               const FbmPath& driver, double s, double t, double eps);

std::string to_csv(const StatePath& path);

}  // namespace fbmlan
