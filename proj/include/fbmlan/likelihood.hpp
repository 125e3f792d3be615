#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fbmlan/common.hpp"
#include "fbmlan/fracops.hpp"
#include "fbmlan/models.hpp"

namespace fbmlan {

struct ObservedPath {
  Grid grid;  // starts at 0
  std::vector<double> values;
  double sigma = 1.0;
  double x0 = 0.0;
};

ObservedPath observe(const StatePath& path);
void validate(const ObservedPath& obs);

struct InnovationPath {
  Grid grid;
  std::vector<double> values;
  Params theta;
};

struct ZPath {
  Grid grid;
  std::vector<double> values;
};

struct LogLikResult {
  double value = 0.0;
  double stochastic = 0.0;
  double quadratic = 0.0;
};

FuncPath b_theta_path(const ObservedPath& obs, const DriftModel& model, ParamView th);

// Kernel route: W_t = int_0^t (K*^{-1} 1_[0,t])(s) dB^theta_s, kernel at cell
// midpoints and the last cell averaged exactly. O(n^2) over the full path.
InnovationPath innovation_W(const ObservedPath& obs, const DriftModel& model, ParamView th, double H);
InnovationPath innovation_W_serial(const ObservedPath& obs, const DriftModel& model, ParamView th, double H);
// Same values at selected grid indices only.
std::vector<double> innovation_W_at(const ObservedPath& obs, const DriftModel& model, ParamView th, double H,
                                    std::span<const std::size_t> indices);

// Z = W^{theta_ref} + int beta(theta_ref), both on the kernel route.
ZPath z_path(const ObservedPath& obs, const DriftModel& model, ParamView theta_ref, double H);

// Increments of Z computed directly from the path (no reference parameter):
// dZ_k = sigma^{-1} bar_d^{-1} dt^{1/2-H} sum_j G_{k,j} (X_{j+1} - X_j).
std::vector<double> z_increments(const ObservedPath& obs, double H);
std::vector<double> z_increments_direct(const ObservedPath& obs, double H);

// Per-path likelihood evaluator. Holds dZ so repeated parameter queries only
// recompute beta.
class Likelihood {
 public:
  Likelihood(ObservedPath obs, ModelPtr model, double H);

  const ObservedPath& obs() const { return obs_; }
  const DriftModel& model() const { return *model_; }
  double hurst() const { return H_; }
  const std::vector<double>& dz() const { return dz_; }

  BetaPath beta(ParamView th) const;
  // dW^theta_k = dZ_k - dt beta_k. beta is only Hoelder 1/2-H, so a trapezoid
  // here would correlate with the current increment and bias the estimators.
  std::vector<double> innovation_increments(ParamView th) const;
  LogLikResult loglik(ParamView th, ParamView th_new) const;

 private:
  ObservedPath obs_;
  ModelPtr model_;
  double H_;
  std::vector<double> dz_;
};

// log dmu_{th_new} / dmu_th = J(th_new) - J(th), J = sum_k beta_k dZ_k - 1/2 trap(beta^2).
// Exact cocycle; for affine drifts the maximizer is exactly mle_linear.
LogLikResult loglik_ratio(const ObservedPath& obs, const DriftModel& model, ParamView th, ParamView th_new, double H);

// Closed form for a(x, theta) = theta * b(x) + h(x).
double mle_linear(const ObservedPath& obs, const std::function<double(double)>& b, double H,
                  const std::function<double(double)>& h = {});
double mle_linear(const Likelihood& lik, const std::function<double(double)>& b,
                  const std::function<double(double)>& h = {});

struct MleOptions {
  std::size_t max_iter = 500;
  double xtol = 1e-10;
  double initial_step = 0.25;
};

struct MleResult {
  Params theta;
  double objective = 0.0;  // loglik(theta_init -> theta)
  std::size_t iterations = 0;
};

// Golden section for one parameter, Nelder-Mead otherwise.
MleResult mle_numeric(const Likelihood& lik, ParamView theta_init, const MleOptions& opts = {});
MleResult mle_numeric(const ObservedPath& obs, ModelPtr model, ParamView theta_init, double H,
                      const MleOptions& opts = {});

}  // namespace fbmlan
