#pragma once

#include <span>
#include <vector>

#include "fbmlan/common.hpp"
#include "fbmlan/models.hpp"
#include "fbmlan/quadrature_tables.hpp"

namespace fbmlan {

struct FracConstants {
  double H;
  double d_H;
  double bar_d_H;
  double d_prime_H;
  double e_H;
};

FracConstants make_constants(double H);

// bar d_H from the Beta-product identity, independent of make_constants.
double bar_d_beta_route(double H);

// B(3/2 - H, 1/2 - H)
double kernel_mass(double H);

// Right-sided fractional integral and Marchaud derivative of a sampled function
// that vanishes outside its grid. The interpolant is continued by one extra cell
// down to zero past the last node.
FuncPath frac_integral_minus(const FuncPath& f, double order);
FuncPath marchaud_minus(const FuncPath& f, double order);

struct BetaPath {
  Grid grid;
  std::vector<double> values;
};

// beta_t for drift values a_k = a(X_{t_k}) sampled on a grid starting at 0.
BetaPath beta_from_drift(std::span<const double> a, const Grid& grid, double sigma, double H);

BetaPath beta_process(const DriftModel& model, ParamView th, double sigma, double H, const Grid& grid,
                      std::span<const double> x);
BetaPath beta_process(const DriftModel& model, ParamView th, double H, const StatePath& path);

std::vector<BetaPath> dbeta_process(const DriftModel& model, ParamView th, double sigma, double H, const Grid& grid,
                                    std::span<const double> x);
std::vector<BetaPath> dbeta_process(const DriftModel& model, ParamView th, double H, const StatePath& path);

// (K_H^{*,-1} 1_{[0,t]})(s); zero for s >= t.
double kstar_inv_indicator(double s, double t, double H);

}  // namespace fbmlan
