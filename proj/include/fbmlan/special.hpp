#pragma once

#include <cstddef>

namespace fbmlan::special {

double beta(double a, double b);
double log_beta(double a, double b);

// Non-normalized incomplete Beta over an interval:
// int_{u0}^{u1} u^{a-1} (1-u)^{b-1} du, 0 <= u0 <= u1 <= 1, a, b > 0.
double beta_inc(double a, double b, double u0, double u1);

// F(x) = int_x^1 v^{-1} (1-v)^{b-1} dv for 0 < x <= 1, b > 0.
// This is the a = 0 member of the incomplete Beta family, so it gets its own series.
double kstar_tail(double x, double b);

// Moments of y^p against the two linear hat halves on [m, m+1]:
// rising = int (y - m) y^p dy, falling = int (m + 1 - y) y^p dy.
struct HatMoments {
  double rising;
  double falling;
};
HatMoments power_hat_moments(double p, double m);

// Coefficients (-1)^n binom(a, n) for n = 0..count-1.
void neg_binomial_coeffs(double a, std::size_t count, double* out);

}  // namespace fbmlan::special
