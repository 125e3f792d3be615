#include "fbmlan/special.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>

#include "fbmlan/common.hpp"

namespace fbmlan::special {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double beta(double a, double b) { return std::exp(log_beta(a, b)); }

double beta_inc(double a, double b, double u0, double u1) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("beta_inc: parameters must be positive");
  if (!(u0 >= 0.0 && u1 <= 1.0 && u0 <= u1)) throw DomainError("beta_inc: bad interval");
  if (u0 == u1) return 0.0;
  namespace bm = boost::math;
  // Use the lower tail below 1/2 and the complement above to avoid differences of near-equal totals.
  if (u1 <= 0.5) return bm::beta(a, b, u1) - (u0 > 0.0 ? bm::beta(a, b, u0) : 0.0);
  if (u0 >= 0.5) return bm::betac(a, b, u0) - (u1 < 1.0 ? bm::betac(a, b, u1) : 0.0);
  const double lo = u0 > 0.0 ? bm::beta(a, b, u0) : 0.0;
  const double hi = u1 < 1.0 ? bm::betac(a, b, u1) : 0.0;
  return bm::beta(a, b) - lo - hi;
}

double kstar_tail(double x, double b) {
  if (!(x > 0.0 && x <= 1.0)) throw DomainError("kstar_tail: x must lie in (0, 1]");
  if (x == 1.0) return 0.0;
  constexpr double eps = 1e-17;
  if (x <= 0.5) {
    // -ln x - psi(b) - gamma - sum_{n>=1} (1-b)_n / n! * x^n / n
    double poch = 1.0, xn = 1.0, sum = 0.0;
    for (int n = 1; n < 200; ++n) {
      poch *= (n - b) / n;
      xn *= x;
      const double term = poch * xn / n;
      sum += term;
      if (std::abs(term) < eps * std::abs(sum)) break;
    }
    return -std::log(x) - boost::math::digamma(b) - std::numbers::egamma - sum;
  }
  const double z = 1.0 - x;
  double zn = std::pow(z, b), sum = 0.0;
  for (int n = 0; n < 200; ++n) {
    const double term = zn / (b + n);
    sum += term;
    if (term < eps * sum) break;
    zn *= z;
  }
  return sum;
}

HatMoments power_hat_moments(double p, double m) {
  if (m >= 4.0) {
    // Smooth on [m, m+1]; Gauss-Legendre avoids the cancellation of the closed form.
    using gl = boost::math::quadrature::gauss<double, 20>;
    const double rising = gl::integrate([&](double z) { return z * std::pow(m + z, p); }, 0.0, 1.0);
    const double falling = gl::integrate([&](double z) { return (1.0 - z) * std::pow(m + z, p); }, 0.0, 1.0);
    return {rising, falling};
  }
  if (std::abs(p + 1.0) < 1e-12 || std::abs(p + 2.0) < 1e-12)
    throw DomainError("power_hat_moments: exponent -1 or -2 unsupported");
  const double l0 = (std::pow(m + 1.0, p + 1.0) - std::pow(m, p + 1.0)) / (p + 1.0);
  const double l1 = (std::pow(m + 1.0, p + 2.0) - std::pow(m, p + 2.0)) / (p + 2.0);
  return {l1 - m * l0, (m + 1.0) * l0 - l1};
}

void neg_binomial_coeffs(double a, std::size_t count, double* out) {
  double c = 1.0;
  for (std::size_t n = 0; n < count; ++n) {
    out[n] = c;
    c *= (static_cast<double>(n) - a) / static_cast<double>(n + 1);
  }
}

}  // namespace fbmlan::special
