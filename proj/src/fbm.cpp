#include "fbmlan/fbm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "fbmlan/fft.hpp"

namespace fbmlan {
namespace {

void check_hurst(double H) {
  if (!(H > 0.0 && H < 1.0)) throw DomainError("Hurst index must lie in (0, 1)");
}

std::vector<double> embedding_eigenvalues(std::size_t n, double H, std::size_t& m_out) {
  const std::size_t m = fft::next_pow2(std::max<std::size_t>(n, 2));
  const std::size_t M = 2 * m;
  std::vector<double> row(M);
  for (std::size_t k = 0; k <= m; ++k) row[k] = fgn_autocov(static_cast<double>(k), H);
  for (std::size_t k = m + 1; k < M; ++k) row[k] = row[M - k];
  auto spec = fft::forward_real(row);
  std::vector<double> lambda(M);
  for (std::size_t k = 0; k < spec.size(); ++k) lambda[k] = spec[k].real();
  for (std::size_t k = spec.size(); k < M; ++k) lambda[k] = lambda[M - k];
  m_out = m;
  return lambda;
}

}  // namespace

double fbm_cov(double s, double t, double H) {
  check_hurst(H);
  const double h2 = 2.0 * H;
  return 0.5 * (std::pow(std::abs(s), h2) + std::pow(std::abs(t), h2) - std::pow(std::abs(s - t), h2));
}

double fgn_autocov(double k, double H) {
  const double h2 = 2.0 * H;
  k = std::abs(k);
  return 0.5 * (std::pow(k + 1.0, h2) - 2.0 * std::pow(k, h2) + std::pow(std::abs(k - 1.0), h2));
}

double circulant_min_ratio(std::size_t n, double H) {
  check_hurst(H);
  std::size_t m = 0;
  auto lambda = embedding_eigenvalues(n, H, m);
  double lo = lambda[0], hi = lambda[0];
  for (double v : lambda) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return lo / hi;
}

std::vector<double> fgn_cholesky(std::size_t n, double H, Rng& rng) {
  check_hurst(H);
  Eigen::MatrixXd C(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) C(i, j) = fgn_autocov(static_cast<double>(i) - static_cast<double>(j), H);
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) throw GenerationError("Cholesky factorization of the fGn covariance failed");
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = nd(rng);
  Eigen::VectorXd x = llt.matrixL() * z;
  return {x.data(), x.data() + n};
}

std::vector<double> fgn_circulant(std::size_t n, double H, Rng& rng) {
  check_hurst(H);
  std::size_t m = 0;
  auto lambda = embedding_eigenvalues(n, H, m);
  const std::size_t M = 2 * m;
  double hi = 0.0;
  for (double v : lambda) hi = std::max(hi, v);
  for (double& v : lambda) {
    if (v < -1e-12 * hi) return fgn_cholesky(n, H, rng);
    if (v < 0.0) v = 0.0;
  }
  std::normal_distribution<double> nd;
  std::vector<fft::cplx> w(M);
  for (std::size_t k = 0; k < M; ++k) {
    const double a = std::sqrt(lambda[k] / static_cast<double>(M));
    const double re = nd(rng);
    const double im = nd(rng);
    w[k] = fft::cplx(a * re, a * im);
  }
  auto y = fft::forward(w);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i].real();
  return out;
}

FbmPath generate_fbm(const Grid& grid, double H, Seed seed) {
  check_hurst(H);
  const std::size_t zero = grid.zero_index();
  Rng rng = make_rng(seed);
  const std::size_t n = grid.size() - 1;
  auto inc = fgn_circulant(n, H, rng);
  const double scale = std::pow(grid.dt(), H);
  FbmPath path{grid, std::vector<double>(grid.size(), 0.0), H};
  for (std::size_t k = 0; k < n; ++k) path.values[k + 1] = path.values[k] + scale * inc[k];
  const double anchor = path.values[zero];
  for (double& v : path.values) v -= anchor;
  path.values[zero] = 0.0;
  return path;
}

std::string to_csv(const FbmPath& path) {
  std::ostringstream os;
  os.precision(17);
  os << "t,value\n";
  for (std::size_t k = 0; k < path.values.size(); ++k) os << path.grid.t(k) << ',' << path.values[k] << '\n';
  return os.str();
}

}  // namespace fbmlan
