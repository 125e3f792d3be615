#pragma once

#include <string>
#include <vector>

#include "fbmlan/common.hpp"

namespace fbmlan {

struct FbmPath {
  Grid grid;
  std::vector<double> values;
  double hurst = 0.5;
};

double fbm_cov(double s, double t, double H);

// Autocovariance of unit-step fractional Gaussian noise at integer lag k.
double fgn_autocov(double k, double H);

// Unit-step fGn of length n. The circulant sampler falls back to Cholesky when
// the embedding has eigenvalues below -1e-12 * max.
std::vector<double> fgn_circulant(std::size_t n, double H, Rng& rng);
std::vector<double> fgn_cholesky(std::size_t n, double H, Rng& rng);

// Minimum eigenvalue of the circulant embedding relative to the maximum; exposed for tests.
double circulant_min_ratio(std::size_t n, double H);

// Requires a grid containing t = 0; the returned path is exactly 0 there.
FbmPath generate_fbm(const Grid& grid, double H, Seed seed);

std::string to_csv(const FbmPath& path);

}  // namespace fbmlan
