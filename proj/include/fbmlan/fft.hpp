#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fbmlan::fft {

using cplx = std::complex<double>;

std::size_t next_pow2(std::size_t n);

// Unnormalized transforms (FFTW sign conventions). Sizes are arbitrary but
// powers of two are what every caller in the library uses.
std::vector<cplx> forward(std::span<const cplx> x);
std::vector<cplx> forward_real(std::span<const double> x);        // n/2+1 bins
std::vector<double> inverse_real(std::span<const cplx> spec, std::size_t n);

// y_k = sum_{j<=k} w[k-j] x[j] for k < x.size(), with w.size() >= x.size().
// Spectrum of w is computed once; apply() is reentrant.
class CausalConvolver {
 public:
  CausalConvolver() = default;
  explicit CausalConvolver(std::span<const double> w);
  std::vector<double> apply(std::span<const double> x) const;
  std::size_t capacity() const { return n_; }

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<cplx> spec_;
};

std::vector<double> causal_convolve_direct(std::span<const double> w, std::span<const double> x);

// r_m = sum_i x[i] x[i+m], m = 0..x.size()-1.
std::vector<double> autocorrelation(std::span<const double> x);

}  // namespace fbmlan::fft
