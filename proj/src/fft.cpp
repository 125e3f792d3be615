#include "fbmlan/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace fbmlan::fft {
namespace {

enum class Kind { c2c, r2c, c2r };

// The FFTW planner is not thread-safe but executing an existing plan on new
// arrays is, so only plan creation is serialized.
fftw_plan get_plan(Kind kind, std::size_t n) {
  static std::mutex mu;
  static std::map<std::tuple<Kind, std::size_t>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({kind, n});
  if (it != cache.end()) return it->second;
  const int ni = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fftw_plan p = nullptr;
  switch (kind) {
    case Kind::c2c: {
      auto* in = fftw_alloc_complex(n);
      auto* out = fftw_alloc_complex(n);
      p = fftw_plan_dft_1d(ni, in, out, FFTW_FORWARD, flags);
      fftw_free(in);
      fftw_free(out);
      break;
    }
    case Kind::r2c: {
      auto* in = fftw_alloc_real(n);
      auto* out = fftw_alloc_complex(n / 2 + 1);
      p = fftw_plan_dft_r2c_1d(ni, in, out, flags);
      fftw_free(in);
      fftw_free(out);
      break;
    }
    case Kind::c2r: {
      auto* in = fftw_alloc_complex(n / 2 + 1);
      auto* out = fftw_alloc_real(n);
      p = fftw_plan_dft_c2r_1d(ni, in, out, flags);
      fftw_free(in);
      fftw_free(out);
      break;
    }
  }
  if (!p) throw std::runtime_error("fftw planning failed");
  cache.emplace(std::make_tuple(kind, n), p);
  return p;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

std::vector<cplx> forward(std::span<const cplx> x) {
  std::vector<cplx> in(x.begin(), x.end()), out(x.size());
  fftw_execute_dft(get_plan(Kind::c2c, x.size()), as_fftw(in.data()), as_fftw(out.data()));
  return out;
}

std::vector<cplx> forward_real(std::span<const double> x) {
  // r2c may scribble over its input with some plans, so copy.
  std::vector<double> in(x.begin(), x.end());
  std::vector<cplx> out(x.size() / 2 + 1);
  fftw_execute_dft_r2c(get_plan(Kind::r2c, x.size()), in.data(), as_fftw(out.data()));
  return out;
}

std::vector<double> inverse_real(std::span<const cplx> spec, std::size_t n) {
  if (spec.size() != n / 2 + 1) throw std::invalid_argument("inverse_real: spectrum size mismatch");
  std::vector<cplx> in(spec.begin(), spec.end());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(get_plan(Kind::c2r, n), as_fftw(in.data()), out.data());
  return out;
}

CausalConvolver::CausalConvolver(std::span<const double> w) : n_(w.size()), m_(next_pow2(2 * w.size())) {
  std::vector<double> padded(m_, 0.0);
  std::copy(w.begin(), w.end(), padded.begin());
  spec_ = forward_real(padded);
}

std::vector<double> CausalConvolver::apply(std::span<const double> x) const {
  if (x.size() > n_) throw std::invalid_argument("CausalConvolver: input longer than kernel");
  std::vector<double> padded(m_, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  auto s = forward_real(padded);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= spec_[i];
  auto y = inverse_real(s, m_);
  y.resize(x.size());
  const double scale = 1.0 / static_cast<double>(m_);
  for (auto& v : y) v *= scale;
  return y;
}

std::vector<double> causal_convolve_direct(std::span<const double> w, std::span<const double> x) {
  if (w.size() < x.size()) throw std::invalid_argument("causal_convolve_direct: kernel too short");
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j <= k; ++j) s += w[k - j] * x[j];
    y[k] = s;
  }
  return y;
}

std::vector<double> autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t m = next_pow2(2 * n);
  std::vector<double> padded(m, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  auto s = forward_real(padded);
  for (auto& v : s) v = std::norm(v);
  auto r = inverse_real(s, m);
  r.resize(n);
  for (auto& v : r) v /= static_cast<double>(m);
  return r;
}

}  // namespace fbmlan::fft
