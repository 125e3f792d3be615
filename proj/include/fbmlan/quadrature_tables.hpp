#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "fbmlan/fft.hpp"

namespace fbmlan {

// Product-integration weights on the integer grid 0, 1, ..., n-1 for
//   I_k = int_0^k (k - s)^{-1/2-H} s^{1/2-H} a(s) ds,
// with a linear between nodes. Tables are dimensionless; callers rescale by dt.
//
// Rows below kFar are integrated exactly cell by cell (incomplete Beta). Longer
// rows split into an exact head (cells below kHead, binomial series of the
// kernel) and a Toeplitz body acting on a(s) s^{1/2-H}, applied by FFT. A
// per-row correction on node kHead makes a == 1 exact.
class SingularQuadrature {
 public:
  static constexpr std::size_t kHead = 8;
  static constexpr std::size_t kFar = 64;

  SingularQuadrature(double H, std::size_t n);

  // Shared immutable instance per (H, n).
  static std::shared_ptr<const SingularQuadrature> get(double H, std::size_t n);

  double hurst() const { return H_; }
  std::size_t size() const { return n_; }

  std::vector<double> apply(std::span<const double> a) const;
  // O(n^2) evaluation of the same weights, no FFT. Reference for tests and benchmarks.
  std::vector<double> apply_direct(std::span<const double> a) const;

  // B(3/2-H, 1/2-H) k^{1-2H}.
  double exact_mass(std::size_t k) const;
  // Largest relative row-sum error before the correction was folded in.
  double raw_defect() const { return raw_defect_; }

  void save(const std::filesystem::path& file) const;
  // Re-checks exactness after loading; throws IoError on mismatch.
  static SingularQuadrature load(const std::filesystem::path& file);

 private:
  SingularQuadrature() = default;
  void build_kernel();
  double near_weight(std::size_t k, std::size_t j) const { return near_[k * (k + 1) / 2 + j]; }

  double H_ = 0.0;
  std::size_t n_ = 0;
  std::vector<double> near_;    // rows k < kFar, triangular
  std::vector<double> head_;    // rows k >= kFar, nodes 0..kHead
  std::vector<double> omega_;   // Toeplitz body weights
  std::vector<double> edge_;    // part of omega_ missing at node kHead (no cell to its left)
  std::vector<double> defect_;  // per-row correction at node kHead
  double raw_defect_ = 0.0;
  fft::CausalConvolver conv_;
};

// Weights for the increments of
//   Zhat(t) = int_0^t r^{-c} int_0^r (r - s)^{-1/2-H} s^c dX_s dr,  c = 1/2 - H,
// over unit cells when X is linear on each cell:
//   Zhat_{k+1} - Zhat_k = sum_{j <= k} G_{k,j} (X_{j+1} - X_j).
class IncrementQuadrature {
 public:
  static constexpr std::size_t kHead = 8;
  static constexpr std::size_t kFar = 64;

  IncrementQuadrature(double H, std::size_t n_cells);
  static std::shared_ptr<const IncrementQuadrature> get(double H, std::size_t n_cells);

  double hurst() const { return H_; }
  std::size_t size() const { return n_; }

  std::vector<double> apply(std::span<const double> dx) const;
  std::vector<double> apply_direct(std::span<const double> dx) const;

  // Exact row sum B(3/2-H, 1/2-H) ((k+1)^{3/2-H} - k^{3/2-H}) / (3/2-H).
  double exact_row_sum(std::size_t k) const;
  // Single weight G_{k,j} as used by apply (j <= k).
  double weight(std::size_t k, std::size_t j) const;
  double raw_defect() const { return raw_defect_; }

 private:
  double H_ = 0.0;
  std::size_t n_ = 0;
  std::vector<double> near_;  // k < kFar, triangular
  std::vector<double> head_;  // k >= kFar, cells 0..kHead-1
  std::vector<double> fbar_, fslope_;  // cell average and slope of r^{-c}
  std::vector<double> gbar_, gslope_;  // same for s^c
  std::vector<double> dm_, em_;        // Toeplitz kernel moments
  std::vector<double> defect_;
  double raw_defect_ = 0.0;
  fft::CausalConvolver conv_d_, conv_e_;
};

}  // namespace fbmlan
