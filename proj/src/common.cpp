#include "fbmlan/common.hpp"

#include <cmath>

namespace fbmlan {

Grid::Grid(double t_start, double dt, std::size_t n_points) : t_start_(t_start), dt_(dt), n_(n_points) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("grid step must be positive and finite");
  if (n_points < 2) throw DomainError("grid needs at least two points");
  if (!std::isfinite(t_start)) throw DomainError("grid start must be finite");
}

std::size_t Grid::index_of(double t) const {
  const double x = (t - t_start_) / dt_;
  const double k = std::round(x);
  if (k < 0.0 || k > static_cast<double>(n_ - 1) || std::abs(x - k) > 1e-8)
    throw DomainError("time " + std::to_string(t) + " is not a grid point");
  return static_cast<std::size_t>(k);
}

bool Grid::contains_zero() const {
  try {
    index_of(0.0);
    return true;
  } catch (const DomainError&) {
    return false;
  }
}

Grid Grid::span(double T, double dt) {
  if (!(T > 0.0)) throw DomainError("horizon T must be positive");
  const double steps = T / dt;
  const double n = std::round(steps);
  if (std::abs(steps - n) > 1e-8 * std::max(1.0, n))
    throw DomainError("T must be an integer multiple of dt");
  return Grid(0.0, dt, static_cast<std::size_t>(n) + 1);
}

Rng make_rng(Seed seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.master), static_cast<std::uint32_t>(seed.master >> 32),
                    static_cast<std::uint32_t>(seed.stream), static_cast<std::uint32_t>(seed.stream >> 32),
                    0x6662u};
  return Rng(seq);
}

}  // namespace fbmlan
