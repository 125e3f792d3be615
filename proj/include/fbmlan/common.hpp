#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbmlan {

// Error classes. Callers (and the CLI exit codes) distinguish them.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct IntegrationError : std::runtime_error {
  std::size_t step;
  IntegrationError(const std::string& what, std::size_t k) : std::runtime_error(what), step(k) {}
};
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct QuadratureError : std::runtime_error {
  double achieved;
  QuadratureError(const std::string& what, double err) : std::runtime_error(what), achieved(err) {}
};
struct InconsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Degenerate design or optimizer failure; carries the best iterate when there is one.
struct EstimationError : std::runtime_error {
  std::vector<double> best;
  explicit EstimationError(const std::string& what, std::vector<double> b = {})
      : std::runtime_error(what), best(std::move(b)) {}
};

class Grid {
 public:
  Grid() = default;
  Grid(double t_start, double dt, std::size_t n_points);

  double t_start() const { return t_start_; }
  double dt() const { return dt_; }
  std::size_t size() const { return n_; }
  double t(std::size_t k) const { return t_start_ + static_cast<double>(k) * dt_; }
  double t_end() const { return t(n_ - 1); }

  // Index of the grid point at time t; throws DomainError when t is off-grid.
  std::size_t index_of(double t) const;
  bool contains_zero() const;
  std::size_t zero_index() const { return index_of(0.0); }

  // Observation grid [0, T] with step dt; T must be a multiple of dt.
  static Grid span(double T, double dt);

  bool operator==(const Grid&) const = default;

 private:
  double t_start_ = 0.0;
  double dt_ = 1.0;
  std::size_t n_ = 2;
};

struct FuncPath {
  Grid grid;
  std::vector<double> values;
};

struct Seed {
  std::uint64_t master = 0;
  std::uint64_t stream = 0;
};

using Rng = std::mt19937_64;

// (master, stream) -> generator state, deterministic.
Rng make_rng(Seed seed);

using ParamView = std::span<const double>;
using Params = std::vector<double>;

}  // namespace fbmlan
