// Wall-clock comparison of the fast or parallel kernels against their serial references.
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "fbmlan/fft.hpp"
#include "fbmlan/likelihood.hpp"
#include "fbmlan/quadrature_tables.hpp"

using namespace fbmlan;

namespace {

double time_best(const std::function<void()>& f, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void row(const char* name, std::size_t n, double fast, double ref, double diff) {
  std::printf("%-28s n=%-7zu fast %9.4f s  reference %9.4f s  speedup %6.1fx  max|diff| %.2e\n", name, n, fast, ref,
              ref / fast, diff);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  const double H = 0.35;
  for (std::size_t n : {2000, 8000}) {
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = std::sin(0.01 * k) - 0.3 * std::cos(0.07 * k);

    const auto q = SingularQuadrature::get(H, n);
    std::vector<double> f, d;
    const double tf = time_best([&] { f = q->apply(a); });
    const double td = time_best([&] { d = q->apply_direct(a); });
    row("singular quadrature", n, tf, td, max_abs_diff(f, d));

    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) w[k] = std::pow(k + 1.0, -0.85);
    const fft::CausalConvolver conv(w);
    const double cf = time_best([&] { f = conv.apply(a); });
    const double cd = time_best([&] { d = fft::causal_convolve_direct(w, a); });
    row("causal convolution", n, cf, cd, max_abs_diff(f, d));

    const auto m = make_model("fou");
    const auto obs = observe(stationary_burnin(*m, Params{1.0}, 1.0, H, Grid(0.0, 0.05, n), 40.0, Seed{1, 0}));
    const double zf = time_best([&] { f = z_increments(obs, H); });
    const double zd = time_best([&] { d = z_increments_direct(obs, H); });
    row("Z increments", n, zf, zd, max_abs_diff(f, d));

    InnovationPath wp, ws;
    const double wf = time_best([&] { wp = innovation_W(obs, *m, Params{1.0}, H); }, 1);
    const double wr = time_best([&] { ws = innovation_W_serial(obs, *m, Params{1.0}, H); }, 1);
    row("innovation W (OpenMP)", n, wf, wr, max_abs_diff(wp.values, ws.values));
  }
}
