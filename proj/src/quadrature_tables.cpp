#include "fbmlan/quadrature_tables.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include "fbmlan/common.hpp"
#include "fbmlan/special.hpp"

namespace fbmlan {
namespace {

void check_h(double H) {
  if (!(H > 0.0 && H < 0.5)) throw DomainError("quadrature tables need H in (0, 1/2)");
}

// int_i^{i+1} s^p ds
double cell_power(double p, double i) {
  if (i == 0.0) return 1.0 / (p + 1.0);
  return std::pow(i, p + 1.0) * std::expm1((p + 1.0) * std::log1p(1.0 / i)) / (p + 1.0);
}

// Series of (k - s)^al = k^al sum_n b_n (s / k)^n against the two hat halves of
// cell [i, i+1]. Used only while (i + 1) / k is small.
special::HatMoments head_cell(double c, double al, double k, double i, const std::vector<double>& b) {
  double m0 = 0.0, m1 = 0.0, kn = 1.0;
  for (std::size_t n = 0; n < b.size(); ++n) {
    const double t0 = b[n] * kn * cell_power(c + n, i);
    const double t1 = b[n] * kn * cell_power(c + n + 1, i);
    m0 += t0;
    m1 += t1;
    if (std::abs(t1) < 1e-18 * std::abs(m1)) break;
    kn /= k;
  }
  const double ka = std::pow(k, al);
  m0 *= ka;
  m1 *= ka;
  return {m1 - i * m0, (i + 1.0) * m0 - m1};
}

// int_a^b (p0 + p1 u + p2 u^2) u^al du, closed form; only used for small arguments.
double poly_moment(double a, double b, double al, double p0, double p1, double p2) {
  auto prim = [&](double u) {
    if (u == 0.0) return 0.0;
    return p0 * std::pow(u, al + 1) / (al + 1) + p1 * std::pow(u, al + 2) / (al + 2) +
           p2 * std::pow(u, al + 3) / (al + 3);
  };
  return prim(b) - prim(a);
}

// 1/2 int_{-1}^{1} (1 - |w|) w (m + w)_+^al dw
double e_moment(double al, std::size_t m) {
  const double md = static_cast<double>(m);
  if (m == 0) return 0.5 / ((al + 2.0) * (al + 3.0));
  if (m < 4) {
    // (u - m + 1)(u - m) on [m-1, m] and (m + 1 - u)(u - m) on [m, m+1]
    const double left = poly_moment(md - 1, md, al, md * (md - 1), -(2 * md - 1), 1.0);
    const double right = poly_moment(md, md + 1, al, -md * (md + 1), 2 * md + 1, -1.0);
    return 0.5 * (left + right);
  }
  using gl = boost::math::quadrature::gauss<double, 20>;
  const double left = gl::integrate([&](double w) { return (1.0 + w) * w * std::pow(md + w, al); }, -1.0, 0.0);
  const double right = gl::integrate([&](double w) { return (1.0 - w) * w * std::pow(md + w, al); }, 0.0, 1.0);
  return 0.5 * (left + right);
}

// int_{-1}^{1} (1 - |w|) (m + w)_+^al dw
double d_moment(double al, std::size_t m) {
  if (m == 0) return 1.0 / ((al + 1.0) * (al + 2.0));
  const double md = static_cast<double>(m);
  return special::power_hat_moments(al, md - 1).rising + special::power_hat_moments(al, md).falling;
}

std::vector<double> series_coeffs(double al) {
  std::vector<double> b(80);
  special::neg_binomial_coeffs(al, b.size(), b.data());
  return b;
}

template <class T>
std::shared_ptr<const T> cached(double H, std::size_t n) {
  static std::mutex mu;
  static std::map<std::pair<double, std::size_t>, std::shared_ptr<const T>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{H, n}];
  if (!slot) slot = std::make_shared<const T>(H, n);
  return slot;
}

}  // namespace

// ---------------------------------------------------------------------------

SingularQuadrature::SingularQuadrature(double H, std::size_t n) : H_(H), n_(n) {
  check_h(H);
  if (n < 2) throw DomainError("SingularQuadrature needs at least two nodes");
  const double c = 0.5 - H;
  const double al = -0.5 - H;

  const std::size_t n_near = std::min(n, kFar);
  near_.assign(n_near * (n_near + 1) / 2, 0.0);
  for (std::size_t k = 1; k < n_near; ++k) {
    double* row = near_.data() + k * (k + 1) / 2;
    const double kd = static_cast<double>(k);
    const double s0 = std::pow(kd, 1.0 - 2.0 * H);
    const double s1 = std::pow(kd, 2.0 - 2.0 * H);
    for (std::size_t i = 0; i < k; ++i) {
      const double u0 = static_cast<double>(i) / kd;
      const double u1 = static_cast<double>(i + 1) / kd;
      const double m0 = s0 * special::beta_inc(c + 1, al + 1, u0, u1);
      double fall, rise;
      if (2 * i < k) {
        // moments in s: cancellation is mild near s = 0
        const double m1 = s1 * special::beta_inc(c + 2, al + 1, u0, u1);
        fall = (i + 1.0) * m0 - m1;
        rise = m1 - static_cast<double>(i) * m0;
      } else {
        // moments in (k - s) near the singular end
        const double n0 = s1 * special::beta_inc(c + 1, al + 2, u0, u1);
        fall = n0 - (kd - i - 1.0) * m0;
        rise = (kd - i) * m0 - n0;
      }
      row[i] += fall;
      row[i + 1] += rise;
    }
  }
  if (n <= kFar) return;

  const auto b = series_coeffs(al);
  head_.assign((n - kFar) * (kHead + 1), 0.0);
  for (std::size_t k = kFar; k < n; ++k) {
    double* row = head_.data() + (k - kFar) * (kHead + 1);
    for (std::size_t i = 0; i < kHead; ++i) {
      const auto hm = head_cell(c, al, static_cast<double>(k), static_cast<double>(i), b);
      row[i] += hm.falling;
      row[i + 1] += hm.rising;
    }
  }

  omega_.resize(n);
  edge_.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double md = static_cast<double>(m);
    const double fall = special::power_hat_moments(al, md).falling;
    edge_[m] = fall;
    omega_[m] = fall + (m >= 1 ? special::power_hat_moments(al, md - 1).rising : 0.0);
  }
  build_kernel();

  defect_.assign(n, 0.0);
  std::vector<double> ones(n, 1.0);
  auto raw = apply(ones);  // defect_ is still zero here
  for (std::size_t k = kFar; k < n; ++k) {
    const double exact = exact_mass(k);
    defect_[k] = exact - raw[k];
    raw_defect_ = std::max(raw_defect_, std::abs(defect_[k]) / exact);
  }
}

void SingularQuadrature::build_kernel() { conv_ = fft::CausalConvolver(omega_); }

std::shared_ptr<const SingularQuadrature> SingularQuadrature::get(double H, std::size_t n) {
  return cached<SingularQuadrature>(H, n);
}

double SingularQuadrature::exact_mass(std::size_t k) const {
  return special::beta(1.5 - H_, 0.5 - H_) * std::pow(static_cast<double>(k), 1.0 - 2.0 * H_);
}

namespace {

template <class Conv>
std::vector<double> singular_apply(std::span<const double> a, std::size_t n, std::size_t n_near, double c,
                                   const std::vector<double>& near, const std::vector<double>& head,
                                   const std::vector<double>& edge, const std::vector<double>& defect, Conv conv) {
  constexpr std::size_t J = SingularQuadrature::kHead;
  constexpr std::size_t K = SingularQuadrature::kFar;
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 1; k < n_near; ++k) {
    const double* row = near.data() + k * (k + 1) / 2;
    double s = 0.0;
    for (std::size_t j = 0; j <= k; ++j) s += row[j] * a[j];
    out[k] = s;
  }
  if (n <= K) return out;
  std::vector<double> g(n, 0.0);
  for (std::size_t j = J; j < n; ++j) g[j] = a[j] * std::pow(static_cast<double>(j), c);
  const auto body = conv(g);
  for (std::size_t k = K; k < n; ++k) {
    const double* row = head.data() + (k - K) * (J + 1);
    double s = 0.0;
    for (std::size_t j = 0; j <= J; ++j) s += row[j] * a[j];
    out[k] = s + body[k] - edge[k - J] * g[J] + (defect.empty() ? 0.0 : defect[k] * a[J]);
  }
  return out;
}

}  // namespace

std::vector<double> SingularQuadrature::apply(std::span<const double> a) const {
  if (a.size() != n_) throw DomainError("SingularQuadrature::apply: size mismatch");
  return singular_apply(a, n_, std::min(n_, kFar), 0.5 - H_, near_, head_, edge_, defect_,
                        [&](const std::vector<double>& g) { return conv_.apply(g); });
}

std::vector<double> SingularQuadrature::apply_direct(std::span<const double> a) const {
  if (a.size() != n_) throw DomainError("SingularQuadrature::apply_direct: size mismatch");
  return singular_apply(a, n_, std::min(n_, kFar), 0.5 - H_, near_, head_, edge_, defect_,
                        [&](const std::vector<double>& g) { return fft::causal_convolve_direct(omega_, g); });
}

namespace {
constexpr char kMagic[8] = {'F', 'B', 'M', 'Q', 'T', 'B', 'L', '1'};

void put_vec(std::ofstream& os, const std::vector<double>& v) {
  const std::uint64_t n = v.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

std::vector<double> get_vec(std::ifstream& is) {
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!is || n > (1ull << 32)) throw IoError("weight table: corrupt vector header");
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw IoError("weight table: truncated");
  return v;
}
}  // namespace

void SingularQuadrature::save(const std::filesystem::path& file) const {
  const auto tmp = std::filesystem::path(file.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    const std::uint64_t n = n_;
    os.write(reinterpret_cast<const char*>(&H_), sizeof H_);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&raw_defect_), sizeof raw_defect_);
    for (const auto* v : {&near_, &head_, &omega_, &edge_, &defect_}) put_vec(os, *v);
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

SingularQuadrature SingularQuadrature::load(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError("not a weight table: " + file.string());
  SingularQuadrature q;
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&q.H_), sizeof q.H_);
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&q.raw_defect_), sizeof q.raw_defect_);
  if (!is) throw IoError("weight table: truncated header");
  q.n_ = n;
  q.near_ = get_vec(is);
  q.head_ = get_vec(is);
  q.omega_ = get_vec(is);
  q.edge_ = get_vec(is);
  q.defect_ = get_vec(is);
  if (q.n_ > kFar) q.build_kernel();
  std::vector<double> ones(q.n_, 1.0);
  const auto I = q.apply(ones);
  for (std::size_t k = 1; k < q.n_; ++k)
    if (std::abs(I[k] - q.exact_mass(k)) > 1e-10 * q.exact_mass(k))
      throw IoError("weight table failed the exactness check at node " + std::to_string(k));
  return q;
}

// ---------------------------------------------------------------------------

IncrementQuadrature::IncrementQuadrature(double H, std::size_t n_cells) : H_(H), n_(n_cells) {
  check_h(H);
  if (n_cells < 1) throw DomainError("IncrementQuadrature needs at least one cell");
  const double c = 0.5 - H;
  const double al = -0.5 - H;
  const double B = special::beta(c + 1, al + 1);

  const std::size_t n_near = std::min(n_, kFar);
  near_.assign(n_near * (n_near + 1) / 2, 0.0);
  near_[0] = B / (c + 1);
  static thread_local boost::math::quadrature::tanh_sinh<double> ts;
  using gl = boost::math::quadrature::gauss<double, 20>;
  for (std::size_t k = 1; k < n_near; ++k) {
    double* row = near_.data() + k * (k + 1) / 2;
    const double kd = static_cast<double>(k);
    for (std::size_t j = 0; j <= k; ++j) {
      const double jd = static_cast<double>(j);
      auto f = [&](double r) {
        const double u0 = std::min(1.0, jd / r);
        const double u1 = std::min(1.0, (jd + 1) / r);
        return std::pow(r, c) * special::beta_inc(c + 1, al + 1, u0, u1);
      };
      // Cells touching the diagonal have a square-root-type kink at r = k.
      row[j] = (j + 2 > k) ? ts.integrate(f, kd, kd + 1, 1e-14) : gl::integrate(f, kd, kd + 1);
    }
  }
  if (n_ <= kFar) return;

  const auto b = series_coeffs(al);
  head_.assign((n_ - kFar) * kHead, 0.0);
  for (std::size_t k = kFar; k < n_; ++k) {
    const double kd = static_cast<double>(k);
    const double lk = std::log1p(1.0 / kd);
    double* row = head_.data() + (k - kFar) * kHead;
    for (std::size_t j = 0; j < kHead; ++j) {
      double s = 0.0;
      double kn = 1.0;  // k^{-n}
      for (std::size_t m = 0; m < b.size(); ++m) {
        const double r = (m == 0) ? lk : -kn * std::expm1(-static_cast<double>(m) * lk) / static_cast<double>(m);
        const double term = b[m] * cell_power(c + m, static_cast<double>(j)) * r;
        s += term;
        if (std::abs(term) < 1e-18 * std::abs(s)) break;
        kn /= kd;
      }
      row[j] = s;
    }
  }

  fbar_.resize(n_);
  fslope_.resize(n_);
  gbar_.resize(n_);
  gslope_.resize(n_);
  dm_.resize(n_);
  em_.resize(n_);
  for (std::size_t k = 0; k < n_; ++k) {
    const double kd = static_cast<double>(k);
    fbar_[k] = cell_power(-c, kd);
    fslope_[k] = -c * std::pow(kd + 0.5, -c - 1.0);
    gbar_[k] = cell_power(c, kd);
    gslope_[k] = c * std::pow(kd + 0.5, c - 1.0);
    dm_[k] = d_moment(al, k);
    em_[k] = e_moment(al, k);
  }
  conv_d_ = fft::CausalConvolver(dm_);
  conv_e_ = fft::CausalConvolver(em_);

  defect_.assign(n_, 0.0);
  std::vector<double> ones(n_, 1.0);
  auto raw = apply(ones);
  for (std::size_t k = kFar; k < n_; ++k) {
    const double exact = exact_row_sum(k);
    defect_[k] = exact - raw[k];
    raw_defect_ = std::max(raw_defect_, std::abs(defect_[k]) / exact);
  }
}

std::shared_ptr<const IncrementQuadrature> IncrementQuadrature::get(double H, std::size_t n_cells) {
  return cached<IncrementQuadrature>(H, n_cells);
}

double IncrementQuadrature::exact_row_sum(std::size_t k) const {
  const double c = 0.5 - H_;
  return special::beta(c + 1, 0.5 - H_) * cell_power(c, static_cast<double>(k));
}

double IncrementQuadrature::weight(std::size_t k, std::size_t j) const {
  if (j > k || k >= n_) throw DomainError("IncrementQuadrature::weight: index out of range");
  if (k < kFar) return near_[k * (k + 1) / 2 + j];
  if (j < kHead) return head_[(k - kFar) * kHead + j];
  const std::size_t m = k - j;
  double w = fbar_[k] * gbar_[j] * dm_[m] + em_[m] * (fslope_[k] * gbar_[j] - fbar_[k] * gslope_[j]);
  if (j == kHead && !defect_.empty()) w += defect_[k];
  return w;
}

namespace {

template <class ConvD, class ConvE>
std::vector<double> increment_apply(std::span<const double> dx, std::size_t n, const std::vector<double>& near,
                                    const std::vector<double>& head, const std::vector<double>& fbar,
                                    const std::vector<double>& fslope, const std::vector<double>& gbar,
                                    const std::vector<double>& gslope, const std::vector<double>& defect,
                                    ConvD conv_d, ConvE conv_e) {
  constexpr std::size_t J = IncrementQuadrature::kHead;
  constexpr std::size_t K = IncrementQuadrature::kFar;
  std::vector<double> out(n, 0.0);
  const std::size_t n_near = std::min(n, K);
  for (std::size_t k = 0; k < n_near; ++k) {
    const double* row = near.data() + k * (k + 1) / 2;
    double s = 0.0;
    for (std::size_t j = 0; j <= k; ++j) s += row[j] * dx[j];
    out[k] = s;
  }
  if (n <= K) return out;
  std::vector<double> u(n, 0.0), v(n, 0.0);
  for (std::size_t j = J; j < n; ++j) {
    u[j] = gbar[j] * dx[j];
    v[j] = gslope[j] * dx[j];
  }
  const auto du = conv_d(u);
  const auto eu = conv_e(u);
  const auto ev = conv_e(v);
  for (std::size_t k = K; k < n; ++k) {
    const double* row = head.data() + (k - K) * J;
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) s += row[j] * dx[j];
    s += fbar[k] * du[k] + fslope[k] * eu[k] - fbar[k] * ev[k];
    if (!defect.empty()) s += defect[k] * dx[J];
    out[k] = s;
  }
  return out;
}

}  // namespace

std::vector<double> IncrementQuadrature::apply(std::span<const double> dx) const {
  if (dx.size() != n_) throw DomainError("IncrementQuadrature::apply: size mismatch");
  return increment_apply(
      dx, n_, near_, head_, fbar_, fslope_, gbar_, gslope_, defect_,
      [&](const std::vector<double>& x) { return conv_d_.apply(x); },
      [&](const std::vector<double>& x) { return conv_e_.apply(x); });
}

std::vector<double> IncrementQuadrature::apply_direct(std::span<const double> dx) const {
  if (dx.size() != n_) throw DomainError("IncrementQuadrature::apply_direct: size mismatch");
  return increment_apply(
      dx, n_, near_, head_, fbar_, fslope_, gbar_, gslope_, defect_,
      [&](const std::vector<double>& x) { return fft::causal_convolve_direct(dm_, x); },
      [&](const std::vector<double>& x) { return fft::causal_convolve_direct(em_, x); });
}

}  // namespace fbmlan
