// Stable densities: the radial Fourier route with its large-|x| series, the
// one-sided stable law used for subordination, and the mixture route.
#include "occfluct/log.hpp"
#include "occfluct/stable_numerics.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <mutex>
#include <stdexcept>

namespace occfluct {

using std::numbers::pi;

double sphere_area(int d) { return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d); }

Box Box::cube(int d, double half_width) {
  if (d < 1 || !(half_width >= 0.0)) throw std::invalid_argument("bad box");
  return Box{std::vector<double>(d, -half_width), std::vector<double>(d, half_width)};
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < lo.size(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
  return v;
}

bool Box::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// One-sided stable law

namespace {
double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }
}  // namespace

// Increasing on [0, pi) from (1-a) a^{a/(1-a)}.
double detail::kanter_A(double a, double u) {
  const double ratio = a * sinc(a * u) / sinc(u);
  return std::pow(ratio, 1.0 / (1.0 - a)) * (1.0 - a) * sinc((1.0 - a) * u) / (a * sinc(a * u));
}

PositiveStableLaw::PositiveStableLaw(double a) : a_(a) {
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("positive stable index must lie in (0,1)");
}

const PositiveStableLaw::Rule& PositiveStableLaw::rule() const {
  std::call_once(built_, [this] { build_rule(); });
  return rule_;
}

double PositiveStableLaw::series_density(double s, bool* ok) const {
  // f(s) = (1/pi) sum_k (-1)^{k+1} Gamma(ak+1)/k! sin(pi a k) s^{-ak-1}
  const double ls = std::log(s);
  double sum = 0.0, maxabs = 0.0;
  *ok = false;
  int small = 0;
  for (int k = 1; k <= 600; ++k) {
    const double sn = std::sin(pi * a_ * k);
    const double lg = std::lgamma(a_ * k + 1.0) - std::lgamma(k + 1.0) - (a_ * k + 1.0) * ls;
    const double term = ((k % 2) ? 1.0 : -1.0) * sn * std::exp(lg) / pi;
    sum += term;
    maxabs = std::max(maxabs, std::abs(term));
    if (std::exp(lg) / pi < 1e-17 * std::abs(sum)) {
      if (++small >= 3) {
        *ok = maxabs < 1e2 * std::abs(sum) && sum > 0.0;
        return sum;
      }
    } else {
      small = 0;
    }
  }
  return sum;
}

double PositiveStableLaw::zolotarev_log_density(double s) const {
  const double a = a_;
  const double c = std::pow(s, -a / (1.0 - a));
  const double A0 = detail::kanter_A(a, 0.0);
  auto f = [&](double u) {
    const double A = detail::kanter_A(a, u);
    const double e = c * (A - A0);
    return e > 745.0 ? 0.0 : A * std::exp(-e);
  };
  std::vector<double> br = {0.0, pi};
  for (double q : {1e-3, 1e-2, 0.1, 0.3, 0.6, 0.9, 0.97, 0.99, 0.999}) br.push_back(q * pi);
  for (double k : {0.5, 2.0, 8.0, 32.0}) br.push_back(k / std::sqrt(c));
  br = quad::clean_breaks(br, 0.0, pi);
  const Estimate I = quad::gk_pieces(f, br, 1e-13, 12);
  if (!(I.value > 0.0)) return -INFINITY;
  return std::log(a / (1.0 - a) / pi) - std::log(s) / (1.0 - a) - c * A0 + std::log(I.value);
}

double PositiveStableLaw::log_density(double s) const {
  if (!(s > 0.0)) return -INFINITY;
  bool ok = false;
  if (std::pow(s, -a_) < 0.5) {
    const double v = series_density(s, &ok);
    if (ok) return std::log(v);
  }
  return zolotarev_log_density(s);
}

double PositiveStableLaw::density(double s) const { return std::exp(log_density(s)); }

double PositiveStableLaw::upper_tail(double s) const {
  // P(S > s) = (1/pi) sum_k (-1)^{k+1} Gamma(ak)/k! sin(pi a k) s^{-ak}
  const double ls = std::log(s);
  double sum = 0.0, maxabs = 0.0;
  for (int k = 1; k <= 600; ++k) {
    const double mag = std::exp(std::lgamma(a_ * k) - std::lgamma(k + 1.0) - a_ * k * ls) / pi;
    const double term = ((k % 2) ? 1.0 : -1.0) * std::sin(pi * a_ * k) * mag;
    sum += term;
    maxabs = std::max(maxabs, std::abs(term));
    if (mag < 1e-17 * std::abs(sum) && k > 2) {
      if (maxabs > 1e2 * std::abs(sum)) break;
      return sum;
    }
  }
  throw std::domain_error("upper-tail series not usable at this point");
}

void PositiveStableLaw::build_rule() const {
  // Trapezoid in u = log s. Below s = 20 the spacing shrinks as a -> 1
  // because the lower tail exp(-c s^{-a/(1-a)}) steepens; beyond it the
  // density is a smooth power series in s^{-a}.
  const double h_fine = 1.0 / (28.0 * std::max(1.0, a_ / (1.0 - a_)));
  const double h_tail = 1.0 / 28.0;
  double lo = 0.0;
  while (log_density(std::exp(lo)) + lo > -740.0) lo -= 1.0;
  double hi = 1.0;
  for (;;) {
    bool usable = true;
    double tail = 1.0;
    try {
      tail = upper_tail(std::exp(hi));
    } catch (const std::domain_error&) {
      usable = false;
    }
    if ((usable && tail < 1e-16) || hi > 570.0) break;
    hi += 2.0;
  }
  const double mid = std::clamp(std::log(20.0), lo, hi);
  rule_ = {};
  auto segment = [&](double a, double b, double h) {
    if (!(b > a)) return;
    const auto n = static_cast<std::size_t>(std::ceil((b - a) / h / 2.0)) * 2;
    const double step = (b - a) / static_cast<double>(n);
    const bool joined = !rule_.s.empty();
    for (std::size_t i = 0; i <= n; ++i) {
      const double u = a + step * static_cast<double>(i);
      const double fs = std::exp(log_density(std::exp(u)) + u);  // f(s) ds/du
      const double end = (i == 0 || i == n) ? 0.5 : 1.0;
      const double w = step * end * fs, wc = i % 2 == 0 ? 2.0 * step * end * fs : 0.0;
      if (i == 0 && joined) {
        rule_.w.back() += w;
        rule_.w_coarse.back() += wc;
        continue;
      }
      rule_.s.push_back(std::exp(u));
      rule_.w.push_back(w);
      rule_.w_coarse.push_back(wc);
    }
  };
  segment(lo, mid, h_fine);
  segment(mid, hi, h_tail);
  rule_.upper_tail = upper_tail(std::exp(hi));
}

// ---------------------------------------------------------------------------
// Kernel

StableKernel::StableKernel(int d, double alpha) : d_(d), alpha_(alpha) {
  if (d < 1) throw std::invalid_argument("kernel dimension must be >= 1");
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("alpha must lie in (0, 2]");
  if (alpha < 2.0) {
    // One law per index is shared by all kernels in the process.
    static std::mutex mu;
    static std::vector<std::pair<double, std::shared_ptr<const PositiveStableLaw>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& [a, law] : cache)
      if (a == alpha) sub_ = law;
    if (!sub_) {
      sub_ = std::make_shared<const PositiveStableLaw>(0.5 * alpha);
      cache.emplace_back(alpha, sub_);
    }
  }
}

const PositiveStableLaw::Rule& StableKernel::rule() const { return sub_->rule(); }

double StableKernel::symbol(double t, double k) const { return std::exp(-t * std::pow(std::abs(k), alpha_)); }

double StableKernel::riesz_constant() const {
  if (!(d_ > alpha_)) throw std::invalid_argument("the Riesz kernel needs d > alpha");
  return std::tgamma(0.5 * (d_ - alpha_)) /
         (std::pow(2.0, alpha_) * std::pow(pi, 0.5 * d_) * std::tgamma(0.5 * alpha_));
}

Estimate StableKernel::density_mixture(double t, double r) const {
  if (!(t > 0.0)) throw std::invalid_argument("density needs t > 0");
  const double dh = 0.5 * d_;
  auto g = [&](double s) {
    const double q = r * r / (4.0 * s);
    return q > 745.0 ? 0.0 : std::pow(4.0 * pi * s, -dh) * std::exp(-q);
  };
  return subordinator_expectation(t, g, 0.0);
}

// ---------------------------------------------------------------------------
// Radial Fourier route

namespace {

// Gamma(d/2) (2/z)^nu J_nu(z), nu = d/2 - 1: the spherical average of e^{i z w_1}.
double radial_bessel(int d, double z) {
  switch (d) {
    case 1: return std::cos(z);
    case 2: return std::cyl_bessel_j(0.0, z);
    case 3: return std::abs(z) < 1e-4 ? 1.0 - z * z / 6.0 : std::sin(z) / z;
    default: {
      const double nu = 0.5 * d - 1.0;
      if (std::abs(z) < 1e-6) return 1.0 - z * z / (2.0 * d);
      return std::tgamma(0.5 * d) * std::pow(2.0 / z, nu) * boost::math::cyl_bessel_j(nu, z);
    }
  }
}

}  // namespace

Estimate stable_density_series(int d, double alpha, double t, double r, bool* ok) {
  *ok = false;
  if (alpha >= 2.0 || r <= 0.0) return {0.0, INFINITY};
  const double z = r * std::pow(t, -1.0 / alpha);
  const double lz = std::log(z);
  const bool asymptotic = alpha >= 1.0;
  double sum = 0.0, maxabs = 0.0, prev = INFINITY, err = INFINITY;
  bool converged = false;
  for (int n = 1; n <= 400; ++n) {
    const double sn = std::sin(n * pi * alpha / 2.0);
    if (std::abs(sn) < 1e-13) continue;
    const double lmag = n * alpha * std::log(2.0) - (0.5 * d + 1.0) * std::log(pi) +
                        std::lgamma(0.5 * (d + n * alpha)) + std::lgamma(1.0 + 0.5 * n * alpha) -
                        std::lgamma(n + 1.0) - (n * alpha + d) * lz;
    const double mag = std::exp(lmag) * std::abs(sn);
    if (asymptotic && mag > prev) {
      err = prev;
      converged = true;
      break;
    }
    const double term = ((n % 2) ? 1.0 : -1.0) * (sn > 0 ? 1.0 : -1.0) * mag;
    sum += term;
    maxabs = std::max(maxabs, mag);
    prev = mag;
    if (mag < 1e-17 * std::abs(sum)) {
      err = mag;
      converged = true;
      break;
    }
  }
  if (!converged || !std::isfinite(sum)) return {sum, INFINITY};
  err += maxabs * 1e-15;
  const double scale = std::pow(t, -static_cast<double>(d) / alpha);
  *ok = sum > 0.0 && err < 1e-3 * sum;
  return {sum * scale, err * scale};
}

Estimate stable_density_hankel(int d, double alpha, double t, double r) {
  const double s0 = std::pow(t, -1.0 / alpha);
  double kmax = s0 * std::pow(45.0, 1.0 / alpha);
  for (int i = 0; i < 6; ++i)
    kmax = s0 * std::pow(45.0 + (d - 1) * std::max(0.0, std::log(kmax / s0)), 1.0 / alpha);
  auto f = [&](double k) {
    if (k == 0.0) return d == 1 ? 1.0 : 0.0;
    return std::pow(k, d - 1) * radial_bessel(d, k * r) * std::exp(-t * std::pow(k, alpha));
  };
  std::vector<double> br;
  const double panel = r > 0.0 ? pi / r : INFINITY;
  for (double k = 1e-3 * s0; k < std::min(kmax, panel); k *= 3.0) br.push_back(k);
  if (r > 0.0) {
    const double n = std::ceil(kmax / panel);
    if (n > 4e5) return {0.0, INFINITY};
    for (double m = 1; m <= n; ++m) br.push_back(m * panel);
  }
  br = quad::clean_breaks(br, 0.0, kmax);
  Estimate I = quad::gk_pieces(f, br, 1e-13, 10);
  const double pref = sphere_area(d) / std::pow(2.0 * pi, d);
  return {pref * I.value, pref * I.abs_error};
}

Estimate StableKernel::density(double t, double r) const {
  if (!(t > 0.0)) throw std::invalid_argument("density needs t > 0");
  r = std::abs(r);
  if (r == 0.0) {
    const double v = sphere_area(d_) / std::pow(2.0 * pi, d_) * std::tgamma(d_ / alpha_) /
                     (alpha_ * std::pow(t, d_ / alpha_));
    return {v, 4e-16 * v};
  }
  bool ok = false;
  Estimate best = stable_density_series(d_, alpha_, t, r, &ok);
  if (!ok || !std::isfinite(best.value)) best.abs_error = INFINITY;
  if (!(best.abs_error <= 1e-13 * std::abs(best.value)) || std::isinf(best.abs_error)) {
    const Estimate h = stable_density_hankel(d_, alpha_, t, r);
    if (h.abs_error < best.abs_error) best = h;
  }
  // Fourier inversion has an absolute noise floor; in the light tail the
  // mixture is accurate in relative terms
  if (!(best.abs_error <= 1e-9 * std::abs(best.value))) {
    const Estimate m = density_mixture(t, r);
    if (m.abs_error < best.abs_error) best = m;
  }
  if (best.value < 0.0) {
    if (best.value < -1e-9) log::warn("density inversion dipped to ", best.value, " at t=", t, " r=", r);
    best.abs_error += -best.value;
    best.value = 0.0;
  }
  return best;
}

Estimate density_pt(const StableKernel& k, double t, std::span<const double> x) {
  if (static_cast<int>(x.size()) != k.dimension()) throw std::invalid_argument("point has wrong dimension");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return k.density(t, std::sqrt(r2));
}

}  // namespace occfluct
