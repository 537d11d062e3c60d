// Semigroup, potential operator and the limit constants.
#include "occfluct/stable_numerics.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace occfluct {

using std::numbers::pi;

namespace {

double distance(std::span<const double> x, std::span<const double> c) {
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
  return std::sqrt(r2);
}

void check_point(const StableKernel& k, const TestFunction& phi, std::span<const double> x) {
  if (phi.dimension() != k.dimension() || static_cast<int>(x.size()) != k.dimension())
    throw std::invalid_argument("dimension mismatch between kernel, test function and point");
}

// e^{-z} times the spherical average of e^{z w_1} over S^{d-1}, z >= 0.
double spherical_mean_scaled(int d, double z) {
  if (z < 1e-10) return 1.0;
  switch (d) {
    case 1: return 0.5 * (1.0 + std::exp(-2.0 * z));
    case 3: return -std::expm1(-2.0 * z) / (2.0 * z);
    default: break;
  }
  const double nu = 0.5 * d - 1.0;
  const double pref = std::tgamma(0.5 * d) * std::pow(2.0 / z, nu);
  if (z < 700.0) return pref * boost::math::cyl_bessel_i(nu, z) * std::exp(-z);
  const double m = 4.0 * nu * nu;
  const double y = 8.0 * z;
  const double series = 1.0 - (m - 1.0) / y + (m - 1.0) * (m - 9.0) / (2.0 * y * y) -
                        (m - 1.0) * (m - 9.0) * (m - 25.0) / (6.0 * y * y * y);
  return pref * series / std::sqrt(2.0 * pi * z);
}

// Spherical mean of exp(-|y|^2/(2 s^2)) over the sphere of radius rho about a
// point at distance r from the bump centre.
double gaussian_sphere_mean(int d, double sigma, double r, double rho) {
  const double q = (r - rho) * (r - rho) / (2.0 * sigma * sigma);
  if (q > 745.0) return 0.0;
  return std::exp(-q) * spherical_mean_scaled(d, r * rho / (sigma * sigma));
}

// Upper-tail normal probability.
double normal_q(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace

Estimate semigroup_apply(const StableKernel& k, double t, const TestFunction& phi,
                         std::span<const double> x) {
  check_point(k, phi, x);
  if (t < 0.0) throw std::invalid_argument("semigroup time must be >= 0");
  if (t == 0.0) return {phi(x), 0.0};
  const int d = k.dimension();
  Estimate total;
  for (const auto& b : phi.bumps()) {
    const double r = distance(x, b.center);
    const double s2 = b.sigma * b.sigma;
    auto g = [&](double s) {
      const double v = s2 + 2.0 * s;
      const double q = r * r / (2.0 * v);
      return q > 745.0 ? 0.0 : std::pow(s2 / v, 0.5 * d) * std::exp(-q);
    };
    const Estimate e = k.subordinator_expectation(t, g, 0.0);
    total.value += b.weight * e.value;
    total.abs_error += std::abs(b.weight) * e.abs_error;
  }
  return total;
}

Estimate semigroup_apply_convolution(const StableKernel& k, double t, const TestFunction& phi,
                                     std::span<const double> x) {
  check_point(k, phi, x);
  if (t == 0.0) return {phi(x), 0.0};
  const int d = k.dimension();
  const double area = sphere_area(d);
  const double st = std::pow(t, 1.0 / k.alpha());
  Estimate total;
  for (const auto& b : phi.bumps()) {
    const double r = distance(x, b.center);
    const double sg = b.sigma;
    double err = 0.0;
    auto f = [&](double rho) {
      if (rho == 0.0) return d == 1 ? k.density(t, 0.0).value * gaussian_sphere_mean(d, sg, r, 0.0) : 0.0;
      const Estimate p = k.density(t, rho);
      err = std::max(err, p.rel_error());
      return p.value * area * std::pow(rho, d - 1) * gaussian_sphere_mean(d, sg, r, rho);
    };
    const double upper = r + 40.0 * sg;
    std::vector<double> br;
    for (double q = 1e-3 * std::min(st, sg); q < upper; q *= 2.5) br.push_back(q);
    for (double m : {-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0}) br.push_back(r + m * sg);
    br = quad::clean_breaks(br, 0.0, upper);
    const Estimate I = quad::gk_pieces(f, br, 1e-10, 10);
    total.value += b.weight * I.value;
    total.abs_error += std::abs(b.weight) * (I.abs_error + err * std::abs(I.value));
  }
  return total;
}

BoxMass box_mass(const StableKernel& k, double t, const TestFunction& phi, const Box& box) {
  const int d = k.dimension();
  if (box.dimension() != d || phi.dimension() != d) throw std::invalid_argument("dimension mismatch");
  BoxMass out;
  for (const auto& b : phi.bumps()) {
    const double lam = b.weight * std::pow(2.0 * pi * b.sigma * b.sigma, 0.5 * d);
    const double s2 = b.sigma * b.sigma;
    auto outside = [&](double s) {
      const double sd = std::sqrt(s2 + 2.0 * s);
      double log_in = 0.0;
      for (int i = 0; i < d; ++i) {
        const double q = normal_q((box.hi[i] - b.center[i]) / sd) + normal_q((b.center[i] - box.lo[i]) / sd);
        log_in += std::log1p(-std::min(q, 1.0));
      }
      return -std::expm1(log_in);
    };
    const Estimate e = t == 0.0 ? Estimate{outside(0.0), 0.0} : k.subordinator_expectation(t, outside, 1.0);
    out.outside += lam * e.value;
    out.inside += lam * (1.0 - e.value);
    out.abs_error += std::abs(lam) * e.abs_error;
  }
  return out;
}

Estimate box_deficit_integral(const StableKernel& k, double h, const TestFunction& phi,
                              const Box& box, const std::function<double(double)>& weight) {
  if (!(h >= 0.0)) throw std::invalid_argument("horizon must be >= 0");
  if (h == 0.0) return {};
  auto f = [&](double s) {
    const double w = weight ? weight(s) : 1.0;
    return w == 0.0 ? 0.0 : w * box_mass(k, s, phi, box).outside;
  };
  std::vector<double> br = {0.0, h};
  for (double q = h * 1e-6; q < h; q *= 10.0) br.push_back(q);
  for (double q : {0.25, 0.5, 0.75}) br.push_back(q * h);
  br = quad::clean_breaks(br, 0.0, h);
  return quad::gk_pieces(f, br, 1e-9, 12);
}

// ---------------------------------------------------------------------------
// Potential operator

namespace {

Estimate riesz_bump(const StableKernel& k, double sigma, double r) {
  const int d = k.dimension();
  const double a = k.alpha();
  const double pref = k.riesz_constant() * sphere_area(d);
  if (r > 1e6 * sigma) {
    // |x|^{alpha-d} smoothing of the unit bump; the correction is O((sigma/r)^2).
    const double lam = std::pow(2.0 * pi * sigma * sigma, 0.5 * d);
    const double v = k.riesz_constant() * lam * std::pow(r, a - d);
    return {v, v * 1e-11};
  }
  // rho^{alpha-1} M(r, rho) drho with u = rho^alpha on the first piece.
  auto f = [&](double rho) { return std::pow(rho, a - 1.0) * gaussian_sphere_mean(d, sigma, r, rho); };
  const double upper = r + 40.0 * sigma;
  std::vector<double> br = {0.0, 0.1 * sigma, 0.5 * sigma, sigma};
  for (double m : {-20.0, -8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0, 20.0}) br.push_back(r + m * sigma);
  br = quad::clean_breaks(br, 0.0, upper);
  const double b1 = br[1];
  auto g = [&](double u) { return gaussian_sphere_mean(d, sigma, r, std::pow(u, 1.0 / a)) / a; };
  Estimate I = quad::gk(g, 0.0, std::pow(b1, a), 1e-12, 15);
  I += quad::gk_pieces(f, std::span<const double>(br).subspan(1), 1e-12, 15);
  return {pref * I.value, pref * I.abs_error};
}

}  // namespace

Estimate potential_G(const StableKernel& k, const TestFunction& phi, std::span<const double> x) {
  check_point(k, phi, x);
  (void)k.riesz_constant();
  Estimate total;
  for (const auto& b : phi.bumps()) {
    const Estimate e = riesz_bump(k, b.sigma, distance(x, b.center));
    total.value += b.weight * e.value;
    total.abs_error += std::abs(b.weight) * e.abs_error;
  }
  return total;
}

Estimate potential_G_radial(const StableKernel& k, const TestFunction& phi, double r) {
  if (!phi.concentric()) throw std::invalid_argument("radial potential needs concentric bumps");
  (void)k.riesz_constant();
  Estimate total;
  for (const auto& b : phi.bumps()) {
    const Estimate e = riesz_bump(k, b.sigma, r);
    total.value += b.weight * e.value;
    total.abs_error += std::abs(b.weight) * e.abs_error;
  }
  return total;
}

Estimate potential_G_time_integral(const StableKernel& k, const TestFunction& phi,
                                   std::span<const double> x) {
  check_point(k, phi, x);
  const int d = k.dimension();
  const double a = k.alpha();
  if (!(d > a)) throw std::invalid_argument("the potential operator needs d > alpha");
  if (phi.bumps().empty()) return {};
  double reach = 1.0;
  for (const auto& b : phi.bumps()) reach = std::max(reach, distance(x, b.center) + b.sigma);
  double smallest = INFINITY;
  for (const auto& b : phi.bumps()) smallest = std::min(smallest, b.sigma);
  const double t0 = 1e-12 * std::pow(smallest, a);
  const double t1 = std::pow(1e3 * reach, a);
  auto f = [&](double tau) {
    const double t = std::exp(tau);
    return t * semigroup_apply(k, t, phi, x).value;
  };
  std::vector<double> br;
  for (double tau = std::log(t0); tau < std::log(t1); tau += std::log(10.0)) br.push_back(tau);
  br.push_back(std::log(t1));
  Estimate I = quad::gk_pieces(f, br, 1e-10, 12);
  I.value += t0 * phi(x);
  // T_t phi(x) ~ lambda(phi) p_t(0) for t >> reach^alpha
  const double p10 = k.density(1.0, 0.0).value;
  const double tail = phi.integral() * p10 * std::pow(t1, 1.0 - d / a) / (d / a - 1.0);
  I.value += tail;
  I.abs_error += std::abs(tail) * 1e-5;
  return I;
}

PlateauReport potential_bound_check(const StableKernel& k, const TestFunction& phi,
                                  std::span<const double> radius_grid) {
  const int d = k.dimension();
  const double a = k.alpha();
  (void)k.riesz_constant();
  PlateauReport rep;
  std::vector<double> lr, lg;
  for (double r : radius_grid) {
    std::vector<double> x(d, 0.0);
    x[0] = r;
    const double g = std::abs(potential_G(k, phi, x).value);
    const double w = (1.0 + std::pow(r, d - a)) * g;
    rep.radii.push_back(r);
    rep.weighted.push_back(w);
    rep.sup = std::max(rep.sup, w);
    if (r >= 10.0 && g > 0.0) {
      lr.push_back(std::log(r));
      lg.push_back(std::log(g));
    }
  }
  if (rep.sup == 0.0) {
    rep.plateau = true;
    rep.message = "G phi vanishes on the grid";
    return rep;
  }
  double growth = 0.0;
  for (std::size_t i = 0; i < rep.radii.size(); ++i)
    for (std::size_t j = i + 1; j < rep.radii.size(); ++j)
      if (rep.radii[i] >= 10.0 && rep.weighted[i] > 0.0)
        growth = std::max(growth, rep.weighted[j] / rep.weighted[i] - 1.0);
  if (lr.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lr.size(); ++i) mx += lr[i], my += lg[i];
    mx /= lr.size();
    my /= lr.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lr.size(); ++i) sxy += (lr[i] - mx) * (lg[i] - my), sxx += (lr[i] - mx) * (lr[i] - mx);
    rep.decay_exponent = -sxy / sxx;
  }
  rep.plateau = growth <= 1e-3 && std::isfinite(rep.sup);
  rep.message = rep.plateau ? "bounded, no growth beyond r = 10"
                            : "weighted potential grows beyond r = 10 (violation)";
  return rep;
}

double stable_tail_coefficient(int d, double alpha) {
  return std::pow(2.0, alpha) * std::pow(pi, -0.5 * d - 1.0) * std::tgamma(0.5 * (d + alpha)) *
         std::tgamma(1.0 + 0.5 * alpha) * std::sin(pi * alpha / 2.0);
}

double constant_K(double V, double beta) {
  if (!(V > 0.0) || !(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("constant_K needs V > 0, beta in (0,1)");
  return std::pow(-V / (1.0 + beta) * std::cos(pi * (1.0 + beta) / 2.0), 1.0 / (1.0 + beta));
}

Estimate occupation_kernel_h1(const StableKernel& k, double r) {
  const int d = k.dimension();
  const double al = k.alpha();
  if (!(d > al)) throw std::invalid_argument("h_1 closed form needs d > alpha");
  if (!(r > 0.0)) throw std::invalid_argument("h_1 needs r > 0");
  // int_0^1 p_u(r) du = (alpha/2)(2 pi)^{-d/2} (r^2/2)^{a-d/2} E[(2S)^{-a} Gamma(d/2-a, r^2/(4S))], a = alpha/2
  const double a = 0.5 * al;
  const double shape = 0.5 * d - a;
  auto g = [&](double s) {
    const double z = r * r / (4.0 * s);
    if (z > 740.0) return 0.0;
    return std::pow(2.0 * s, -a) * boost::math::tgamma(shape, z);
  };
  const Estimate e = k.subordinator_expectation(1.0, g, 0.0);
  const double pref = a * std::pow(2.0 * pi, -0.5 * d) * std::pow(0.5 * r * r, a - 0.5 * d);
  return {pref * e.value, pref * e.abs_error};
}

CriticalConstants constant_K1(const ModelParams& p) {
  p.validate();
  if (classify_regime(p).regime != Regime::Critical)
    throw std::invalid_argument("K_1 is defined at the critical dimension");
  if (p.d > 2) throw std::invalid_argument("K_1 quadrature is supported for d in {1, 2}");
  const StableKernel k(p.d, p.alpha);
  const int d = p.d;
  const double b = p.beta;
  // integrand r^{d-1} h_1^beta p_1 ~ r^{gamma-1} near 0, gamma = d - alpha
  const double gam = d - p.alpha;
  auto body = [&](double r) {
    return std::pow(occupation_kernel_h1(k, r).value, b) * k.density_mixture(1.0, r).value;
  };
  const double r0 = 1e-3;
  auto near = [&](double u) {
    const double r = std::pow(u, 1.0 / gam);
    return std::pow(r, d - gam) * body(r) / gam;
  };
  Estimate I = quad::gk(near, 0.0, std::pow(r0, gam), 1e-9, 12);
  const double R = 1e12;
  auto far = [&](double tau) {
    const double r = std::exp(tau);
    return std::pow(r, d) * body(r);
  };
  std::vector<double> br;
  for (double tau = std::log(r0); tau < std::log(R); tau += std::log(10.0)) br.push_back(tau);
  br.push_back(std::log(R));
  I += quad::gk_pieces(far, br, 1e-9, 10);
  // p_1 ~ c1 r^{-d-alpha} and h_1 ~ (c1/2) r^{-d-alpha} beyond R
  const double c1 = stable_tail_coefficient(d, p.alpha);
  const double ex = (d + p.alpha) * (1.0 + b) - d;
  const double tail = std::pow(0.5 * c1, b) * c1 * std::pow(R, -ex) / ex;
  I.value += tail;
  I.abs_error += tail * std::pow(R, -p.alpha);
  const double area = sphere_area(d);
  CriticalConstants out;
  out.K2 = {p.V * area * I.value, p.V * area * I.abs_error};
  const double c = -std::cos(pi * (1.0 + b) / 2.0);
  const double k1 = std::pow(c * out.K2.value, 1.0 / (1.0 + b));
  out.K1 = {k1, k1 / (1.0 + b) * out.K2.rel_error()};
  return out;
}

void write_density_table(std::ostream& os, const StableKernel& k, std::span<const double> ts,
                         std::span<const double> rs) {
  os << "# stable density d=" << k.dimension() << " alpha=" << std::setprecision(17) << k.alpha() << "\n";
  os << "t,r,value,abs_error\n";
  for (double t : ts)
    for (double r : rs) {
      const Estimate e = k.density(t, r);
      os << std::setprecision(17) << t << ',' << r << ',' << e.value << ',' << e.abs_error << '\n';
    }
}

}  // namespace occfluct
