#pragma once

#include "occfluct/model.hpp"
#include "occfluct/quadrature.hpp"
#include "occfluct/test_function.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace occfluct {

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
  std::vector<double> lo, hi;
  static Box cube(int d, double half_width);
  int dimension() const { return static_cast<int>(lo.size()); }
  double volume() const;
  bool contains(std::span<const double> x) const;
};

/// One-sided a-stable law with E exp(-lambda S) = exp(-lambda^a), 0 < a < 1.
class PositiveStableLaw {
 public:
  explicit PositiveStableLaw(double a);

  double index() const { return a_; }
  double density(double s) const;
  double log_density(double s) const;
  /// P(S > s) from the convergent power series in s^{-a}; only valid where
  /// that series is numerically usable (large s). Throws otherwise.
  double upper_tail(double s) const;

  /// Quadrature rule for E g(S): trapezoid in log s on nodes s_i, weights
  /// w_i; w_coarse is the rule on every other node (error estimate).
  struct Rule {
    std::vector<double> s, w, w_coarse;
    double upper_tail = 0.0;  // P(S > s.back())
  };
  /// Built on first use.
  const Rule& rule() const;

 private:
  double series_density(double s, bool* ok) const;
  double zolotarev_log_density(double s) const;
  void build_rule() const;

  double a_;
  mutable Rule rule_;
  mutable std::once_flag built_;
};

/// Standard isotropic alpha-stable law on R^d with symbol exp(-t |z|^alpha).
class StableKernel {
 public:
  StableKernel(int d, double alpha);

  int dimension() const { return d_; }
  double alpha() const { return alpha_; }
  double symbol(double t, double k) const;

  /// Radial Fourier inversion, with the large-|x| series where that is the
  /// more accurate of the two. Spec route for p_t.
  Estimate density(double t, double r) const;

  /// p_t(r) as a Gaussian mixture over the (alpha/2)-stable subordinator.
  Estimate density_mixture(double t, double r) const;

  /// E g(S_t) with S_t = t^{2/alpha} S_1, S_1 the unit subordinator
  /// (S_t = t when alpha = 2). g_inf is g's limit at infinity and is used
  /// for the part of the law beyond the last quadrature node.
  template <class G>
  Estimate subordinator_expectation(double t, G&& g, double g_inf = 0.0) const;

  /// C_{alpha,d} of the Riesz kernel; requires d > alpha.
  double riesz_constant() const;

 private:
  const PositiveStableLaw::Rule& rule() const;

  int d_;
  double alpha_;
  std::shared_ptr<const PositiveStableLaw> sub_;  // null when alpha == 2
};

namespace detail {
/// Kanter's function A(u) on [0, pi): S = (A(U)/E)^{(1-a)/a} with U uniform
/// on (0, pi) and E standard exponential has Laplace transform exp(-lambda^a).
double kanter_A(double a, double u);
}  // namespace detail

/// Surface area of the unit sphere S^{d-1}.
double sphere_area(int d);

/// c with p_t(r) ~ c t r^{-d-alpha} as r -> infinity (alpha < 2).
double stable_tail_coefficient(int d, double alpha);

/// Large-|x| series for p_t(r). `ok` reports whether it is usable at r.
Estimate stable_density_series(int d, double alpha, double t, double r, bool* ok);
/// Radial Fourier inversion alone.
Estimate stable_density_hankel(int d, double alpha, double t, double r);

Estimate density_pt(const StableKernel& k, double t, std::span<const double> x);

/// (p_t * phi)(x). t = 0 returns phi(x) exactly.
Estimate semigroup_apply(const StableKernel& k, double t, const TestFunction& phi,
                         std::span<const double> x);
/// Same quantity by quadrature of density() against the spherical means of
/// phi; independent of the mixture route. Slow, for cross-checks.
Estimate semigroup_apply_convolution(const StableKernel& k, double t, const TestFunction& phi,
                                     std::span<const double> x);

/// int_B T_t phi(x) dx and its complement lambda(phi) - int_B T_t phi.
struct BoxMass {
  double inside = 0.0;
  double outside = 0.0;
  double abs_error = 0.0;
};
BoxMass box_mass(const StableKernel& k, double t, const TestFunction& phi, const Box& box);

/// int_0^h w(s) int_{B^c} T_s phi(x) dx ds, with w == 1 when weight is empty.
Estimate box_deficit_integral(const StableKernel& k, double h, const TestFunction& phi,
                              const Box& box, const std::function<double(double)>& weight = {});

/// G phi(x) = C_{alpha,d} int phi(y) |x-y|^{alpha-d} dy (Riesz kernel route).
Estimate potential_G(const StableKernel& k, const TestFunction& phi, std::span<const double> x);
/// int_0^inf T_t phi(x) dt (time-integral route).
Estimate potential_G_time_integral(const StableKernel& k, const TestFunction& phi,
                                   std::span<const double> x);
/// G phi at distance r from the common centre of a concentric phi.
Estimate potential_G_radial(const StableKernel& k, const TestFunction& phi, double r);

struct PlateauReport {
  std::vector<double> radii;
  std::vector<double> weighted;  // (1 + r^{d-alpha}) |G phi|
  double sup = 0.0;
  bool plateau = false;  // no growth beyond r = 10
  double decay_exponent = 0.0;  // fitted -d log|G phi| / d log r on the outer grid
  std::string message;
};
PlateauReport potential_bound_check(const StableKernel& k, const TestFunction& phi,
                                  std::span<const double> radius_grid);

double constant_K(double V, double beta);

/// h_1(r) = int_0^1 p_u(r) du (requires d > alpha).
Estimate occupation_kernel_h1(const StableKernel& k, double r);

struct CriticalConstants {
  Estimate K2;
  Estimate K1;
};
/// K_2 = V int (int_0^1 p_u du)^beta p_1 dx and K_1 = (-cos(pi(1+beta)/2) K_2)^{1/(1+beta)}.
CriticalConstants constant_K1(const ModelParams& p);

/// Golden table rows "t,r,value,abs_error" for regression tests.
void write_density_table(std::ostream& os, const StableKernel& k, std::span<const double> ts,
                         std::span<const double> rs);

// ---------------------------------------------------------------------------

template <class G>
Estimate StableKernel::subordinator_expectation(double t, G&& g, double g_inf) const {
  if (!sub_) return {g(t), 0.0};
  const auto& r = rule();
  const double scale = std::pow(t, 2.0 / alpha_);
  double fine = 0.0, coarse = 0.0;
  for (std::size_t i = 0; i < r.s.size(); ++i) {
    const double v = g(scale * r.s[i]);
    fine += r.w[i] * v;
    coarse += r.w_coarse[i] * v;
  }
  fine += g_inf * r.upper_tail;
  coarse += g_inf * r.upper_tail;
  return {fine, std::abs(fine - coarse) + 1e-15 * std::abs(fine)};
}

}  // namespace occfluct
