#pragma once

#include <span>
#include <string>
#include <vector>

namespace occfluct {

/// weight * exp(-|x - center|^2 / (2 sigma^2))
struct GaussianBump {
  double weight = 1.0;
  std::vector<double> center;
  double sigma = 1.0;
};

/// Finite sum of isotropic Gaussian bumps in R^d.
class TestFunction {
 public:
  TestFunction() = default;
  TestFunction(int d, std::vector<GaussianBump> bumps);

  /// Unit-height bump at the origin (or at `center`).
  static TestFunction gaussian(int d, double sigma, double height = 1.0,
                               std::vector<double> center = {});
  static TestFunction zero(int d);

  int dimension() const { return d_; }
  const std::vector<GaussianBump>& bumps() const { return bumps_; }

  double operator()(std::span<const double> x) const;
  /// lambda(phi), the Lebesgue integral.
  double integral() const;
  bool nonnegative() const;
  bool is_zero() const;
  /// All bumps share one centre, so phi is radial about it.
  bool concentric() const;
  std::span<const double> common_center() const;

  /// phi is radial about its common centre: value at distance r from it.
  double radial(double r) const;

  TestFunction scaled(double c) const;
  TestFunction operator+(const TestFunction& o) const;

  std::string describe() const;

 private:
  int d_ = 1;
  std::vector<GaussianBump> bumps_;
};

/// Time profile psi on [0, 1] together with chi(t) = int_t^1 psi(r) dr.
class TimeProfile {
 public:
  enum class Kind { Constant, Indicator, PointMass, Bump };

  /// psi == c.
  static TimeProfile constant(double c);
  /// psi = 1 on [a, b].
  static TimeProfile indicator(double a, double b);
  /// psi = unit point mass at t1, so chi = 1_{[0, t1]}: pairs with the
  /// single-time value <X_T(t1), phi>.
  static TimeProfile point_mass(double t1);
  /// Normalised Gaussian bump of width w centred at c, restricted to [0,1].
  static TimeProfile bump(double c, double w);

  Kind kind() const { return kind_; }
  double psi(double t) const;
  double chi(double t) const;
  bool is_zero() const;
  /// Points in [0,1] where psi or chi is not smooth.
  std::vector<double> breakpoints() const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double a_ = 0.0, b_ = 1.0, c_ = 0.0;
};

/// Space-time test function sum_j phi_j(x) psi_j(t).
struct SpaceTimeFunction {
  struct Term {
    TestFunction phi;
    TimeProfile psi;
  };
  std::vector<Term> terms;

  static SpaceTimeFunction product(TestFunction phi, TimeProfile psi) {
    return SpaceTimeFunction{{Term{std::move(phi), std::move(psi)}}};
  }
  int dimension() const { return terms.empty() ? 1 : terms.front().phi.dimension(); }
  bool is_zero() const;
  /// Psi(x, s) = int_s^1 Phi(x, r) dr.
  double Psi(std::span<const double> x, double s) const;
};

}  // namespace occfluct
