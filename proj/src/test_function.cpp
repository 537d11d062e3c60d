#include "occfluct/test_function.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace occfluct {

TestFunction::TestFunction(int d, std::vector<GaussianBump> bumps) : d_(d), bumps_(std::move(bumps)) {
  if (d < 1) throw std::invalid_argument("test function dimension must be >= 1");
  for (auto& b : bumps_) {
    if (b.center.empty()) b.center.assign(d, 0.0);
    if (static_cast<int>(b.center.size()) != d)
      throw std::invalid_argument("bump centre has wrong dimension");
    if (!(b.sigma > 0.0) || !std::isfinite(b.weight))
      throw std::invalid_argument("bump needs sigma > 0 and a finite weight");
  }
}

TestFunction TestFunction::gaussian(int d, double sigma, double height, std::vector<double> center) {
  return TestFunction(d, {GaussianBump{height, std::move(center), sigma}});
}

TestFunction TestFunction::zero(int d) { return TestFunction(d, {}); }

double TestFunction::operator()(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& b : bumps_) {
    double r2 = 0.0;
    for (int i = 0; i < d_; ++i) {
      const double dx = x[i] - b.center[i];
      r2 += dx * dx;
    }
    const double q = r2 / (2.0 * b.sigma * b.sigma);
    if (q < 745.0) s += b.weight * std::exp(-q);
  }
  return s;
}

double TestFunction::integral() const {
  double s = 0.0;
  for (const auto& b : bumps_)
    s += b.weight * std::pow(2.0 * std::numbers::pi * b.sigma * b.sigma, 0.5 * d_);
  return s;
}

bool TestFunction::nonnegative() const {
  return std::all_of(bumps_.begin(), bumps_.end(), [](const GaussianBump& b) { return b.weight >= 0.0; });
}

bool TestFunction::is_zero() const {
  return std::all_of(bumps_.begin(), bumps_.end(), [](const GaussianBump& b) { return b.weight == 0.0; });
}

bool TestFunction::concentric() const {
  for (const auto& b : bumps_)
    if (b.center != bumps_.front().center) return false;
  return true;
}

std::span<const double> TestFunction::common_center() const {
  if (bumps_.empty() || !concentric()) throw std::logic_error("test function has no common centre");
  return bumps_.front().center;
}

double TestFunction::radial(double r) const {
  double s = 0.0;
  for (const auto& b : bumps_) {
    const double q = r * r / (2.0 * b.sigma * b.sigma);
    if (q < 745.0) s += b.weight * std::exp(-q);
  }
  return s;
}

TestFunction TestFunction::scaled(double c) const {
  TestFunction out = *this;
  for (auto& b : out.bumps_) b.weight *= c;
  return out;
}

TestFunction TestFunction::operator+(const TestFunction& o) const {
  if (o.d_ != d_) throw std::invalid_argument("dimension mismatch");
  TestFunction out = *this;
  out.bumps_.insert(out.bumps_.end(), o.bumps_.begin(), o.bumps_.end());
  return out;
}

std::string TestFunction::describe() const {
  std::ostringstream os;
  os << "d=" << d_;
  for (const auto& b : bumps_) {
    os << " bump(w=" << b.weight << ",sigma=" << b.sigma << ",c=";
    for (std::size_t i = 0; i < b.center.size(); ++i) os << (i ? ";" : "") << b.center[i];
    os << ")";
  }
  return os.str();
}

namespace {
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
}  // namespace

TimeProfile TimeProfile::constant(double c) {
  TimeProfile p;
  p.kind_ = Kind::Constant;
  p.c_ = c;
  return p;
}

TimeProfile TimeProfile::indicator(double a, double b) {
  if (!(0.0 <= a && a <= b && b <= 1.0)) throw std::invalid_argument("indicator needs 0 <= a <= b <= 1");
  TimeProfile p;
  p.kind_ = Kind::Indicator;
  p.a_ = a;
  p.b_ = b;
  return p;
}

TimeProfile TimeProfile::point_mass(double t1) {
  if (!(0.0 <= t1 && t1 <= 1.0)) throw std::invalid_argument("point mass needs t1 in [0,1]");
  TimeProfile p;
  p.kind_ = Kind::PointMass;
  p.a_ = t1;
  return p;
}

TimeProfile TimeProfile::bump(double c, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("bump width must be positive");
  TimeProfile p;
  p.kind_ = Kind::Bump;
  p.c_ = c;
  p.a_ = w;
  return p;
}

double TimeProfile::psi(double t) const {
  if (t < 0.0 || t > 1.0) return 0.0;
  switch (kind_) {
    case Kind::Constant: return c_;
    case Kind::Indicator: return (t >= a_ && t <= b_) ? 1.0 : 0.0;
    case Kind::PointMass: return 0.0;  // singular; only chi is meaningful
    case Kind::Bump: {
      const double w = a_;
      const double mass = norm_cdf((1.0 - c_) / w) - norm_cdf(-c_ / w);
      const double z = (t - c_) / w;
      return std::exp(-0.5 * z * z) / (w * std::sqrt(2.0 * std::numbers::pi) * mass);
    }
  }
  return 0.0;
}

double TimeProfile::chi(double t) const {
  if (t >= 1.0) return 0.0;
  t = std::max(t, 0.0);
  switch (kind_) {
    case Kind::Constant: return c_ * (1.0 - t);
    case Kind::Indicator: return std::max(0.0, b_ - std::max(t, a_));
    case Kind::PointMass: return t <= a_ ? 1.0 : 0.0;
    case Kind::Bump: {
      const double w = a_;
      const double hi = norm_cdf((1.0 - c_) / w);
      const double mass = hi - norm_cdf(-c_ / w);
      return (hi - norm_cdf((t - c_) / w)) / mass;
    }
  }
  return 0.0;
}

bool TimeProfile::is_zero() const {
  switch (kind_) {
    case Kind::Constant: return c_ == 0.0;
    case Kind::Indicator: return a_ == b_;
    default: return false;
  }
}

std::vector<double> TimeProfile::breakpoints() const {
  switch (kind_) {
    case Kind::Indicator: return {a_, b_};
    case Kind::PointMass: return {a_};
    case Kind::Bump: return {std::clamp(c_ - 3 * a_, 0.0, 1.0), std::clamp(c_, 0.0, 1.0),
                             std::clamp(c_ + 3 * a_, 0.0, 1.0)};
    default: return {};
  }
}

std::string TimeProfile::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Constant: os << "constant(" << c_ << ")"; break;
    case Kind::Indicator: os << "indicator(" << a_ << "," << b_ << ")"; break;
    case Kind::PointMass: os << "point_mass(" << a_ << ")"; break;
    case Kind::Bump: os << "bump(" << c_ << "," << a_ << ")"; break;
  }
  return os.str();
}

bool SpaceTimeFunction::is_zero() const {
  return std::all_of(terms.begin(), terms.end(),
                     [](const Term& t) { return t.phi.is_zero() || t.psi.is_zero(); });
}

double SpaceTimeFunction::Psi(std::span<const double> x, double s) const {
  double v = 0.0;
  for (const auto& t : terms) v += t.phi(x) * t.psi.chi(s);
  return v;
}

}  // namespace occfluct
