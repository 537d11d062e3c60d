#include "occfluct/quadrature.hpp"

#include <algorithm>
#include <stdexcept>

namespace occfluct::quad {

std::vector<double> clean_breaks(std::vector<double> pts, double lo, double hi) {
  pts.push_back(lo);
  pts.push_back(hi);
  std::vector<double> out;
  for (double p : pts)
    if (std::isfinite(p)) out.push_back(std::clamp(p, lo, hi));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i) x[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
  if (n > 0) x[n] = b;
  return x;
}

std::vector<double> logspace(double a, double b, double per_decade) {
  if (!(a > 0.0 && b > a)) throw std::invalid_argument("logspace needs 0 < a < b");
  const double decades = std::log10(b / a);
  const auto n = static_cast<std::size_t>(std::ceil(decades * per_decade));
  std::vector<double> x(n + 1);
  const double la = std::log(a), lb = std::log(b);
  for (std::size_t i = 0; i <= n; ++i)
    x[i] = std::exp(la + (lb - la) * static_cast<double>(i) / static_cast<double>(n));
  x.front() = a;
  x.back() = b;
  return x;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) s += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return s;
}

}  // namespace occfluct::quad
