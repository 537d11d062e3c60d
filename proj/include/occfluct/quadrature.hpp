#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace occfluct {

/// A computed value with its achieved absolute error estimate.
struct Estimate {
  double value = 0.0;
  double abs_error = 0.0;

  double rel_error() const {
    return value != 0.0 ? abs_error / std::abs(value) : (abs_error == 0.0 ? 0.0 : INFINITY);
  }
  Estimate& operator+=(const Estimate& o) {
    value += o.value;
    abs_error += o.abs_error;
    return *this;
  }
};

namespace quad {

/// Globally adaptive 31-point Gauss-Kronrod over the pieces given by
/// `breaks` (increasing). The interval with the largest error estimate is
/// bisected until the summed error is below max(abs_tol, rel_tol |I|) or
/// the evaluation budget is spent; the returned error is the achieved one.
template <class F>
Estimate gk_pieces(F&& f, std::span<const double> breaks, double rel_tol = 1e-12,
                   unsigned max_depth = 15, double abs_tol = 0.0) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  struct Piece {
    double a, b, value, error;
    unsigned depth;
  };
  auto eval = [&](double a, double b, unsigned depth) {
    double err = 0.0, l1 = 0.0;
    const double v = GK::integrate(f, a, b, 0, 0.0, &err, &l1);
    return Piece{a, b, v, err + l1 * 2 * std::numeric_limits<double>::epsilon(), depth};
  };
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    if (breaks[i + 1] > breaks[i]) pieces.push_back(eval(breaks[i], breaks[i + 1], 0));
  auto cmp = [](const Piece& x, const Piece& y) { return x.error < y.error; };
  std::make_heap(pieces.begin(), pieces.end(), cmp);
  double total = 0.0, err = 0.0;
  for (const auto& p : pieces) total += p.value, err += p.error;
  const std::size_t budget = 4000 + 64 * pieces.size();
  for (std::size_t iter = 0; iter < budget && !pieces.empty(); ++iter) {
    if (err <= std::max(abs_tol, rel_tol * std::abs(total))) break;
    std::pop_heap(pieces.begin(), pieces.end(), cmp);
    const Piece worst = pieces.back();
    const double m = 0.5 * (worst.a + worst.b);
    if (worst.depth >= max_depth + 20 || !(m > worst.a && m < worst.b)) {
      std::push_heap(pieces.begin(), pieces.end(), cmp);
      break;
    }
    pieces.pop_back();
    const Piece l = eval(worst.a, m, worst.depth + 1);
    const Piece r = eval(m, worst.b, worst.depth + 1);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    pieces.push_back(l);
    std::push_heap(pieces.begin(), pieces.end(), cmp);
    pieces.push_back(r);
    std::push_heap(pieces.begin(), pieces.end(), cmp);
  }
  total = 0.0;
  err = 0.0;
  for (const auto& p : pieces) total += p.value, err += p.error;
  return {total, err};
}

template <class F>
Estimate gk(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 15,
            double abs_tol = 0.0) {
  if (a == b) return {};
  const double br[2] = {a, b};
  return gk_pieces(f, std::span<const double>(br, 2), rel_tol, max_depth, abs_tol);
}

/// Increasing, deduplicated breakpoints clipped to [lo, hi].
std::vector<double> clean_breaks(std::vector<double> pts, double lo, double hi);

/// Uniform grid of n+1 points on [a, b].
std::vector<double> linspace(double a, double b, std::size_t n);

/// Logarithmic grid from a to b (a, b > 0) with about per_decade points per decade.
std::vector<double> logspace(double a, double b, double per_decade);

/// Composite trapezoid for samples y on abscissae x.
double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace quad
}  // namespace occfluct
