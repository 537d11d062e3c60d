#include "occfluct/occupation.hpp"

#include "occfluct/log.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace occfluct {

double accumulate_occupation(const PathSegment& seg, const TestFunction& phi) {
  double s = 0.0;
  if (phi.is_zero()) return 0.0;
  double prev = phi(seg.position(0));
  for (std::size_t i = 1; i < seg.times.size(); ++i) {
    const double cur = phi(seg.position(i));
    s += 0.5 * (seg.times[i] - seg.times[i - 1]) * (prev + cur);
    prev = cur;
  }
  return s;
}

double accumulate_occupation(const PathSegment& seg, const TestFunction& phi, double a, double b) {
  double s = 0.0;
  if (phi.is_zero()) return 0.0;
  for (std::size_t i = 1; i < seg.times.size(); ++i) {
    const double t0 = seg.times[i - 1], t1 = seg.times[i];
    if (t0 < a || t1 > b) continue;
    s += 0.5 * (t1 - t0) * (phi(seg.position(i - 1)) + phi(seg.position(i)));
  }
  return s;
}

double accumulate_occupation_rescaled(const PathSegment& seg, const TestFunction& phi, double T) {
  double s = 0.0;
  if (phi.is_zero()) return 0.0;
  for (std::size_t i = 1; i < seg.times.size(); ++i) {
    const double du = seg.times[i] / T - seg.times[i - 1] / T;
    s += 0.5 * du * (phi(seg.position(i - 1)) + phi(seg.position(i)));
  }
  return T * s;
}

OccupationObserver::OccupationObserver(std::vector<double> grid, std::vector<TestFunction> phis,
                                       std::vector<Weight> weights)
    : grid_(std::move(grid)), phis_(std::move(phis)), weights_(std::move(weights)) {
  if (grid_.size() < 2) throw std::invalid_argument("occupation grid needs two points");
  bins_.assign(phis_.size(), std::vector<double>(grid_.size() - 1, 0.0));
  weighted_.assign(weights_.size(), 0.0);
}

void OccupationObserver::on_segment(const PathSegment& seg) {
  const std::size_t n = seg.times.size();
  if (n < 2) return;
  std::size_t bin = std::upper_bound(grid_.begin(), grid_.end(), seg.times[0]) - grid_.begin();
  bin = bin == 0 ? 0 : bin - 1;
  const std::size_t np = phis_.size();
  vals_.resize(n * np);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < np; ++j) vals_[i * np + j] = phis_[j](seg.position(i));
  std::vector<double> w(weights_.size() * 2);
  for (std::size_t m = 0; m < weights_.size(); ++m) w[2 * m + 1] = weights_[m](seg.times[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = seg.times[i] - seg.times[i - 1];
    while (bin + 1 < grid_.size() - 1 && grid_[bin + 1] <= seg.times[i - 1]) ++bin;
    double phisum0 = 0.0, phisum1 = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
      const double a = vals_[(i - 1) * np + j], b = vals_[i * np + j];
      bins_[j][bin] += 0.5 * dt * (a + b);
      phisum0 += a;
      phisum1 += b;
    }
    for (std::size_t m = 0; m < weights_.size(); ++m) {
      w[2 * m] = w[2 * m + 1];
      w[2 * m + 1] = weights_[m](seg.times[i]);
      weighted_[m] += 0.5 * dt * (phisum0 * w[2 * m] + phisum1 * w[2 * m + 1]);
    }
  }
}

std::vector<double> OccupationObserver::cumulative(std::size_t j) const {
  std::vector<double> c(grid_.size(), 0.0);
  for (std::size_t k = 1; k < grid_.size(); ++k) c[k] = c[k - 1] + bins_[j][k - 1];
  return c;
}

double OccupationObserver::occupation_until(std::size_t j, double t) const {
  auto it = std::lower_bound(grid_.begin(), grid_.end(), t - 1e-12 * std::max(1.0, std::abs(t)));
  if (it == grid_.end() || std::abs(*it - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw std::invalid_argument("occupation requested off the observation grid");
  const std::size_t k = it - grid_.begin();
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += bins_[j][i];
  return s;
}

void OccupationObserver::merge(const OccupationObserver& o) {
  if (o.grid_ != grid_ || o.bins_.size() != bins_.size() || o.weighted_.size() != weighted_.size())
    throw std::invalid_argument("cannot merge occupation observers over different layouts");
  for (std::size_t j = 0; j < bins_.size(); ++j)
    for (std::size_t k = 0; k < bins_[j].size(); ++k) bins_[j][k] += o.bins_[j][k];
  for (std::size_t m = 0; m < weighted_.size(); ++m) weighted_[m] += o.weighted_[m];
}

GridPointObserver::GridPointObserver(std::vector<double> grid, std::vector<TestFunction> phis)
    : grid_(std::move(grid)), phis_(std::move(phis)) {
  reset();
}

void GridPointObserver::reset() { sums_.assign(phis_.size(), std::vector<double>(grid_.size(), 0.0)); }

void GridPointObserver::on_segment(const PathSegment& seg) {
  for (std::size_t i = 0; i < seg.times.size(); ++i) {
    const double t = seg.times[i];
    if (t < seg.birth || t >= seg.death) continue;
    auto it = std::lower_bound(grid_.begin(), grid_.end(), t);
    if (it == grid_.end() || *it != t) continue;
    const std::size_t k = it - grid_.begin();
    for (std::size_t j = 0; j < phis_.size(); ++j) sums_[j][k] += phis_[j](seg.position(i));
  }
}

std::string_view to_string(Centering c) { return c == Centering::Exact ? "exact" : "truncated"; }

Estimate truncation_bias(const StableKernel& k, const ModelParams& p, const TestFunction& phi, double h,
                         const Box& box) {
  if (h <= 0.0 || p.intensity == 0.0) return {0.0, 0.0};
  Estimate e = box_deficit_integral(k, h, phi, box);
  return {p.intensity * e.value, p.intensity * e.abs_error};
}

double centering_mean(const StableKernel& k, const ModelParams& p, const TestFunction& phi, double h,
                      Centering mode, const std::optional<Box>& box) {
  const double full = p.intensity * phi.integral() * h;
  if (mode == Centering::Exact) return full;
  if (!box) throw std::invalid_argument("truncated centering needs the simulation box");
  return full - truncation_bias(k, p, phi, h, *box).value;
}

double box_half_width_for_budget(const StableKernel& k, const ModelParams& p, const TestFunction& phi,
                                 double horizon, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("truncation budget must be positive");
  auto bias = [&](double L) {
    const Estimate e = truncation_bias(k, p, phi, horizon, Box::cube(p.d, L));
    return e.value + e.abs_error;
  };
  double lo = 1.0, hi = 2.0;
  while (bias(hi) > eps) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e9) {
      std::ostringstream os;
      os << "no box meets the truncation budget " << eps << ": bias " << bias(hi) << " at half-width " << hi;
      throw std::runtime_error(os.str());
    }
  }
  if (bias(lo) <= eps) return lo;
  while (hi - lo > 0.01 * lo) {
    const double mid = 0.5 * (lo + hi);
    (bias(mid) > eps ? lo : hi) = mid;
  }
  return hi;
}

double fluctuation_value(double occupation_total, double mean, double F_T) {
  if (!(F_T > 0.0)) throw std::invalid_argument("F_T must be positive");
  return (occupation_total - mean) / F_T;
}

double fluctuation_value(const StableKernel& k, double occupation_total, const ModelParams& p,
                         const TestFunction& phi, double T, double t, double F_T, Centering mode,
                         const std::optional<Box>& box) {
  return fluctuation_value(occupation_total, centering_mean(k, p, phi, T * t, mode, box), F_T);
}

double spacetime_pairing(std::span<const double> t_grid, std::span<const double> values,
                         const TimeProfile& psi) {
  if (t_grid.size() != values.size() || t_grid.size() < 2)
    throw std::invalid_argument("pairing needs matching grids with at least two points");
  if (psi.is_zero()) return 0.0;
  auto interp = [&](double t) {
    auto it = std::upper_bound(t_grid.begin(), t_grid.end(), t);
    if (it == t_grid.begin()) return values.front();
    if (it == t_grid.end()) return values.back();
    const std::size_t i = it - t_grid.begin();
    const double w = (t - t_grid[i - 1]) / (t_grid[i] - t_grid[i - 1]);
    return (1.0 - w) * values[i - 1] + w * values[i];
  };
  if (psi.kind() == TimeProfile::Kind::PointMass) return interp(psi.breakpoints().front());

  double hmax = 0.0;
  for (std::size_t i = 1; i < t_grid.size(); ++i) hmax = std::max(hmax, t_grid[i] - t_grid[i - 1]);
  std::vector<double> nodes(t_grid.begin(), t_grid.end());
  for (double b : psi.breakpoints()) {
    nodes.push_back(b);
    if (std::find(t_grid.begin(), t_grid.end(), b) == t_grid.end())
      log::warn("time profile ", psi.describe(), " has a kink at t=", b, " off the pairing grid");
  }
  if (psi.kind() == TimeProfile::Kind::Bump && psi.breakpoints().size() == 3) {
    const auto bp = psi.breakpoints();
    if ((bp[2] - bp[0]) / 6.0 < 2.0 * hmax)
      log::warn("time profile ", psi.describe(), " varies faster than the pairing grid (step ", hmax, ")");
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  // 5-point Gauss-Legendre on each piece; exact for linear * polynomial of degree <= 8
  static const double x5[] = {0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                              -0.9061798459386640};
  static const double w5[] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                              0.2369268850561891, 0.2369268850561891};
  double s = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double a = std::max(nodes[i - 1], 0.0), b = std::min(nodes[i], 1.0);
    if (b <= a) continue;
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    for (int q = 0; q < 5; ++q) {
      const double t = c + r * x5[q];
      s += r * w5[q] * interp(t) * psi.psi(t);
    }
  }
  return s;
}

void write_fluctuation_rows(std::ostream& os, const FluctuationRecord& r) {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < r.t_grid.size(); ++i)
    os << r.replica << ',' << r.T << ',' << r.t_grid[i] << ',' << r.values[i] << ',' << r.bias_bound << ','
       << r.seed << '\n';
  os.precision(old);
}

}  // namespace occfluct
