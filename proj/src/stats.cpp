#include "occfluct/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace occfluct {

namespace {

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

double iqr(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  return quantile(v, 0.75) - quantile(std::move(v), 0.25);
}

/// cos and sin of z_k x_j, laid out [k][j].
struct Phases {
  std::size_t n = 0, m = 0;
  std::vector<double> c, s;
  Phases(std::span<const double> x, std::span<const double> z) : n(x.size()), m(z.size()), c(n * m), s(n * m) {
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        c[k * n + j] = std::cos(z[k] * x[j]);
        s[k * n + j] = std::sin(z[k] * x[j]);
      }
  }
  /// ECF with integer resampling counts (empty = plain sample).
  Complex mean(std::size_t k, std::span<const std::uint32_t> counts) const {
    double re = 0.0, im = 0.0;
    const double* ck = &c[k * n];
    const double* sk = &s[k * n];
    if (counts.empty()) {
      for (std::size_t j = 0; j < n; ++j) {
        re += ck[j];
        im += sk[j];
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        re += counts[j] * ck[j];
        im += counts[j] * sk[j];
      }
    }
    return {re / static_cast<double>(n), im / static_cast<double>(n)};
  }
};

void resample_counts(std::size_t n, RandomStream& rng, std::vector<std::uint32_t>& counts) {
  counts.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    if (j >= n) j = n - 1;
    ++counts[j];
  }
}

}  // namespace

void Sample::validate(std::size_t min_count) const {
  if (values.size() < min_count) {
    std::ostringstream os;
    os << "sample has " << values.size() << " values; at least " << min_count << " needed";
    throw std::invalid_argument(os.str());
  }
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("sample contains a non-finite value");
}

std::vector<Complex> ecf(std::span<const double> x, std::span<const double> z) {
  if (x.empty()) throw std::invalid_argument("ecf of an empty sample");
  std::vector<Complex> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    double re = 0.0, im = 0.0;
    for (double v : x) {
      re += std::cos(z[k] * v);
      im += std::sin(z[k] * v);
    }
    out[k] = {re / static_cast<double>(x.size()), im / static_cast<double>(x.size())};
  }
  return out;
}

std::vector<double> symmetric_z_grid(double z_max, int m) {
  if (!(z_max > 0.0) || m < 1) throw std::invalid_argument("z grid needs z_max > 0 and m >= 1");
  std::vector<double> z;
  for (int i = 1; i <= m; ++i) {
    const double v = z_max * i / m;
    z.push_back(-v);
    z.push_back(v);
  }
  std::sort(z.begin(), z.end());
  return z;
}

double cf_distance_value(std::span<const double> x, const CharFn& cf, std::span<const double> z) {
  const auto e = ecf(x, z);
  double d = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) d = std::max(d, std::abs(e[k] - cf(z[k])));
  return d;
}

CfDistance cf_distance(const Sample& s, const CharFn& cf, std::span<const double> z, std::uint64_t seed,
                       int resamples, double level) {
  s.validate();
  if (z.empty()) throw std::invalid_argument("empty z grid");
  CfDistance out;
  out.level = level;
  const Phases ph(s.values, z);
  std::vector<Complex> base(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    base[k] = ph.mean(k, {});
    const double d = std::abs(base[k] - cf(z[k]));
    if (d > out.distance) {
      out.distance = d;
      out.z_at_max = z[k];
    }
  }
  std::vector<double> sups;
  std::vector<std::uint32_t> counts;
  for (int b = 0; b < resamples; ++b) {
    RandomStream rng(seed, static_cast<std::uint64_t>(b));
    resample_counts(s.size(), rng, counts);
    double sup = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) sup = std::max(sup, std::abs(ph.mean(k, counts) - base[k]));
    sups.push_back(sup);
  }
  out.threshold = quantile(std::move(sups), level);
  out.below = out.distance <= out.threshold;
  return out;
}

namespace {

struct Fit {
  double slope, intercept;
};

Fit ols(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double b = sxy / sxx;
  return {b, my - b * mx};
}

}  // namespace

IndexEstimate stability_index_estimate(const Sample& s, std::uint64_t seed, int resamples, double lo, double hi,
                                       std::size_t min_count) {
  s.validate(min_count);
  IndexEstimate out;
  const double spread = iqr(s.values);
  if (!(spread > 0.0)) {
    out.message = "sample has zero interquartile range";
    return out;
  }
  std::vector<double> zs;
  for (int k = -48; k <= 48; ++k) zs.push_back(std::pow(10.0, k / 16.0) / spread);
  const auto e = ecf(s.values, zs);
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const double a = std::abs(e[k]);
    if (a >= lo && a <= hi) out.z_window.push_back(zs[k]);
  }
  if (out.z_window.size() < 4) {
    std::ostringstream os;
    os << "degenerate z-window: " << out.z_window.size() << " grid points with |ECF| in [" << lo << ", " << hi << "]";
    out.message = os.str();
    return out;
  }
  const Phases ph(s.values, out.z_window);
  std::vector<double> lx(out.z_window.size()), ly(out.z_window.size());
  auto fit_counts = [&](std::span<const std::uint32_t> counts, Fit& f) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < out.z_window.size(); ++k) {
      const double a = std::abs(ph.mean(k, counts));
      if (!(a > 0.0 && a < 1.0)) continue;
      xs.push_back(std::log(out.z_window[k]));
      ys.push_back(std::log(-std::log(a)));
    }
    if (xs.size() < 3) return false;
    f = ols(xs, ys);
    return true;
  };
  Fit f{};
  fit_counts({}, f);
  out.index = f.slope;
  out.scale = std::exp(f.intercept / f.slope);
  std::vector<double> idx, sc;
  std::vector<std::uint32_t> counts;
  for (int b = 0; b < resamples; ++b) {
    RandomStream rng(seed, static_cast<std::uint64_t>(b));
    resample_counts(s.size(), rng, counts);
    Fit fb{};
    if (!fit_counts(counts, fb)) continue;
    idx.push_back(fb.slope);
    sc.push_back(std::exp(fb.intercept / fb.slope));
  }
  if (!idx.empty()) {
    out.ci_lo = quantile(idx, 0.025);
    out.ci_hi = quantile(idx, 0.975);
    out.scale_ci_lo = quantile(sc, 0.025);
    out.scale_ci_hi = quantile(sc, 0.975);
  }
  out.ok = true;
  return out;
}

IndependenceStat increment_independence_stat(std::span<const double> a, std::span<const double> b,
                                             std::span<const double> z, std::uint64_t seed, int resamples,
                                             double level) {
  if (a.size() != b.size()) throw std::invalid_argument("increment pairs need equal lengths");
  if (a.size() < 100) throw std::invalid_argument("independence test needs at least 100 pairs");
  if (z.empty()) throw std::invalid_argument("empty z grid");
  const std::size_t n = a.size(), m = z.size();
  // each coordinate is measured in units of its own interquartile range
  const double sa = iqr(a), sb = iqr(b);
  std::vector<double> za(m), zb(m);
  for (std::size_t k = 0; k < m; ++k) {
    za[k] = sa > 0.0 ? z[k] / sa : z[k];
    zb[k] = sb > 0.0 ? z[k] / sb : z[k];
  }
  const Phases pa(a, za), pb(b, zb);
  std::vector<Complex> ea(m), eb(m);
  for (std::size_t k = 0; k < m; ++k) {
    ea[k] = pa.mean(k, {});
    eb[k] = pb.mean(k, {});
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < n; ++j) perm[j] = j;
  auto stat_for = [&](const std::vector<std::size_t>& pi) {
    double sup = 0.0;
    for (std::size_t k1 = 0; k1 < m; ++k1) {
      const double* ca = &pa.c[k1 * n];
      const double* sa_ = &pa.s[k1 * n];
      for (std::size_t k2 = 0; k2 < m; ++k2) {
        const double* cb = &pb.c[k2 * n];
        const double* sb_ = &pb.s[k2 * n];
        double re = 0.0, im = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t i = pi[j];
          re += ca[j] * cb[i] - sa_[j] * sb_[i];
          im += ca[j] * sb_[i] + sa_[j] * cb[i];
        }
        const Complex joint(re / static_cast<double>(n), im / static_cast<double>(n));
        sup = std::max(sup, std::abs(joint - ea[k1] * eb[k2]));
      }
    }
    return sup;
  };
  IndependenceStat out;
  out.level = level;
  out.stat = stat_for(perm);
  std::vector<double> null;
  for (int r = 0; r < resamples; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    for (std::size_t j = 0; j < n; ++j) perm[j] = j;
    for (std::size_t j = n - 1; j > 0; --j) {
      auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(j + 1));
      if (k > j) k = j;
      std::swap(perm[j], perm[k]);
    }
    null.push_back(stat_for(perm));
  }
  out.threshold = quantile(std::move(null), level);
  out.below = out.stat <= out.threshold;
  return out;
}

TailBoundReport tail_bound_check(std::span<const IncrementGroup> groups, std::span<const double> deltas,
                                 double min_slope, std::int64_t min_exceed) {
  TailBoundReport rep;
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  std::map<double, double> c_by_T;
  for (const auto& g : groups) {
    if (!(g.T >= 2.0)) throw std::invalid_argument("tail bound check needs T >= 2");
    if (g.t1 < 0.0 || g.t2 > 1.0 || g.t1 > g.t2) throw std::invalid_argument("need 0 <= t1 <= t2 <= 1");
    const double h = g.t2 - g.t1;
    for (double d : deltas) {
      TailCell c{g.T, g.t1, g.t2, d, static_cast<std::int64_t>(g.values.size()), 0, 0.0, 0.0, false};
      for (double v : g.values)
        if (std::abs(v) > d) ++c.exceed;
      c.p_hat = c.n ? static_cast<double>(c.exceed) / static_cast<double>(c.n) : 0.0;
      if (h > 0.0) {
        c.bound_ratio = c.p_hat * d / h;
      } else if (c.exceed > 0) {
        c.bound_ratio = std::numeric_limits<double>::infinity();
        rep.warnings.push_back("nonzero exceedance at t1 == t2");
      }
      c.sparse = h > 0.0 && c.exceed < min_exceed;
      rep.sparse = rep.sparse || c.sparse;
      rep.C = std::max(rep.C, c.bound_ratio);
      c_by_T[g.T] = std::max(c_by_T[g.T], c.bound_ratio);
      rep.cells.push_back(c);
    }
  }
  for (const auto& [T, C] : c_by_T) rep.C_by_T.emplace_back(T, C);
  if (rep.sparse) rep.warnings.push_back("some cells have fewer than " + std::to_string(min_exceed) +
                                         " exceedances; increase replicas");
  std::map<std::pair<double, double>, std::vector<const TailCell*>> by;
  for (const auto& c : rep.cells)
    if (c.t2 > c.t1 && c.exceed > 0) by[{c.T, c.delta}].push_back(&c);
  for (const auto& [key, cells] : by) {
    std::map<double, std::pair<double, int>> per_h;  // average p_hat over equal lengths
    for (const auto* c : cells) {
      auto& e = per_h[c->t2 - c->t1];
      e.first += c->p_hat;
      ++e.second;
    }
    if (per_h.size() < 2) continue;
    std::vector<double> xs, ys;
    for (const auto& [h, e] : per_h) {
      xs.push_back(std::log(h));
      ys.push_back(std::log(e.first / e.second));
    }
    const Fit f = ols(xs, ys);
    rep.slopes.push_back({key.first, key.second, f.slope, static_cast<int>(xs.size())});
    if (std::isnan(rep.min_slope) || f.slope < rep.min_slope) rep.min_slope = f.slope;
  }
  rep.envelope_ok = std::isfinite(rep.C);
  rep.slope_ok = !std::isnan(rep.min_slope) && rep.min_slope >= min_slope;
  if (rep.slopes.empty()) rep.warnings.push_back("no (T, delta) pair has two lengths with exceedances");
  return rep;
}

bool CalibrationResult::within(double band) const {
  const double se = std::sqrt(nominal * (1.0 - nominal) / std::max(runs, 1));
  return std::abs(rate() - nominal) <= band + 2.0 * se;
}

Complex skewed_stable_cf(const SkewedStableSpec& s, double z) {
  if (z == 0.0) return 1.0;
  const double m = std::pow(s.scale * std::abs(z), s.index);
  const double sg = z > 0.0 ? 1.0 : -1.0;
  const double tilt = s.index == 1.0 ? 0.0 : m * s.skewness * sg * std::tan(std::numbers::pi * s.index / 2.0);
  return std::exp(Complex(-m, tilt + s.location * z));
}

CalibrationResult calibrate_cf_distance(const SkewedStableSpec& law, std::size_t n, int runs,
                                        std::span<const double> z, std::uint64_t seed, int resamples) {
  CalibrationResult out;
  out.test = "cf_distance";
  out.runs = runs;
  out.n = n;
  const CharFn cf = [&](double zz) { return skewed_stable_cf(law, zz); };
  for (int r = 0; r < runs; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    Sample s;
    s.values.resize(n);
    for (auto& v : s.values) v = sample_skewed_stable(law, rng);
    const CfDistance d = cf_distance(s, cf, z, seed ^ 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(r), resamples);
    if (!d.below) ++out.rejections;
  }
  return out;
}

CalibrationResult calibrate_independence(const SkewedStableSpec& law, std::size_t n, int runs,
                                         std::span<const double> z, std::uint64_t seed, int resamples) {
  CalibrationResult out;
  out.test = "increment_independence";
  out.runs = runs;
  out.n = n;
  for (int r = 0; r < runs; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = sample_skewed_stable(law, rng);
    for (auto& v : b) v = sample_skewed_stable(law, rng);
    const auto st =
        increment_independence_stat(a, b, z, seed ^ 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(r), resamples);
    if (!st.below) ++out.rejections;
  }
  return out;
}

void write_series(std::ostream& os, std::span<const double> x, std::span<const double> y, const std::string& xname,
                  const std::string& yname) {
  if (x.size() != y.size()) throw std::invalid_argument("series lengths differ");
  const auto old = os.precision(17);
  os << xname << ',' << yname << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) os << x[i] << ',' << y[i] << '\n';
  os.precision(old);
}

}  // namespace occfluct
