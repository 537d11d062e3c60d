#pragma once

#include "occfluct/samplers.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace occfluct {

struct SampleMeta {
  double T = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  double t1 = std::numeric_limits<double>::quiet_NaN();
  double t2 = std::numeric_limits<double>::quiet_NaN();
  std::string phi_id;
  std::int64_t replicas = 0;
};

struct Sample {
  std::vector<double> values;
  SampleMeta meta;

  std::size_t size() const { return values.size(); }
  /// Throws std::invalid_argument on non-finite values or fewer than min_count values.
  void validate(std::size_t min_count = 100) const;
};

using Complex = std::complex<double>;
using CharFn = std::function<Complex(double)>;

std::vector<Complex> ecf(std::span<const double> x, std::span<const double> z);
/// Symmetric grid +-k z_max / m, k = 1..m (2m points, no 0).
std::vector<double> symmetric_z_grid(double z_max, int m);

struct CfDistance {
  double distance = 0.0;
  double z_at_max = 0.0;
  double threshold = 0.0;  // bootstrap quantile of sup |ECF* - ECF|
  double level = 0.95;
  bool below = false;
};

double cf_distance_value(std::span<const double> x, const CharFn& cf, std::span<const double> z);
CfDistance cf_distance(const Sample& s, const CharFn& cf, std::span<const double> z, std::uint64_t seed,
                       int resamples = 400, double level = 0.95);

struct IndexEstimate {
  bool ok = false;
  std::string message;
  double index = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // bootstrap 95% percentile interval
  double scale = 0.0;               // sigma with |CF(z)| = exp(-(sigma |z|)^index)
  double scale_ci_lo = 0.0, scale_ci_hi = 0.0;
  std::vector<double> z_window;
};

/// Slope of log(-log|ECF(z)|) against log z over z with |ECF| in [lo, hi].
IndexEstimate stability_index_estimate(const Sample& s, std::uint64_t seed, int resamples = 400,
                                       double lo = 0.2, double hi = 0.8, std::size_t min_count = 10000);

struct IndependenceStat {
  double stat = 0.0;
  double threshold = 0.0;  // permutation quantile
  double level = 0.95;
  bool below = false;
};

IndependenceStat increment_independence_stat(std::span<const double> a, std::span<const double> b,
                                             std::span<const double> z, std::uint64_t seed, int resamples = 400,
                                             double level = 0.95);

struct IncrementGroup {
  double T = 0.0, t1 = 0.0, t2 = 0.0;
  std::vector<double> values;
};

struct TailCell {
  double T, t1, t2, delta;
  std::int64_t n, exceed;
  double p_hat;
  double bound_ratio;  // p_hat delta / |t2 - t1|
  bool sparse;
};

struct TailSlope {
  double T, delta, slope;
  int points;
};

struct TailBoundReport {
  std::vector<TailCell> cells;
  std::vector<TailSlope> slopes;
  double C = 0.0;  // smallest C with p_hat <= C |t2 - t1| / delta on every cell
  std::vector<std::pair<double, double>> C_by_T;
  double min_slope = std::numeric_limits<double>::quiet_NaN();
  bool envelope_ok = false;
  bool slope_ok = false;
  bool sparse = false;
  std::vector<std::string> warnings;
};

TailBoundReport tail_bound_check(std::span<const IncrementGroup> groups, std::span<const double> deltas,
                                 double min_slope = 0.9, std::int64_t min_exceed = 10);

struct CalibrationResult {
  std::string test;
  int runs = 0;
  std::size_t n = 0;
  int rejections = 0;
  double nominal = 0.05;
  double rate() const { return runs ? static_cast<double>(rejections) / runs : 0.0; }
  /// |rate - nominal| within the band plus two binomial standard errors.
  bool within(double band) const;
};

/// cf_distance on samples drawn from `law` against its own CF.
CalibrationResult calibrate_cf_distance(const SkewedStableSpec& law, std::size_t n, int runs,
                                        std::span<const double> z, std::uint64_t seed, int resamples = 400);
/// increment_independence_stat on independent skewed-stable pairs.
CalibrationResult calibrate_independence(const SkewedStableSpec& law, std::size_t n, int runs,
                                         std::span<const double> z, std::uint64_t seed, int resamples = 400);

Complex skewed_stable_cf(const SkewedStableSpec& s, double z);

/// Rows "x,y" for plotting.
void write_series(std::ostream& os, std::span<const double> x, std::span<const double> y,
                  const std::string& xname = "x", const std::string& yname = "y");

}  // namespace occfluct
