#pragma once

#include "occfluct/branching_sim.hpp"
#include "occfluct/model.hpp"
#include "occfluct/stable_numerics.hpp"
#include "occfluct/test_function.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace occfluct {

/// Trapezoid rule for int phi(x_s) ds over the segment, optionally clipped
/// to the window [a, b] (window ends must be segment points or outside it).
double accumulate_occupation(const PathSegment& seg, const TestFunction& phi);
double accumulate_occupation(const PathSegment& seg, const TestFunction& phi, double a, double b);

/// The same integral computed in rescaled time u = s / T: T * trapezoid in u.
double accumulate_occupation_rescaled(const PathSegment& seg, const TestFunction& phi, double T);

/// Occupation of each phi_j over every interval of the observation grid,
/// plus optional time-weighted totals sum_j int phi_j(x_s) w_m(s) ds.
class OccupationObserver : public PathObserver {
 public:
  using Weight = std::function<double(double)>;

  OccupationObserver(std::vector<double> grid, std::vector<TestFunction> phis,
                     std::vector<Weight> weights = {});
  void on_segment(const PathSegment& seg) override;

  const std::vector<double>& grid() const { return grid_; }
  /// int_0^{grid[k]} <N_s, phi_j> ds for every grid index k.
  std::vector<double> cumulative(std::size_t j) const;
  /// int_0^t <N_s, phi_j> ds; t must be a grid point.
  double occupation_until(std::size_t j, double t) const;
  /// sum_j int <N_s, phi_j> w_m(s) ds.
  double weighted(std::size_t m) const { return weighted_[m]; }
  std::size_t num_phi() const { return phis_.size(); }

  /// Associative merge of an observer over the same grid.
  void merge(const OccupationObserver& o);

 private:
  std::vector<double> grid_;
  std::vector<TestFunction> phis_;
  std::vector<Weight> weights_;
  std::vector<std::vector<double>> bins_;
  std::vector<double> weighted_;
  std::vector<double> vals_;
};

/// Sum over live particles (alive on [birth, death)) of phi_j at each grid
/// time. Trapezoid weights over these sums give the grid form of the
/// occupation functionals.
class GridPointObserver : public PathObserver {
 public:
  GridPointObserver(std::vector<double> grid, std::vector<TestFunction> phis);
  void on_segment(const PathSegment& seg) override;
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& sums(std::size_t j) const { return sums_[j]; }
  void reset();

 private:
  std::vector<double> grid_;
  std::vector<TestFunction> phis_;
  std::vector<std::vector<double>> sums_;
};

enum class Centering { Exact, Truncated };
std::string_view to_string(Centering c);

/// Mean occupation m(h) = intensity * E int_0^h <N_s, phi> ds.
/// Exact: intensity * lambda(phi) * h (infinite system).
/// Truncated: intensity * int_B int_0^h T_s phi dx ds, the mean of the
/// system whose ancestors lie in box B. Requires the box.
double centering_mean(const StableKernel& k, const ModelParams& p, const TestFunction& phi, double h,
                      Centering mode, const std::optional<Box>& box);

/// intensity * int_{B^c} int_0^h T_s phi dx ds: the occupation mean lost by
/// truncating the initial field to B.
Estimate truncation_bias(const StableKernel& k, const ModelParams& p, const TestFunction& phi, double h,
                         const Box& box);

/// Smallest cube half-width L (to 1%) whose truncation bias is below eps.
double box_half_width_for_budget(const StableKernel& k, const ModelParams& p, const TestFunction& phi,
                                 double horizon, double eps);

/// (occupation_total - mean) / F_T.
double fluctuation_value(double occupation_total, double mean, double F_T);
/// Convenience form computing the mean for <X_T(t), phi> (horizon T t).
double fluctuation_value(const StableKernel& k, double occupation_total, const ModelParams& p,
                         const TestFunction& phi, double T, double t, double F_T, Centering mode,
                         const std::optional<Box>& box);

/// int_0^1 <X_T(t), phi> psi(t) dt with <X_T(., phi)> linearly interpolated
/// between the grid points t_grid (which must span [0, 1]). A point-mass
/// profile at t1 returns the value at t1.
double spacetime_pairing(std::span<const double> t_grid, std::span<const double> values,
                         const TimeProfile& psi);

struct FluctuationRecord {
  std::int64_t replica = 0;
  double T = 0.0;
  std::vector<double> t_grid;
  std::vector<double> values;
  std::optional<double> pairing;
  double bias_bound = 0.0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// Rows "replica,T,t,value,bias_bound,seed" (one per t).
void write_fluctuation_rows(std::ostream& os, const FluctuationRecord& r);

}  // namespace occfluct
