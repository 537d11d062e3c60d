#pragma once

#include "occfluct/model.hpp"
#include "occfluct/samplers.hpp"
#include "occfluct/stable_numerics.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace occfluct {

/// One particle's path between birth and min(death, horizon), sampled at
/// the birth time, every observation-grid time strictly inside that
/// interval, and the end time. positions has times.size() * d entries.
struct PathSegment {
  std::uint64_t id = 0;
  std::uint64_t parent = 0;  // 0 for ancestors
  double birth = 0.0;
  double death = 0.0;  // may exceed the horizon
  std::span<const double> times;
  std::span<const double> positions;
  int d = 1;

  std::span<const double> position(std::size_t i) const { return positions.subspan(i * d, d); }
};

class PathObserver {
 public:
  virtual ~PathObserver() = default;
  /// Called exactly once per particle.
  virtual void on_segment(const PathSegment& seg) = 0;
};

/// Counts live particles at the observation-grid times.
class PopulationObserver : public PathObserver {
 public:
  explicit PopulationObserver(std::vector<double> grid);
  void on_segment(const PathSegment& seg) override;
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<std::int64_t>& live() const { return live_; }
  /// Ancestral lines still alive at each grid time (extinction diagnostic
  /// for single-ancestor runs): 1 if any particle is alive.
  std::vector<int> survived() const;

 private:
  std::vector<double> grid_;
  std::vector<std::int64_t> live_;
};

struct SimCounters {
  std::int64_t initial = 0;
  std::int64_t births = 0;
  std::int64_t deaths = 0;  // deaths before the horizon
  std::int64_t max_population = 0;
  std::int64_t increments = 0;
};

class PopulationExplosion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimOptions {
  /// Sorted observation grid in [0, horizon]; should contain 0 and horizon.
  std::vector<double> grid;
  std::int64_t max_population = 20'000'000;
  std::int64_t offspring_table = 4096;
  std::ostream* event_log = nullptr;  // "time,event,id,position..." rows
};

/// Uniform grid k * step on [0, horizon] with the extra points merged in.
std::vector<double> observation_grid(double horizon, double step, std::span<const double> extra = {});

/// Poisson(intensity * Lebesgue) ancestors in `box`, simulated to `horizon`.
SimCounters run_population(const ModelParams& p, const Box& box, double horizon,
                           const SimOptions& opt, std::span<PathObserver* const> observers,
                           RandomStream& rng);

/// One ancestor at x.
SimCounters run_single_ancestor(const ModelParams& p, std::span<const double> x, double horizon,
                                const SimOptions& opt, std::span<PathObserver* const> observers,
                                RandomStream& rng);

/// Positions at the given times of a path started at x0 at times.front();
/// times must be nondecreasing. Returns times.size() * d values.
std::vector<double> path_positions(const IncrementSampler& inc, std::span<const double> x0,
                                   std::span<const double> times, RandomStream& rng);

}  // namespace occfluct
