#include "occfluct/branching_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <queue>

namespace occfluct {

PopulationObserver::PopulationObserver(std::vector<double> grid)
    : grid_(std::move(grid)), live_(grid_.size(), 0) {}

void PopulationObserver::on_segment(const PathSegment& seg) {
  // alive on [birth, death)
  auto lo = std::lower_bound(grid_.begin(), grid_.end(), seg.birth);
  auto hi = std::lower_bound(grid_.begin(), grid_.end(), seg.death);
  for (auto it = lo; it != hi; ++it) ++live_[it - grid_.begin()];
}

std::vector<int> PopulationObserver::survived() const {
  std::vector<int> out(live_.size());
  for (std::size_t i = 0; i < live_.size(); ++i) out[i] = live_[i] > 0;
  return out;
}

std::vector<double> observation_grid(double horizon, double step, std::span<const double> extra) {
  if (!(horizon > 0.0) || !(step > 0.0)) throw std::invalid_argument("grid needs horizon > 0 and step > 0");
  const auto n = static_cast<std::int64_t>(std::ceil(horizon / step - 1e-9));
  std::vector<double> g;
  g.reserve(n + 1 + extra.size());
  for (std::int64_t k = 0; k < n; ++k) g.push_back(k * step);
  g.push_back(horizon);
  for (double e : extra)
    if (e >= 0.0 && e <= horizon) g.push_back(e);
  std::sort(g.begin(), g.end());
  // merge points closer than a rounding error so segments stay well formed
  std::vector<double> out;
  for (double t : g)
    if (out.empty() || t - out.back() > 1e-12 * std::max(1.0, horizon)) out.push_back(t);
    else if (t == horizon || std::find(extra.begin(), extra.end(), t) != extra.end()) out.back() = t;
  return out;
}

std::vector<double> path_positions(const IncrementSampler& inc, std::span<const double> x0,
                                   std::span<const double> times, RandomStream& rng) {
  const int d = inc.dimension();
  std::vector<double> pos(times.size() * d);
  if (times.empty()) return pos;
  std::copy(x0.begin(), x0.begin() + d, pos.begin());
  std::vector<double> dx(d);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    if (dt > 0.0) {
      inc.sample(dt, rng, dx);
      for (int j = 0; j < d; ++j) pos[i * d + j] = pos[(i - 1) * d + j] + dx[j];
    } else {
      for (int j = 0; j < d; ++j) pos[i * d + j] = pos[(i - 1) * d + j];
    }
  }
  return pos;
}

namespace {

std::shared_ptr<const OffspringLaw> shared_law(double beta, std::int64_t k_max) {
  static std::mutex mu;
  static std::map<std::pair<double, std::int64_t>, std::shared_ptr<const OffspringLaw>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{beta, k_max}];
  if (!slot) slot = std::make_shared<const OffspringLaw>(OffspringLaw::build(beta, k_max));
  return slot;
}

struct Pending {
  double death;
  double birth;
  std::uint64_t id;
  std::uint64_t parent;
  std::size_t slot;  // index into the position store
};

struct LaterDeath {
  bool operator()(const Pending& a, const Pending& b) const {
    if (a.death != b.death) return a.death > b.death;
    return a.id > b.id;
  }
};

class Simulator {
 public:
  Simulator(const ModelParams& p, double horizon, const SimOptions& opt,
            std::span<PathObserver* const> obs, RandomStream& rng)
      : p_(p), h_(horizon), opt_(opt), obs_(obs), rng_(rng), inc_(p.d, p.alpha) {
    p.validate_for_simulation();
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (opt.grid.empty()) throw std::invalid_argument("observation grid is empty");
    if (p.V > 0.0) law_ = shared_law(p.beta, opt.offspring_table);
  }

  void add(std::span<const double> x, double birth, std::uint64_t parent) {
    std::size_t slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
      std::copy(x.begin(), x.end(), store_.begin() + slot * p_.d);
    } else {
      slot = store_.size() / p_.d;
      store_.insert(store_.end(), x.begin(), x.end());
    }
    const double death = p_.V > 0.0 ? birth + rng_.exponential() / p_.V
                                    : std::numeric_limits<double>::infinity();
    queue_.push(Pending{death, birth, ++next_id_, parent, slot});
    const auto n = static_cast<std::int64_t>(queue_.size());
    c_.max_population = std::max(c_.max_population, n);
    if (n > opt_.max_population)
      throw PopulationExplosion("population exceeded " + std::to_string(opt_.max_population) +
                                " at t=" + std::to_string(birth));
    log("birth", birth, next_id_, x);
  }

  void run() {
    const int d = p_.d;
    std::vector<double> times, x0(d), child(d);
    while (!queue_.empty()) {
      const Pending q = queue_.top();
      queue_.pop();
      const double end = std::min(q.death, h_);
      times.clear();
      times.push_back(q.birth);
      for (auto it = std::upper_bound(opt_.grid.begin(), opt_.grid.end(), q.birth);
           it != opt_.grid.end() && *it < end; ++it)
        times.push_back(*it);
      if (end > q.birth) times.push_back(end);
      std::copy(store_.begin() + q.slot * d, store_.begin() + (q.slot + 1) * d, x0.begin());
      free_.push_back(q.slot);
      const std::vector<double> pos = path_positions(inc_, x0, times, rng_);
      c_.increments += static_cast<std::int64_t>(times.size()) - 1;

      PathSegment seg;
      seg.id = q.id;
      seg.parent = q.parent;
      seg.birth = q.birth;
      seg.death = q.death;
      seg.times = times;
      seg.positions = pos;
      seg.d = d;
      for (PathObserver* o : obs_) o->on_segment(seg);

      if (q.death >= h_) continue;
      ++c_.deaths;
      const std::span<const double> at(pos.data() + (times.size() - 1) * d, d);
      log("death", q.death, q.id, at);
      const std::int64_t k = sample_offspring(*law_, rng_);
      for (std::int64_t j = 0; j < k; ++j) {
        add(at, q.death, q.id);
        ++c_.births;
      }
    }
  }

  SimCounters counters() const { return c_; }
  void count_initial() { ++c_.initial; }

 private:
  void log(const char* what, double t, std::uint64_t id, std::span<const double> x) {
    if (!opt_.event_log) return;
    auto& os = *opt_.event_log;
    os << t << ',' << what << ',' << id;
    for (double v : x) os << ',' << v;
    os << '\n';
  }

  const ModelParams& p_;
  double h_;
  const SimOptions& opt_;
  std::span<PathObserver* const> obs_;
  RandomStream& rng_;
  IncrementSampler inc_;
  std::shared_ptr<const OffspringLaw> law_;
  std::priority_queue<Pending, std::vector<Pending>, LaterDeath> queue_;
  std::vector<double> store_;
  std::vector<std::size_t> free_;
  std::uint64_t next_id_ = 0;
  SimCounters c_;
};

}  // namespace

SimCounters run_population(const ModelParams& p, const Box& box, double horizon, const SimOptions& opt,
                           std::span<PathObserver* const> observers, RandomStream& rng) {
  if (box.dimension() != p.d) throw std::invalid_argument("box dimension does not match d");
  Simulator sim(p, horizon, opt, observers, rng);
  const std::vector<double> pts = sample_poisson_field(p.intensity, box, rng);
  for (std::size_t i = 0; i < pts.size(); i += p.d) {
    sim.add(std::span<const double>(pts.data() + i, p.d), 0.0, 0);
    sim.count_initial();
  }
  sim.run();
  return sim.counters();
}

SimCounters run_single_ancestor(const ModelParams& p, std::span<const double> x, double horizon,
                                const SimOptions& opt, std::span<PathObserver* const> observers,
                                RandomStream& rng) {
  if (static_cast<int>(x.size()) != p.d) throw std::invalid_argument("start point dimension does not match d");
  Simulator sim(p, horizon, opt, observers, rng);
  sim.add(x, 0.0, 0);
  sim.count_initial();
  sim.run();
  return sim.counters();
}

}  // namespace occfluct
