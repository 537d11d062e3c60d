#include "occfluct/laplace_verify.hpp"

#include "occfluct/branching_sim.hpp"
#include "occfluct/limit_laws.hpp"
#include "occfluct/log.hpp"
#include "occfluct/occupation.hpp"
#include "occfluct/quadrature.hpp"
#include "occfluct/samplers.hpp"

#include <fftw3.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

namespace occfluct {

using std::numbers::pi;

namespace {

constexpr double kInvariantTol = 1e-8;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// T_h on a periodic grid of n points and spacing dx.
class PeriodicSemigroup {
 public:
  PeriodicSemigroup(std::size_t n, double dx, double alpha) : n_(n), dx_(dx), alpha_(alpha) {
    re_ = fftw_alloc_real(n_);
    co_ = fftw_alloc_complex(n_ / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), re_, co_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), co_, re_, FFTW_ESTIMATE);
  }
  ~PeriodicSemigroup() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(fwd_);
      fftw_destroy_plan(bwd_);
    }
    fftw_free(re_);
    fftw_free(co_);
  }
  PeriodicSemigroup(const PeriodicSemigroup&) = delete;
  PeriodicSemigroup& operator=(const PeriodicSemigroup&) = delete;

  void set_step(double h) {
    const double L = static_cast<double>(n_) * dx_;
    mult_.resize(n_ / 2 + 1);
    for (std::size_t m = 0; m < mult_.size(); ++m) {
      const double k = 2.0 * pi * static_cast<double>(m) / L;
      mult_[m] = std::exp(-h * std::pow(k, alpha_)) / static_cast<double>(n_);
    }
  }

  void apply(std::vector<double>& f) {
    std::copy(f.begin(), f.end(), re_);
    fftw_execute(fwd_);
    for (std::size_t m = 0; m < mult_.size(); ++m) {
      co_[m][0] *= mult_[m];
      co_[m][1] *= mult_[m];
    }
    fftw_execute(bwd_);
    std::copy(re_, re_ + n_, f.begin());
  }

 private:
  std::size_t n_;
  double dx_, alpha_;
  double* re_ = nullptr;
  fftw_complex* co_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
  std::vector<double> mult_;
};

/// y = a + (h/2) (g (1 - y) - c y^q), y >= 0.
double local_newton(double a, double g, double c, double q, double h, int max_iter) {
  double y = std::max(a, 0.0);
  for (int it = 0; it < max_iter; ++it) {
    const double yq1 = y > 0.0 ? std::pow(y, q - 1.0) : 0.0;
    const double G = y - a - 0.5 * h * (g * (1.0 - y) - c * y * yq1);
    const double dG = 1.0 + 0.5 * h * (g + c * q * yq1);
    double next = y - G / dG;
    if (next < 0.0) next = 0.0;
    if (std::abs(next - y) <= 1e-16 * (1.0 + y)) return next;
    y = next;
  }
  return y;
}

double pos_pow(double x, double q) { return x > 0.0 ? std::pow(x, q) : 0.0; }

std::vector<std::vector<double>> coefficients(const PsiProfile& psi, std::span<const double> s, double T,
                                              double F_T, std::span<const double> W) {
  std::vector<std::vector<double>> c(s.size(), std::vector<double>(psi.terms.size()));
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t j = 0; j < psi.terms.size(); ++j)
      c[k][j] = (W.empty() ? 1.0 : W[k]) * psi.terms[j].psi.chi(s[k] / T) / F_T;
  return c;
}

void check_psi(const PsiProfile& psi, int d) {
  if (psi.terms.empty()) return;
  for (const auto& t : psi.terms) {
    if (t.phi.dimension() != d) throw std::invalid_argument("test function dimension does not match d");
    if (!t.phi.nonnegative()) throw std::invalid_argument("the Laplace identity needs Phi >= 0");
  }
}

}  // namespace

std::vector<double> trapezoid_weights(std::span<const double> grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = grid[i] - grid[i - 1];
    w[i - 1] += 0.5 * h;
    w[i] += 0.5 * h;
  }
  return w;
}

double VTField::value(double xq, double t) const {
  std::size_t s = times.size();
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, T)) s = i;
  if (s == times.size()) throw std::invalid_argument("no snapshot at the requested time");
  const double pos = (xq - x.front()) / dx;
  if (pos < 0.0 || pos > static_cast<double>(x.size() - 1)) throw std::invalid_argument("x outside the solver domain");
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= x.size()) return v[s][i];
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * v[s][i] + w * v[s][i + 1];
}

void VTField::write(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "t,x,v,u\n";
  for (std::size_t s = 0; s < times.size(); ++s)
    for (std::size_t i = 0; i < x.size(); ++i)
      os << times[s] << ',' << x[i] << ',' << v[s][i] << ',' << u[s][i] << '\n';
  os.precision(old);
}

VTField solve_vT(const ModelParams& p, const PsiProfile& psi, double T, double F_T, const SolverConfig& cfg) {
  p.validate_for_simulation();
  if (p.d != 1) throw std::invalid_argument("the v_T solver is implemented for d = 1");
  if (!(T > 0.0) || !(F_T > 0.0)) throw std::invalid_argument("solver needs T > 0 and F_T > 0");
  if (!(cfg.dx > 0.0) || !(cfg.dt > 0.0) || !(cfg.half_width > 0.0)) throw std::invalid_argument("bad solver grid");
  check_psi(psi, 1);

  auto n = static_cast<std::size_t>(std::llround(2.0 * cfg.half_width / cfg.dx));
  n += n % 2;
  VTField f;
  f.T = T;
  f.F_T = F_T;
  f.dx = cfg.dx;
  f.grid_step = cfg.forcing.grid_step;
  f.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.x[i] = -0.5 * static_cast<double>(n) * cfg.dx + static_cast<double>(i) * cfg.dx;

  std::vector<std::vector<double>> phis;
  for (const auto& term : psi.terms) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = term.phi(std::span<const double>(&f.x[i], 1));
    phis.push_back(std::move(v));
  }
  const double c = p.V / (1.0 + p.beta);
  const double q = 1.0 + p.beta;
  PeriodicSemigroup sg(n, cfg.dx, p.alpha);

  std::vector<double> v(n, 0.0), u(n, 0.0), a(n), g0(n, 0.0), g1(n, 0.0);
  auto forcing = [&](double t, std::vector<double>& g, double weight) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t j = 0; j < phis.size(); ++j) {
      const double cj = weight * psi.terms[j].psi.chi((T - t) / T) / F_T;
      if (cj == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) g[i] += cj * phis[j][i];
    }
  };
  std::vector<double> snaps = cfg.snapshot_times;
  snaps.push_back(T);
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  std::size_t next_snap = 0;
  f.min_v = 0.0;
  f.max_v = 0.0;
  f.max_excess = -INFINITY;
  auto check = [&](double t) {
    double lo = INFINITY, hi = -INFINITY, ex = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, v[i]);
      hi = std::max(hi, v[i]);
      ex = std::max(ex, v[i] - u[i]);
    }
    f.min_v = std::min(f.min_v, lo);
    f.max_v = std::max(f.max_v, hi);
    f.max_excess = std::max(f.max_excess, ex);
    if (lo < -kInvariantTol || hi > 1.0 + kInvariantTol || ex > kInvariantTol) {
      std::ostringstream os;
      os << "v_T invariant violated at t=" << t << ": min v=" << lo << ", max v=" << hi << ", max(v-u)=" << ex;
      throw InvariantViolation(os.str());
    }
  };
  auto snapshot = [&](double t) {
    while (next_snap < snaps.size() && snaps[next_snap] <= t + 1e-9 * std::max(1.0, T)) {
      if (std::abs(snaps[next_snap] - t) <= 1e-9 * std::max(1.0, T)) {
        f.times.push_back(snaps[next_snap]);
        f.v.push_back(v);
        f.u.push_back(u);
      } else {
        log::warn("snapshot time ", snaps[next_snap], " is not a solver time; skipped");
      }
      ++next_snap;
    }
  };
  auto space_int = [&](auto&& fn) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += fn(i);
    return s * cfg.dx;
  };

  if (!cfg.forcing.grid_step) {
    const auto steps = static_cast<std::int64_t>(std::llround(T / cfg.dt));
    if (steps < 1) throw std::invalid_argument("dt larger than T");
    const double h = T / static_cast<double>(steps);
    f.dt = h;
    sg.set_step(h);
    forcing(0.0, g0, 1.0);
    snapshot(0.0);
    double i1_prev = 0.0, i2_prev = 0.0, i3_prev = 0.0;
    for (std::int64_t s = 0; s < steps; ++s) {
      const double t1 = static_cast<double>(s + 1) * h;
      for (std::size_t i = 0; i < n; ++i) {
        const double F0 = g0[i] * (1.0 - v[i]) - c * pos_pow(v[i], q);
        a[i] = v[i] + 0.5 * h * F0;
        u[i] += 0.5 * h * g0[i];
      }
      sg.apply(a);
      sg.apply(u);
      forcing(t1, g1, 1.0);
      for (std::size_t i = 0; i < n; ++i) {
        u[i] += 0.5 * h * g1[i];
        v[i] = local_newton(a[i], g1[i], c, q, h, cfg.newton_max);
      }
      check(t1);
      const double i1 = space_int([&](std::size_t i) { return g1[i] * v[i]; });
      const double i2 = space_int([&](std::size_t i) { return pos_pow(u[i], q); });
      const double i3 = space_int([&](std::size_t i) { return pos_pow(u[i], q) - pos_pow(v[i], q); });
      f.I1 += 0.5 * h * (i1_prev + i1);
      f.I2 += 0.5 * h * (i2_prev + i2);
      f.I3 += 0.5 * h * (i3_prev + i3);
      i1_prev = i1;
      i2_prev = i2;
      i3_prev = i3;
      std::swap(g0, g1);
      snapshot(t1);
    }
  } else {
    const double step = *cfg.forcing.grid_step;
    const auto K = static_cast<std::int64_t>(std::llround(T / step));
    if (K < 1 || std::abs(static_cast<double>(K) * step - T) > 1e-9 * T)
      throw std::invalid_argument("grid step must divide T");
    const auto m = std::max<std::int64_t>(1, std::llround(step / cfg.dt));
    const double h = step / static_cast<double>(m);
    f.dt = h;
    f.I1 = f.I2 = f.I3 = std::numeric_limits<double>::quiet_NaN();
    sg.set_step(h);
    const std::vector<double> grid = observation_grid(T, step);
    const std::vector<double> W = trapezoid_weights(grid);
    // solver time t corresponds to simulator time T - t; forcing at grid index K - k
    for (std::int64_t k = 0; k <= K; ++k) {
      const double t = static_cast<double>(k) * step;
      forcing(t, g1, W[K - k]);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = 1.0 - (1.0 - v[i]) * std::exp(-g1[i]);
        u[i] += g1[i];
      }
      check(t);
      snapshot(t);
      if (k == K) break;
      for (std::int64_t s = 0; s < m; ++s) {
        for (std::size_t i = 0; i < n; ++i) a[i] = v[i] - 0.5 * h * c * pos_pow(v[i], q);
        sg.apply(a);
        sg.apply(u);
        for (std::size_t i = 0; i < n; ++i) v[i] = local_newton(a[i], 0.0, c, q, h, cfg.newton_max);
        const double ts = t + static_cast<double>(s + 1) * h;
        check(ts);
        if (s + 1 < m) snapshot(ts);
      }
    }
  }

  f.mass_u = space_int([&](std::size_t i) { return u[i]; });
  f.mass_v = space_int([&](std::size_t i) { return v[i]; });
  if (cfg.box) {
    const double lo = cfg.box->lo[0], hi = cfg.box->hi[0];
    double su = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (f.x[i] < lo || f.x[i] > hi) continue;
      const double w = (f.x[i] == lo || f.x[i] == hi) ? 0.5 : 1.0;
      su += w * u[i];
      sv += w * v[i];
    }
    f.box_u = su * cfg.dx;
    f.box_v = sv * cfg.dx;
  } else {
    f.box_u = f.box_v = std::numeric_limits<double>::quiet_NaN();
  }
  return f;
}

LaplaceRHS laplace_rhs(const VTField& f, const ModelParams& p) {
  LaplaceRHS r;
  const double c = p.V / (1.0 + p.beta);
  r.I1 = f.I1;
  r.I2 = f.I2;
  r.I3 = f.I3;
  r.value_I = std::exp(p.intensity * (f.I1 + c * (f.I2 - f.I3)));
  r.value_full = std::exp(p.intensity * (f.mass_u - f.mass_v));
  r.value_box = std::exp(p.intensity * (f.box_u - f.box_v));
  return r;
}

LaplaceRHS laplace_rhs_with_error(const ModelParams& p, const PsiProfile& psi, double T, double F_T,
                                  const SolverConfig& cfg) {
  const LaplaceRHS base = laplace_rhs(solve_vT(p, psi, T, F_T, cfg), p);
  SolverConfig ct = cfg;
  ct.dt = 2.0 * cfg.dt;
  ct.snapshot_times.clear();
  SolverConfig cx = cfg;
  cx.dx = 2.0 * cfg.dx;
  cx.snapshot_times.clear();
  const LaplaceRHS rt = laplace_rhs(solve_vT(p, psi, T, F_T, ct), p);
  const LaplaceRHS rx = laplace_rhs(solve_vT(p, psi, T, F_T, cx), p);
  LaplaceRHS out = base;
  // second order in time: Richardson estimate of the fine-step error
  auto err = [](double b, double t, double x) { return std::abs(b - t) / 3.0 + std::abs(b - x); };
  out.err_I = err(base.value_I, rt.value_I, rx.value_I);
  out.err_full = err(base.value_full, rt.value_full, rx.value_full);
  out.err_box = err(base.value_box, rt.value_box, rx.value_box);
  return out;
}

namespace {

template <class Fn>
std::vector<double> run_replicas(std::int64_t replicas, int threads, Fn&& one, std::int64_t& failures) {
  std::vector<double> vals(static_cast<std::size_t>(std::max<std::int64_t>(replicas, 0)),
                           std::numeric_limits<double>::quiet_NaN());
  threads = std::max(1, threads);
  std::vector<std::thread> pool;
  std::mutex mu;
  std::vector<std::string> errors;
  auto work = [&](int id) {
    for (std::int64_t r = id; r < replicas; r += threads) {
      try {
        vals[r] = one(r);
      } catch (const PopulationExplosion& e) {
        std::lock_guard lock(mu);
        errors.push_back("replica " + std::to_string(r) + ": " + e.what());
      }
    }
  };
  if (threads == 1) work(0);
  else {
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& t : pool) t.join();
  }
  failures = static_cast<std::int64_t>(errors.size());
  for (const auto& e : errors) log::warn(e);
  return vals;
}

void summarize(const std::vector<double>& vals, McEstimate& out) {
  double s = 0.0, s2 = 0.0;
  std::int64_t n = 0;
  for (double v : vals) {
    if (std::isnan(v)) continue;
    s += v;
    ++n;
  }
  if (n == 0) return;
  const double m = s / static_cast<double>(n);
  for (double v : vals)
    if (!std::isnan(v)) s2 += (v - m) * (v - m);
  out.replicas = n;
  out.estimate = m;
  out.stderr_ = n > 1 ? std::sqrt(s2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
}

}  // namespace

LaplaceMcPlan make_laplace_plan(const ModelParams& p, const PsiProfile& psi, double T, double F_T, const Box& box,
                                double grid_step) {
  p.validate_for_simulation();
  check_psi(psi, p.d);
  LaplaceMcPlan plan{p, box, T, {}, {}, {}, 0.0, 0.0};
  const StableKernel k(p.d, p.alpha);
  plan.opt.grid = observation_grid(T, grid_step);
  const std::vector<double> W = trapezoid_weights(plan.opt.grid);
  plan.coef = coefficients(psi, plan.opt.grid, T, F_T, W);
  for (const auto& t : psi.terms) plan.phis.push_back(t.phi);
  for (std::size_t kk = 0; kk < plan.opt.grid.size(); ++kk)
    for (std::size_t j = 0; j < plan.phis.size(); ++j) {
      if (plan.coef[kk][j] == 0.0) continue;
      const BoxMass bm = box_mass(k, plan.opt.grid[kk], plan.phis[j], box);
      plan.centering += p.intensity * plan.coef[kk][j] * bm.inside;
      plan.bias_bound += p.intensity * std::abs(plan.coef[kk][j]) * bm.outside;
    }
  return plan;
}

double laplace_replica_Y(const LaplaceMcPlan& plan, std::int64_t r, std::uint64_t seed) {
  RandomStream rng(seed, static_cast<std::uint64_t>(r));
  GridPointObserver obs(plan.opt.grid, plan.phis);
  PathObserver* os[] = {&obs};
  run_population(plan.p, plan.box, plan.T, plan.opt, os, rng);
  double y = 0.0;
  for (std::size_t j = 0; j < plan.phis.size(); ++j)
    for (std::size_t kk = 0; kk < plan.opt.grid.size(); ++kk) y += plan.coef[kk][j] * obs.sums(j)[kk];
  return y;
}

McEstimate mc_laplace_lhs(const ModelParams& p, const PsiProfile& psi, double T, double F_T, const Box& box,
                          double grid_step, std::int64_t replicas, std::uint64_t seed, int threads) {
  p.validate_for_simulation();
  check_psi(psi, p.d);
  McEstimate out;
  if (psi.is_zero()) {
    out.estimate = 1.0;
    out.replicas = replicas;
    return out;
  }
  const LaplaceMcPlan plan = make_laplace_plan(p, psi, T, F_T, box, grid_step);
  out.centering = plan.centering;
  out.bias_bound = plan.bias_bound;
  std::vector<double> ys(static_cast<std::size_t>(std::max<std::int64_t>(replicas, 0)));
  auto one = [&](std::int64_t r) {
    ys[r] = laplace_replica_Y(plan, r, seed);
    return std::exp(-(ys[r] - plan.centering));
  };
  const std::vector<double> vals = run_replicas(replicas, threads, one, out.failures);
  summarize(vals, out);
  double sy = 0.0;
  for (std::size_t r = 0; r < vals.size(); ++r)
    if (!std::isnan(vals[r])) sy += ys[r];
  out.mean_Y = out.replicas ? sy / static_cast<double>(out.replicas) : 0.0;
  return out;
}

McEstimate vT_mc_oracle(const ModelParams& p, double x, double t, const PsiProfile& psi, double T, double F_T,
                        double grid_step, std::int64_t replicas, std::uint64_t seed, int threads) {
  p.validate_for_simulation();
  check_psi(psi, p.d);
  if (!(t > 0.0 && t <= T)) throw std::invalid_argument("v_T oracle needs 0 < t <= T");
  McEstimate out;
  if (psi.is_zero()) {
    out.replicas = replicas;
    return out;
  }
  const std::vector<double> full = observation_grid(T, grid_step);
  const std::vector<double> W = trapezoid_weights(full);
  const double off = T - t;
  std::vector<double> elapsed, sgrid, w;
  for (std::size_t kk = 0; kk < full.size(); ++kk) {
    if (full[kk] < off - 1e-9 * T) continue;
    elapsed.push_back(std::max(0.0, full[kk] - off));
    sgrid.push_back(full[kk]);
    w.push_back(W[kk]);
  }
  if (elapsed.empty() || elapsed.front() > 1e-9 * T)
    throw std::invalid_argument("T - t must lie on the forcing grid");
  elapsed.front() = 0.0;
  elapsed.back() = t;
  const auto coef = coefficients(psi, sgrid, T, F_T, w);
  std::vector<TestFunction> phis;
  for (const auto& term : psi.terms) phis.push_back(term.phi);
  SimOptions opt;
  opt.grid = elapsed;
  const double x0[] = {x};
  if (p.d != 1) throw std::invalid_argument("the v_T oracle takes a scalar start point (d = 1)");
  auto one = [&](std::int64_t r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r));
    GridPointObserver obs(opt.grid, phis);
    PathObserver* os[] = {&obs};
    run_single_ancestor(p, x0, t, opt, os, rng);
    double y = 0.0;
    for (std::size_t j = 0; j < phis.size(); ++j)
      for (std::size_t kk = 0; kk < opt.grid.size(); ++kk) y += coef[kk][j] * obs.sums(j)[kk];
    return -std::expm1(-y);
  };
  const std::vector<double> vals = run_replicas(replicas, threads, one, out.failures);
  summarize(vals, out);
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic limits

namespace {

/// T_u phi(r) on a log grid of u, with phi(r) as the u = 0 value.
struct UProfile {
  std::vector<double> u, f;
  double f0 = 0.0;
};

UProfile u_profile(const StableKernel& k, const TestFunction& phi, double r, double u_min, double u_max,
                   int per_decade) {
  UProfile P;
  const int d = k.dimension();
  std::vector<double> x(phi.common_center().begin(), phi.common_center().end());
  x[0] += r;
  P.f0 = phi(x);
  const double step = std::log(10.0) / per_decade;
  const auto m = static_cast<std::size_t>(std::ceil(std::log(u_max / u_min) / step));
  P.u.resize(m + 1);
  P.f.resize(m + 1);
  (void)d;
  for (std::size_t i = 0; i <= m; ++i) {
    P.u[i] = u_min * std::exp(step * static_cast<double>(i));
    P.f[i] = semigroup_apply(k, P.u[i], phi, x).value;
  }
  return P;
}

/// int_0^U f(u) w(u) du by the trapezoid rule in log u on the profile grid
/// (stride 1 and 2 for an error estimate).
template <class Wt>
Estimate integrate_profile(const UProfile& P, double U, Wt&& w) {
  if (!(U > 0.0)) return {};
  auto interp = [&](double uq) {
    if (uq <= P.u.front()) return P.f0 + (P.f.front() - P.f0) * uq / P.u.front();
    auto it = std::upper_bound(P.u.begin(), P.u.end(), uq);
    if (it == P.u.end()) return P.f.back();
    const std::size_t i = it - P.u.begin();
    const double a = P.f[i - 1], b = P.f[i];
    const double s = std::log(uq / P.u[i - 1]) / std::log(P.u[i] / P.u[i - 1]);
    if (a > 0.0 && b > 0.0) return a * std::pow(b / a, s);
    return a + (b - a) * s;
  };
  auto run = [&](std::size_t stride) {
    if (U <= P.u.front()) return 0.5 * U * (P.f0 * w(0.0) + interp(U) * w(U));
    double s = 0.5 * P.u.front() * (P.f0 * w(0.0) + P.f.front() * w(P.u.front()));
    std::size_t i = 0;
    double gprev = P.f[0] * w(P.u[0]) * P.u[0];
    while (i + stride < P.u.size() && P.u[i + stride] <= U) {
      const double g = P.f[i + stride] * w(P.u[i + stride]) * P.u[i + stride];
      s += 0.5 * std::log(P.u[i + stride] / P.u[i]) * (gprev + g);
      gprev = g;
      i += stride;
    }
    if (U > P.u[i]) {
      const double g = interp(U) * w(U) * U;
      s += 0.5 * std::log(U / P.u[i]) * (gprev + g);
    }
    return s;
  };
  const double fine = run(1), coarse = run(2);
  return {fine, std::abs(fine - coarse) / 3.0};
}

struct RadialNode {
  double r, wk, wg;
};

/// GK15 nodes for int_0^R r^{d-1} S_{d-1} (.) dr: one linear panel on [0, r0],
/// then `per_decade` log panels per decade.
std::vector<RadialNode> radial_nodes(int d, double r0, double R, int per_decade) {
  using K = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  const auto& xk = K::abscissa();
  const auto& wk = K::weights();
  const auto& wg = G::weights();
  const double area = sphere_area(d);
  std::vector<RadialNode> out;
  auto panel = [&](double a, double b, bool logs) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t i = 0; i < xk.size(); ++i) {
      const double g = (i % 2 == 0) ? wg[i / 2] : 0.0;
      for (double s : {-1.0, 1.0}) {
        if (i == 0 && s > 0.0) continue;
        const double tau = c + s * h * xk[i];
        const double r = logs ? std::exp(tau) : tau;
        const double jac = (logs ? r : 1.0) * area * std::pow(r, d - 1);
        out.push_back({r, h * wk[i] * jac, h * g * jac});
      }
    }
  };
  panel(0.0, r0, false);
  const double step = std::log(10.0) / per_decade;
  for (double tau = std::log(r0); tau < std::log(R) - 1e-9; tau += step)
    panel(tau, std::min(tau + step, std::log(R)), true);
  return out;
}

void check_concentric_nonneg(const TestFunction& phi) {
  if (!phi.concentric() || phi.bumps().empty()) throw std::invalid_argument("deterministic limits need a concentric phi");
  if (!phi.nonnegative()) throw std::invalid_argument("deterministic limits need phi >= 0");
}

double smallest_sigma(const TestFunction& phi) {
  double s = INFINITY;
  for (const auto& b : phi.bumps()) s = std::min(s, b.sigma);
  return s;
}

void finish_table(LimitTable& t) {
  t.gap_decreasing = t.rows.size() >= 2;
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    if (!(t.rows[i].rel_gap < t.rows[i - 1].rel_gap)) t.gap_decreasing = false;
}

}  // namespace

LimitTable deterministic_limit_I2(const ModelParams& p, const TestFunction& phi, const TimeProfile& psi,
                                  std::span<const double> T_list) {
  p.validate();
  if (classify_regime(p).regime != Regime::Large) throw std::invalid_argument("I_2 limit needs the large regime");
  if (p.d > 2) throw std::invalid_argument("I_2 limit is supported for d <= 2");
  if (phi.dimension() != p.d) throw std::invalid_argument("test function dimension does not match d");
  LimitTable out;
  const double q = 1.0 + p.beta;
  const StableKernel k(p.d, p.alpha);
  const double lam = phi.integral();

  std::vector<double> rho_br = {0.0, 0.5, 0.9, 0.99, 1.0};
  for (double b : psi.breakpoints()) rho_br.push_back(b);
  rho_br = quad::clean_breaks(rho_br, 0.0, 1.0);
  // limit: int (G phi)^q dx * int chi^q
  const Estimate chi_q = quad::gk_pieces([&](double s) { return std::pow(psi.chi(s), q); }, rho_br, 1e-12, 12);
  if (phi.is_zero() || chi_q.value == 0.0) {
    for (double T : T_list) out.rows.push_back({T, {}, 0.0, 0.0});
    out.note = "zero forcing";
    return out;
  }
  check_concentric_nonneg(phi);
  const TestFunction fs[] = {phi};
  const PotentialTable tab = build_potential_table(k, fs);
  const double one[] = {1.0};
  const Estimate gq = integrate_potential_power(tab, one, q);
  out.limit = {gq.value * chi_q.value, gq.abs_error * chi_q.value + gq.value * chi_q.abs_error};

  using GL = boost::math::quadrature::gauss<double, 20>;
  std::vector<double> rho, rw;
  for (std::size_t i = 1; i < rho_br.size(); ++i) {
    const double a = rho_br[i - 1], b = rho_br[i], c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t j = 0; j < GL::abscissa().size(); ++j)
      for (double s : {-1.0, 1.0}) {
        if (GL::abscissa()[j] == 0.0 && s > 0.0) continue;
        rho.push_back(c + s * h * GL::abscissa()[j]);
        rw.push_back(h * GL::weights()[j]);
      }
  }
  double Tmax = 0.0;
  for (double T : T_list) Tmax = std::max(Tmax, T);
  const double sig = smallest_sigma(phi);
  const double R = 1e6 * std::pow(Tmax, 1.0 / p.alpha) * sig;
  const auto nodes = radial_nodes(p.d, 1e-3 * sig, R, 3);
  std::vector<double> fine(T_list.size(), 0.0), gauss(T_list.size(), 0.0), uerr(T_list.size(), 0.0);
  for (const auto& nd : nodes) {
    const UProfile P = u_profile(k, phi, nd.r, 1e-8, Tmax, 64);
    for (std::size_t it = 0; it < T_list.size(); ++it) {
      const double T = T_list[it];
      double F = 0.0, Ferr = 0.0;
      for (std::size_t j = 0; j < rho.size(); ++j) {
        const double rj = rho[j];
        const Estimate A = integrate_profile(P, T * (1.0 - rj), [&](double u) { return psi.chi(rj + u / T); });
        F += rw[j] * std::pow(std::max(A.value, 0.0), q);
        Ferr += rw[j] * q * std::pow(std::max(A.value, 0.0), q - 1.0) * A.abs_error;
      }
      fine[it] += nd.wk * F;
      gauss[it] += nd.wg * F;
      uerr[it] += nd.wk * Ferr;
    }
  }
  const double c1 = stable_tail_coefficient(p.d, p.alpha);
  const double e = p.d - (p.d + p.alpha) * q;
  for (std::size_t it = 0; it < T_list.size(); ++it) {
    const double T = T_list[it];
    // beyond R: T_u phi ~ lambda c1 u r^{-d-alpha}
    double Bq = 0.0;
    for (std::size_t j = 0; j < rho.size(); ++j) {
      const double rj = rho[j];
      const double U = T * (1.0 - rj);
      const Estimate B = quad::gk([&](double u) { return u * psi.chi(rj + u / T); }, 0.0, std::max(U, 1e-300), 1e-10, 8);
      Bq += rw[j] * std::pow(B.value, q);
    }
    const double tail = sphere_area(p.d) * std::pow(lam * c1, q) * std::pow(R, e) / (-e) * Bq;
    const double factor = T / std::pow(norming(p, T).value, q);
    LimitRow row;
    row.T = T;
    row.value = {factor * (fine[it] + tail), factor * (std::abs(fine[it] - gauss[it]) + uerr[it] + 1e-3 * tail)};
    row.limit = out.limit.value;
    row.rel_gap = std::abs(row.value.value - row.limit) / row.limit;
    out.rows.push_back(row);
  }
  finish_table(out);
  return out;
}

LimitTable critical_log_limit(const ModelParams& p, const TestFunction& phi, std::span<const double> T_list) {
  p.validate();
  if (classify_regime(p).regime != Regime::Critical) throw std::invalid_argument("log limit needs the critical regime");
  if (p.d > 2) throw std::invalid_argument("log limit is supported for d in {1, 2}");
  if (phi.dimension() != p.d) throw std::invalid_argument("test function dimension does not match d");
  LimitTable out;
  const double q = 1.0 + p.beta;
  for (double T : T_list)
    if (!(T > 1.0)) throw std::invalid_argument("log limit needs T > 1");
  if (phi.is_zero()) {
    for (double T : T_list) out.rows.push_back({T, {}, 0.0, 0.0});
    out.note = "zero test function";
    return out;
  }
  check_concentric_nonneg(phi);
  const StableKernel k(p.d, p.alpha);
  const double lam = phi.integral();
  const CriticalConstants cc = constant_K1(p);
  const double rhs = q / p.V * cc.K2.value * std::pow(lam, q);
  out.limit = {rhs, q / p.V * cc.K2.abs_error * std::pow(lam, q)};

  double Tmax = 0.0;
  for (double T : T_list) Tmax = std::max(Tmax, T);
  const double sig = smallest_sigma(phi);
  const double R = 1e6 * std::pow(Tmax, 1.0 / p.alpha) * sig;
  const auto nodes = radial_nodes(p.d, 1e-3 * sig, R, 3);
  std::vector<double> fine(T_list.size(), 0.0), gauss(T_list.size(), 0.0), uerr(T_list.size(), 0.0);
  for (const auto& nd : nodes) {
    const UProfile P = u_profile(k, phi, nd.r, 1e-8, Tmax, 64);
    for (std::size_t it = 0; it < T_list.size(); ++it) {
      const Estimate A = integrate_profile(P, T_list[it], [](double) { return 1.0; });
      const double F = std::pow(std::max(A.value, 0.0), q);
      fine[it] += nd.wk * F;
      gauss[it] += nd.wg * F;
      uerr[it] += nd.wk * q * std::pow(std::max(A.value, 0.0), q - 1.0) * A.abs_error;
    }
  }
  const double c1 = stable_tail_coefficient(p.d, p.alpha);
  const double e = p.d - (p.d + p.alpha) * q;
  for (std::size_t it = 0; it < T_list.size(); ++it) {
    const double T = T_list[it];
    const double tail = sphere_area(p.d) * std::pow(lam * c1 * 0.5 * T * T, q) * std::pow(R, e) / (-e);
    const double L = std::log(T);
    LimitRow row;
    row.T = T;
    row.value = {(fine[it] + tail) / L, (std::abs(fine[it] - gauss[it]) + uerr[it] + 1e-3 * tail) / L};
    row.limit = rhs;
    row.rel_gap = std::abs(row.value.value - rhs) / rhs;
    out.rows.push_back(row);
  }
  finish_table(out);
  return out;
}

}  // namespace occfluct
