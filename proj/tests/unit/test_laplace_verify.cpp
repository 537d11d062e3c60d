#include "occfluct/laplace_verify.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace occfluct;

namespace {

ModelParams mp(int d, double alpha, double beta, double V = 1.0) {
  ModelParams p;
  p.d = d;
  p.alpha = alpha;
  p.beta = beta;
  p.V = V;
  return p;
}

PsiProfile unit_psi(double sigma = 1.0) {
  return SpaceTimeFunction::product(TestFunction::gaussian(1, sigma), TimeProfile::constant(1.0));
}

SolverConfig small_cfg() {
  SolverConfig c;
  c.half_width = 512.0;
  c.dx = 0.25;
  c.dt = 0.01;
  return c;
}

}  // namespace

TEST_CASE("trapezoid weights") {
  const std::vector<double> g = {0.0, 0.5, 1.0, 1.5, 2.0};
  const auto w = trapezoid_weights(g);
  CHECK(w == std::vector<double>{0.25, 0.5, 0.5, 0.5, 0.25});
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(2.0));
}

TEST_CASE("zero test function gives v = 0 and value 1") {
  const ModelParams p = mp(1, 1.5, 0.5);
  const PsiProfile zero = SpaceTimeFunction::product(TestFunction::zero(1), TimeProfile::constant(1.0));
  SolverConfig c = small_cfg();
  c.snapshot_times = {1.0, 2.0};
  const VTField f = solve_vT(p, zero, 2.0, 1.0, c);
  CHECK(f.max_v == 0.0);
  CHECK(f.value(3.0, 2.0) == 0.0);
  const LaplaceRHS r = laplace_rhs(f, p);
  CHECK(r.value_full == 1.0);
  CHECK(r.value_I == 1.0);
  const Box box = Box::cube(1, 20.0);
  CHECK(mc_laplace_lhs(p, zero, 2.0, 1.0, box, 0.5, 10, 1).estimate == 1.0);
  CHECK(vT_mc_oracle(p, 0.0, 1.0, zero, 2.0, 1.0, 0.5, 10, 1).estimate == 0.0);
}

TEST_CASE("solver invariants") {
  for (double beta : {0.2, 0.5, 0.9}) {
    const ModelParams p = mp(1, 1.5, beta);
    SolverConfig c = small_cfg();
    c.box = Box::cube(1, 50.0);
    const VTField f = solve_vT(p, unit_psi(), 4.0, 0.5, c);
    CHECK(f.min_v >= -1e-8);
    CHECK(f.max_v <= 1.0 + 1e-8);
    CHECK(f.max_excess <= 1e-8);
    CHECK(f.I3 >= 0.0);
    CHECK(f.mass_v <= f.mass_u);
    CHECK(f.box_u <= f.mass_u);
    // int u(x, T) dx = int_0^T int Psi_T = lambda(phi) T / (2 F_T) for psi == 1
    CHECK(f.mass_u == doctest::Approx(std::sqrt(2 * std::numbers::pi) * 4.0 / (2 * 0.5)).epsilon(1e-9));
    CHECK(f.I1 >= 0.0);
    CHECK(f.I1 <= f.mass_u);
    const LaplaceRHS r = laplace_rhs(f, p);
    CHECK(r.value_I == doctest::Approx(r.value_full).epsilon(1e-6));
    CHECK(r.value_full >= 1.0);
    CHECK(r.value_box <= r.value_full);
  }
}

TEST_CASE("larger test functions give larger v") {
  const ModelParams p = mp(1, 1.2, 0.5);
  SolverConfig c = small_cfg();
  c.snapshot_times = {3.0};
  const VTField a = solve_vT(p, unit_psi(), 3.0, 2.0, c), b = solve_vT(p, unit_psi(), 3.0, 1.0, c);
  for (double x : {-4.0, 0.0, 0.5, 10.0}) CHECK(a.value(x, 3.0) <= b.value(x, 3.0));
}

TEST_CASE("I2 against the substituted quadrature") {
  const ModelParams p = mp(1, 0.4, 0.9);
  const double T = 2.0, F = norming(p, T).value;
  SolverConfig c;
  c.half_width = 16384.0;
  c.dx = 0.5;
  c.dt = 0.01;
  const VTField f = solve_vT(p, unit_psi(), T, F, c);
  const double Ts[] = {T};
  const LimitTable tab = deterministic_limit_I2(p, TestFunction::gaussian(1, 1.0), TimeProfile::constant(1.0), Ts);
  CHECK(f.I2 == doctest::Approx(tab.rows[0].value.value).epsilon(1e-3));
}

TEST_CASE("grid forcing converges to the continuous functional") {
  const ModelParams p = mp(1, 1.5, 0.5);
  SolverConfig c = small_cfg();
  const LaplaceRHS cont = laplace_rhs(solve_vT(p, unit_psi(), 2.0, 1.0, c), p);
  double prev = INFINITY;
  for (double step : {0.5, 0.25, 0.125}) {
    c.forcing.grid_step = step;
    const LaplaceRHS g = laplace_rhs(solve_vT(p, unit_psi(), 2.0, 1.0, c), p);
    CHECK(std::isnan(g.value_I));
    const double gap = std::abs(g.value_full - cont.value_full);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 2e-3 * cont.value_full);
}

TEST_CASE("Monte Carlo Laplace functional equals the grid solve") {
  const ModelParams p = mp(1, 1.5, 0.5);
  const double T = 2.0, F = 2.0, step = 0.25;
  const Box box = Box::cube(1, 10.0);
  SolverConfig c = small_cfg();
  c.forcing.grid_step = step;
  c.box = box;
  const LaplaceRHS r = laplace_rhs(solve_vT(p, unit_psi(), T, F, c), p);
  const McEstimate mc = mc_laplace_lhs(p, unit_psi(), T, F, box, step, 20000, 41);
  CHECK(mc.failures == 0);
  CHECK(std::abs(mc.estimate - r.value_box) < 4.0 * mc.stderr_ + 1e-4);
}

TEST_CASE("v_T against single-ancestor Monte Carlo") {
  for (const double V : {0.0, 1.0}) {
    CAPTURE(V);
    const ModelParams p = mp(1, 1.5, 0.5, V);
    const double T = 2.0, F = 1.0, step = 0.25;
    SolverConfig c = small_cfg();
    c.forcing.grid_step = step;
    c.snapshot_times = {1.0, 2.0};
    const VTField f = solve_vT(p, unit_psi(), T, F, c);
    for (const auto [x, t] : {std::pair{0.0, 2.0}, std::pair{1.5, 2.0}, std::pair{0.0, 1.0}}) {
      const McEstimate o = vT_mc_oracle(p, x, t, unit_psi(), T, F, step, 20000, 42);
      CHECK(std::abs(o.estimate - f.value(x, t)) < 4.0 * o.stderr_ + 1e-4);
    }
  }
}

TEST_CASE("bad inputs") {
  const ModelParams p = mp(1, 1.5, 0.5);
  SolverConfig c = small_cfg();
  CHECK_THROWS(solve_vT(mp(2, 1.5, 0.5), SpaceTimeFunction::product(TestFunction::gaussian(2, 1.0),
                                                                     TimeProfile::constant(1.0)),
                        1.0, 1.0, c));
  CHECK_THROWS(solve_vT(p, SpaceTimeFunction::product(TestFunction::gaussian(1, 1.0, -1.0), TimeProfile::constant(1.0)),
                        1.0, 1.0, c));
  c.forcing.grid_step = 0.3;
  CHECK_THROWS(solve_vT(p, unit_psi(), 1.0, 1.0, c));
  const VTField f = solve_vT(p, unit_psi(), 1.0, 1.0, small_cfg());
  CHECK_THROWS(f.value(0.0, 0.5));
}
