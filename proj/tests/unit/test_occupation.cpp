#include "gen.hpp"
#include "occfluct/occupation.hpp"

#include <doctest.h>

#include <cmath>

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

struct Path {
  std::vector<double> t, x;
  PathSegment seg(int d = 1) const {
    PathSegment s;
    s.id = 1;
    s.birth = t.front();
    s.death = t.back();
    s.times = t;
    s.positions = x;
    s.d = d;
    return s;
  }
};

Path random_path(gen::Gen& g, int n) {
  Path p;
  double t = g.uniform(0.0, 2.0), x = g.uniform(-2.0, 2.0);
  for (int i = 0; i < n; ++i) {
    p.t.push_back(t);
    p.x.push_back(x);
    t += g.uniform(0.01, 0.3);
    x += g.uniform(-0.5, 0.5);
  }
  return p;
}

}  // namespace

TEST_CASE("occupation of a resting particle") {
  const TestFunction phi = TestFunction::gaussian(1, 1.0);
  Path p{{1.0, 1.5, 4.0}, {0.3, 0.3, 0.3}};
  const double x[] = {0.3};
  CHECK(accumulate_occupation(p.seg(), phi) == doctest::Approx(3.0 * phi(x)).epsilon(1e-14));
  CHECK(accumulate_occupation(p.seg(), phi, 1.5, 4.0) == doctest::Approx(2.5 * phi(x)).epsilon(1e-14));
  CHECK(accumulate_occupation(p.seg(), phi, 5.0, 6.0) == 0.0);
  CHECK(accumulate_occupation(p.seg(), TestFunction::zero(1)) == 0.0);
}

TEST_CASE("occupation is linear in phi and invariant under time rescaling") {
  gen::Gen g(21);
  const TestFunction f1 = TestFunction::gaussian(1, 0.8), f2 = TestFunction::gaussian(1, 2.0, 1.0, {1.0});
  for (int i = 0; i < 100; ++i) {
    const Path p = random_path(g, g.integer(2, 30));
    const double c = g.uniform(-3.0, 3.0);
    const double lhs = accumulate_occupation(p.seg(), f1 + f2.scaled(c));
    const double rhs = accumulate_occupation(p.seg(), f1) + c * accumulate_occupation(p.seg(), f2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    const double T = g.log_uniform(1.0, 1e4);
    CHECK(accumulate_occupation_rescaled(p.seg(), f1, T) ==
          doctest::Approx(accumulate_occupation(p.seg(), f1)).epsilon(1e-12));
    CHECK(accumulate_occupation(p.seg(), f1) >= 0.0);
  }
}

TEST_CASE("occupation observer bins and merge") {
  gen::Gen g(22);
  const TestFunction phi = TestFunction::gaussian(1, 1.0);
  std::vector<double> grid;
  for (int k = 0; k <= 40; ++k) grid.push_back(0.25 * k);
  OccupationObserver all(grid, {phi}, {[](double) { return 1.0; }}), a(grid, {phi}), b(grid, {phi});
  double direct = 0.0;
  for (int i = 0; i < 20; ++i) {
    // segment points must include the grid points inside the segment
    Path p;
    const int k0 = g.integer(0, 20), k1 = g.integer(k0 + 1, 40);
    double x = g.uniform(-1.0, 1.0);
    for (int k = k0; k <= k1; ++k) {
      p.t.push_back(grid[k]);
      p.x.push_back(x);
      x += g.uniform(-0.3, 0.3);
    }
    all.on_segment(p.seg());
    (i % 2 ? a : b).on_segment(p.seg());
    direct += accumulate_occupation(p.seg(), phi);
  }
  CHECK(all.cumulative(0).back() == doctest::Approx(direct).epsilon(1e-12));
  CHECK(all.weighted(0) == doctest::Approx(direct).epsilon(1e-12));
  OccupationObserver m(grid, {phi});
  m.merge(a);
  m.merge(b);
  const auto c1 = m.cumulative(0), c2 = all.cumulative(0);
  for (std::size_t k = 0; k < c1.size(); ++k) CHECK(c1[k] == doctest::Approx(c2[k]).epsilon(1e-12));
  CHECK(std::is_sorted(c1.begin(), c1.end()));
  CHECK(m.occupation_until(0, 10.0) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("centering: exact = truncated + truncation bias") {
  const ModelParams p = mp(2, 0.5, 0.5);
  const StableKernel k(2, 0.5);
  const TestFunction phi = TestFunction::gaussian(2, 1.0);
  const Box box = Box::cube(2, 20.0);
  for (double h : {1.0, 16.0, 256.0}) {
    const double exact = centering_mean(k, p, phi, h, Centering::Exact, std::nullopt);
    CHECK(exact == doctest::Approx(phi.integral() * h).epsilon(1e-14));
    const double trunc = centering_mean(k, p, phi, h, Centering::Truncated, box);
    const Estimate bias = truncation_bias(k, p, phi, h, box);
    CHECK(trunc + bias.value == doctest::Approx(exact).epsilon(1e-7));
    CHECK(bias.value > 0.0);
  }
  CHECK_THROWS(centering_mean(k, p, phi, 1.0, Centering::Truncated, std::nullopt));
}

TEST_CASE("box budget meets its target") {
  const ModelParams p = mp(1, 1.5, 0.5);
  const StableKernel k(1, 1.5);
  const TestFunction phi = TestFunction::gaussian(1, 1.0);
  const double L = box_half_width_for_budget(k, p, phi, 10.0, 1e-3);
  CHECK(truncation_bias(k, p, phi, 10.0, Box::cube(1, L)).value <= 1e-3);
  CHECK(truncation_bias(k, p, phi, 10.0, Box::cube(1, 0.9 * L)).value > 1e-3);
}

TEST_CASE("mean occupation of the truncated system") {
  const ModelParams p = mp(1, 1.5, 0.5, 0.0);
  const StableKernel k(1, 1.5);
  const TestFunction phi = TestFunction::gaussian(1, 1.0);
  const Box box = Box::cube(1, 5.0);
  SimOptions opt;
  opt.grid = observation_grid(2.0, 0.01);
  const int n = 4000;
  double s = 0, s2 = 0;
  for (int r = 0; r < n; ++r) {
    OccupationObserver occ(opt.grid, {phi});
    PathObserver* obs[] = {&occ};
    RandomStream rng(8, r);
    run_population(p, box, 2.0, opt, obs, rng);
    const double v = occ.cumulative(0).back();
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  const double m = centering_mean(k, p, phi, 2.0, Centering::Truncated, box);
  CHECK(std::abs(mean - m) < 4.0 * se + 1e-3 * m);
}

TEST_CASE("fluctuation value and pairing") {
  CHECK(fluctuation_value(10.0, 4.0, 2.0) == 3.0);
  const std::vector<double> tg = {0.0, 0.25, 0.5, 1.0};
  const std::vector<double> v = {0.0, 1.0, 1.0, 3.0};
  CHECK(spacetime_pairing(tg, v, TimeProfile::point_mass(0.25)) == 1.0);
  CHECK(spacetime_pairing(tg, v, TimeProfile::point_mass(0.75)) == doctest::Approx(2.0));
  // piecewise-linear integral: 0.125 + 0.25 + 1.0
  CHECK(spacetime_pairing(tg, v, TimeProfile::constant(1.0)) == doctest::Approx(1.375).epsilon(1e-14));
  CHECK(spacetime_pairing(tg, v, TimeProfile::indicator(0.25, 0.5)) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(spacetime_pairing(tg, v, TimeProfile::constant(0.0)) == 0.0);
}

TEST_CASE("space-time pairing equals the chi-weighted occupation") {
  // int_0^1 X_T(t) psi(t) dt = (1/F_T) int_0^T <N_s, phi> chi(s/T) ds - centering
  const ModelParams p = mp(1, 1.5, 0.5);
  const StableKernel k(1, 1.5);
  const TestFunction phi = TestFunction::gaussian(1, 1.0);
  const double T = 8.0, F = 3.0;
  const Box box = Box::cube(1, 20.0);
  for (const TimeProfile psi : {TimeProfile::constant(1.0), TimeProfile::indicator(0.25, 0.75)}) {
    for (int level = 0; level < 2; ++level) {
      const double step = level == 0 ? 0.05 : 0.025;
      SimOptions opt;
      opt.grid = observation_grid(T, step);
      OccupationObserver occ(opt.grid, {phi}, {[&](double s) { return psi.chi(s / T); }});
      PathObserver* obs[] = {&occ};
      RandomStream rng(9, 0);
      run_population(p, box, T, opt, obs, rng);
      std::vector<double> tg, xt;
      const auto cum = occ.cumulative(0);
      for (std::size_t i = 0; i < opt.grid.size(); ++i) {
        const double h = opt.grid[i];
        tg.push_back(h / T);
        xt.push_back(fluctuation_value(cum[i], centering_mean(k, p, phi, h, Centering::Truncated, box), F));
      }
      const double lhs = spacetime_pairing(tg, xt, psi);
      // mean of the chi-weighted occupation: intensity int_0^T chi(s/T) int_B T_s phi ds
      const double br[] = {0.0, 0.25 * T, 0.75 * T, T};
      const double mw = quad::gk_pieces(
                            [&](double s) {
                              return psi.chi(s / T) * box_mass(k, s, phi, box).inside;
                            },
                            br, 1e-10)
                            .value;
      const double rhs = (occ.weighted(0) - mw) / F;
      CHECK(lhs == doctest::Approx(rhs).epsilon(2e-3));
    }
  }
}
