#include "gen.hpp"
#include "occfluct/limit_laws.hpp"
#include "occfluct/samplers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

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

}  // namespace

TEST_CASE("limit CF is Hermitian and bounded") {
  const StableLimitLaw law = large_limit_law(mp(2, 0.5, 0.5), TestFunction::gaussian(2, 1.0), 1.0);
  CHECK(law.cf(0.0) == std::complex<double>(1.0, 0.0));
  gen::Gen g(31);
  for (int i = 0; i < 100; ++i) {
    const double z = g.uniform(-10.0, 10.0);
    const auto a = law.cf(z), b = law.cf(-z);
    CHECK(a.real() == doctest::Approx(b.real()).epsilon(1e-14));
    CHECK(a.imag() == doctest::Approx(-b.imag()).epsilon(1e-14));
    CHECK(std::abs(a) <= 1.0 + 1e-15);
  }
}

TEST_CASE("large-dimension law: scale against a separate quadrature") {
  const ModelParams p = mp(2, 0.5, 0.5);
  const TestFunction phi = TestFunction::gaussian(2, 1.0);
  const StableLimitLaw law = large_limit_law(p, phi, 1.0);
  CHECK(law.index == 1.5);
  CHECK(law.skew == doctest::Approx(1.0));
  // int (G phi)^{3/2} dx = 2 pi int r (G phi)^{3/2} dr with the time-integral route for G
  const StableKernel k(2, 0.5);
  auto G = [&](double r) {
    const double x[] = {r, 0.0};
    return potential_G_time_integral(k, phi, x).value;
  };
  const double R = 400.0;
  const double br[] = {0.0, 1.0, 4.0, 20.0, 100.0, R};
  const Estimate body = quad::gk_pieces([&](double r) { return 2 * std::numbers::pi * r * std::pow(G(r), 1.5); }, br,
                                        1e-7, 6);
  // G phi ~ C lambda(phi) r^{-3/2}, corrections O(r^{-2}) relative
  const double c = k.riesz_constant() * phi.integral();
  const double tail = 2 * std::numbers::pi * std::pow(c, 1.5) * std::pow(R, -0.25) / 0.25;
  const double expected = std::pow(constant_K(1.0, 0.5), 1.5) * (body.value + tail);
  CHECK(law.scale == doctest::Approx(expected).epsilon(1e-4));
  CHECK(law.scale == doctest::Approx(6.246674272159529).epsilon(1e-8));
}

TEST_CASE("large-dimension law: homogeneity in t and phi") {
  const ModelParams p = mp(3, 0.8, 0.6);
  REQUIRE(classify_regime(p).regime == Regime::Large);
  const TestFunction phi = TestFunction::gaussian(3, 0.8);
  const StableLimitLaw a = large_limit_law(p, phi, 1.0);
  CHECK(large_limit_law(p, phi, 2.5).scale == doctest::Approx(2.5 * a.scale).epsilon(1e-12));
  CHECK(large_limit_law(p, phi.scaled(3.0), 1.0).scale == doctest::Approx(std::pow(3.0, 1.6) * a.scale).epsilon(1e-8));
  const StableLimitLaw neg = large_limit_law(p, phi.scaled(-1.0), 1.0);
  CHECK(neg.scale == doctest::Approx(a.scale).epsilon(1e-8));
  CHECK(neg.skew == doctest::Approx(-1.0));
  CHECK(large_limit_law(p, phi, 0.0).scale == 0.0);
  CHECK_THROWS(large_limit_law(mp(1, 1.0 / 3.0, 0.5), TestFunction::gaussian(1, 1.0), 1.0));
}

TEST_CASE("space-time law reduces to the single-time law") {
  const ModelParams p = mp(2, 0.5, 0.5);
  const TestFunction phi = TestFunction::gaussian(2, 1.0);
  const auto st = spacetime_limit_law(p, SpaceTimeFunction::product(phi, TimeProfile::point_mass(0.6)));
  CHECK(st.scale == doctest::Approx(large_limit_law(p, phi, 0.6).scale).epsilon(1e-6));
  // psi == 1: chi(s) = 1 - s, so the scale is int_0^1 (1-s)^{3/2} ds = 2/5 of the t = 1 value
  const auto c1 = spacetime_limit_law(p, SpaceTimeFunction::product(phi, TimeProfile::constant(1.0)));
  CHECK(c1.scale == doctest::Approx(0.4 * large_limit_law(p, phi, 1.0).scale).epsilon(1e-6));
}

TEST_CASE("critical law") {
  const ModelParams p = mp(1, 1.0 / 3.0, 0.5);
  const TestFunction phi = TestFunction::gaussian(1, 1.0);
  const StableLimitLaw law = critical_limit_law(p, phi, 1.0);
  const double K1 = constant_K1(p).K1.value;
  CHECK(law.scale == doctest::Approx(std::pow(K1 * phi.integral(), 1.5)).epsilon(1e-12));
  CHECK(law.scale == doctest::Approx(1.12303897776).epsilon(1e-8));
  CHECK(critical_limit_law(p, phi, 3.0).scale == doctest::Approx(3.0 * law.scale).epsilon(1e-12));
}

TEST_CASE("stable CDF") {
  StableLimitLaw law;
  law.index = 1.5;
  law.scale = 2.0;
  law.skew = 1.0;
  double prev = 0.0;
  for (double x = -8.0; x <= 20.0; x += 0.5) {
    const double F = stable_cdf(law, x).value;
    CHECK(F >= prev - 1e-6);
    CHECK(F >= -1e-6);
    CHECK(F <= 1.0 + 1e-6);
    prev = F;
  }
  CHECK(stable_cdf(law, -8.0).value < 1e-3);
  CHECK(stable_cdf(law, 200.0).value > 0.99);
  // against the empirical CDF of the sampler
  RandomStream rng(32, 0);
  const SkewedStableSpec spec{1.5, 1.0, std::pow(2.0, 1.0 / 1.5), 0.0};
  std::vector<double> xs(100000);
  for (auto& v : xs) v = sample_skewed_stable(spec, rng);
  std::sort(xs.begin(), xs.end());
  for (double x : {-2.0, 0.0, 1.0, 5.0}) {
    const double emp = static_cast<double>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) / xs.size();
    CHECK(std::abs(emp - stable_cdf(law, x).value) < 4.0 * 0.5 / std::sqrt(double(xs.size())));
  }
}

TEST_CASE("potential power integrals") {
  const StableKernel k(2, 0.5);
  const TestFunction fs[] = {TestFunction::gaussian(2, 1.0), TestFunction::gaussian(2, 2.0, 0.5)};
  const PotentialTable t = build_potential_table(k, fs);
  const double c0[] = {0.0, 0.0}, c1[] = {1.0, 0.5}, c2[] = {2.0, 1.0};
  CHECK(integrate_potential_power(t, c0, 1.5).value == 0.0);
  CHECK(integrate_potential_power(t, c2, 1.5).value ==
        doctest::Approx(std::pow(2.0, 1.5) * integrate_potential_power(t, c1, 1.5).value).epsilon(1e-12));
  const double cm[] = {1.0, -3.0};
  const double a = integrate_potential_power(t, cm, 1.5).value, s = integrate_potential_power(t, cm, 1.5, true).value;
  CHECK(std::abs(s) <= a);
}
