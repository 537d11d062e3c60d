#include "occfluct/samplers.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace occfluct;

TEST_CASE("random streams are keyed by (seed, stream)") {
  RandomStream a(5, 9), b(5, 9), c(5, 10), e(6, 9);
  bool differ_c = false, differ_e = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    differ_c |= x != c();
    differ_e |= x != e();
  }
  CHECK(differ_c);
  CHECK(differ_e);
  RandomStream u(1, 1);
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("positive stable Laplace transform") {
  for (double a : {0.25, 0.5, 0.75}) {
    RandomStream rng(3, static_cast<std::uint64_t>(a * 100));
    const int n = 100000;
    const double lams[] = {0.1, 1.0, 4.0};
    double acc[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
      const double s = sample_positive_stable(a, rng);
      REQUIRE(s > 0.0);
      for (int j = 0; j < 3; ++j) acc[j] += std::exp(-lams[j] * s);
    }
    for (int j = 0; j < 3; ++j) CHECK(std::abs(acc[j] / n - std::exp(-std::pow(lams[j], a))) < 4.0 / std::sqrt(n));
  }
}

TEST_CASE("isotropic increments have CF exp(-dt |z|^alpha)") {
  struct Case {
    double alpha;
    int d;
  };
  for (const auto c : {Case{0.5, 2}, Case{1.5, 1}, Case{2.0, 3}}) {
    CAPTURE(c.alpha);
    const IncrementSampler inc(c.d, c.alpha);
    RandomStream rng(4, c.d);
    const int n = 100000;
    const double dt = 0.7;
    const double zs[] = {0.1, 0.5, 1.0, 2.0};
    std::vector<std::complex<double>> axis(4), diag(4);
    std::vector<double> x(c.d);
    for (int i = 0; i < n; ++i) {
      inc.sample(dt, rng, x);
      double proj = x[0];
      if (c.d > 1) proj = (x[0] + x[1]) / std::numbers::sqrt2;
      for (int j = 0; j < 4; ++j) {
        axis[j] += std::polar(1.0, zs[j] * x[0]);
        diag[j] += std::polar(1.0, zs[j] * proj);
      }
    }
    for (int j = 0; j < 4; ++j) {
      const double target = std::exp(-dt * std::pow(zs[j], c.alpha));
      CHECK(std::abs(axis[j] / double(n) - target) < 4.0 / std::sqrt(n));
      CHECK(std::abs(diag[j] / double(n) - target) < 4.0 / std::sqrt(n));
    }
  }
}

TEST_CASE("skewed stable sampler matches its CF") {
  const SkewedStableSpec specs[] = {SkewedStableSpec::at_time(1.5, 1.0), SkewedStableSpec{1.2, 0.3, 2.0, -1.0},
                                    SkewedStableSpec{1.8, -1.0, 0.5, 0.25}};
  for (const auto& s : specs) {
    RandomStream rng(5, static_cast<std::uint64_t>(s.index * 10));
    const int n = 100000;
    const double zs[] = {-2.0, -0.5, 0.3, 1.0, 3.0};
    std::vector<std::complex<double>> acc(5);
    for (int i = 0; i < n; ++i) {
      const double x = sample_skewed_stable(s, rng);
      for (int j = 0; j < 5; ++j) acc[j] += std::polar(1.0, zs[j] * x);
    }
    for (int j = 0; j < 5; ++j) {
      const double z = zs[j];
      const double m = std::pow(s.scale * std::abs(z), s.index);
      const std::complex<double> expo(-m, m * s.skewness * (z > 0 ? 1 : -1) * std::tan(std::numbers::pi * s.index / 2) +
                                              s.location * z);
      CHECK(std::abs(acc[j] / double(n) - std::exp(expo)) < 4.0 / std::sqrt(n));
    }
  }
  RandomStream rng(1, 1);
  CHECK_THROWS(sample_skewed_stable(SkewedStableSpec{1.0, 1.0, 1.0, 0.0}, rng));
}

TEST_CASE("Poisson counts") {
  for (double mean : {0.3, 3.5, 40.0, 12345.0}) {
    RandomStream rng(6, static_cast<std::uint64_t>(mean * 10));
    const int n = 20000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const auto k = sample_poisson(mean, rng);
      REQUIRE(k >= 0);
      s += k;
      s2 += double(k) * k;
    }
    const double m = s / n, v = s2 / n - m * m;
    CHECK(std::abs(m - mean) < 4.0 * std::sqrt(mean / n));
    CHECK(v == doctest::Approx(mean).epsilon(0.05));
  }
  RandomStream rng(6, 0);
  CHECK(sample_poisson(0.0, rng) == 0);
}

TEST_CASE("Poisson field lies in the box") {
  RandomStream rng(7, 0);
  Box b;
  b.lo = {-1.0, 2.0};
  b.hi = {3.0, 2.5};
  double total = 0;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    const auto pts = sample_poisson_field(5.0, b, rng);
    REQUIRE(pts.size() % 2 == 0);
    for (std::size_t i = 0; i < pts.size(); i += 2) REQUIRE(b.contains(std::span<const double>(pts).subspan(i, 2)));
    total += pts.size() / 2;
  }
  CHECK(std::abs(total / reps - 10.0) < 4.0 * std::sqrt(10.0 / reps));
}
