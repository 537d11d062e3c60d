#include "occfluct/samplers.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace occfluct {

using std::numbers::pi;

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {
  std::uint64_t a = seed;
  std::uint64_t key = splitmix64(a);
  std::uint64_t b = stream_id ^ 0x6a09e667f3bcc909ULL;
  key ^= splitmix64(b);
  for (auto& w : s_) w = splitmix64(key);
}

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double th = 2.0 * pi * uniform();
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

double sample_positive_stable(double a, RandomStream& rng) {
  const double u = pi * rng.uniform();
  const double e = rng.exponential();
  return std::pow(detail::kanter_A(a, u) / e, (1.0 - a) / a);
}

void IncrementSampler::sample(double dt, RandomStream& rng, std::span<double> out) const {
  double sd;
  if (alpha_ == 2.0) {
    sd = std::sqrt(2.0 * dt);
  } else {
    const double s = std::pow(dt, 2.0 / alpha_) * sample_positive_stable(0.5 * alpha_, rng);
    sd = std::sqrt(2.0 * s);
  }
  for (int i = 0; i < d_; ++i) out[i] = sd * rng.normal();
}

std::vector<double> sample_isotropic_increment(const StableKernel& k, double dt, RandomStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("increment needs dt > 0");
  std::vector<double> out(k.dimension());
  IncrementSampler(k).sample(dt, rng, out);
  return out;
}

std::int64_t sample_offspring(const OffspringLaw& law, RandomStream& rng) {
  return law.inverse_survival(rng.uniform());
}

std::int64_t sample_poisson(double mean, RandomStream& rng) {
  if (!(mean >= 0.0)) throw std::invalid_argument("Poisson mean must be >= 0");
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

std::vector<double> sample_poisson_field(double intensity, const Box& box, RandomStream& rng) {
  const int d = box.dimension();
  const std::int64_t n = sample_poisson(intensity * box.volume(), rng);
  std::vector<double> pts(static_cast<std::size_t>(n) * d);
  for (std::int64_t j = 0; j < n; ++j)
    for (int i = 0; i < d; ++i)
      pts[j * d + i] = box.lo[i] + (box.hi[i] - box.lo[i]) * rng.uniform();
  return pts;
}

double sample_skewed_stable(const SkewedStableSpec& spec, RandomStream& rng) {
  const double g = spec.index;
  if (!(g > 1.0 && g < 2.0)) throw std::invalid_argument("skewed stable index must lie in (1, 2)");
  const double b = spec.skewness;
  // Weron's form of the Chambers-Mallows-Stuck transform for the
  // parameterisation exp{-|z|^g (1 - i b sgn z tan(pi g / 2))}.
  const double tg = std::tan(pi * g / 2.0);
  const double B = std::atan(b * tg) / g;
  const double S = std::pow(1.0 + b * b * tg * tg, 1.0 / (2.0 * g));
  const double v = pi * (rng.uniform() - 0.5);
  const double w = rng.exponential();
  const double x = S * std::sin(g * (v + B)) / std::pow(std::cos(v), 1.0 / g) *
                   std::pow(std::cos(v - g * (v + B)) / w, (1.0 - g) / g);
  return spec.scale * x + spec.location;
}

}  // namespace occfluct
