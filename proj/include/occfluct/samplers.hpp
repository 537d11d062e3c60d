#pragma once

#include "occfluct/model.hpp"
#include "occfluct/stable_numerics.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace occfluct {

/// xoshiro256++ keyed by (seed, stream id) through splitmix64. Satisfies
/// UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }
  double exponential() { return -std::log(uniform()); }
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  std::uint64_t seed_, stream_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// S >= 0 with E exp(-lambda S) = exp(-lambda^a), 0 < a < 1 (Kanter / CMS).
double sample_positive_stable(double a, RandomStream& rng);

/// Draws increments with characteristic function exp(-dt |z|^alpha) as
/// sqrt(2 S) Z, S = dt^{2/alpha} S_1 with S_1 positive (alpha/2)-stable of
/// unit Laplace exponent, Z standard Gaussian in R^d.
class IncrementSampler {
 public:
  explicit IncrementSampler(const StableKernel& k) : d_(k.dimension()), alpha_(k.alpha()) {}
  IncrementSampler(int d, double alpha) : d_(d), alpha_(alpha) {}

  void sample(double dt, RandomStream& rng, std::span<double> out) const;
  int dimension() const { return d_; }

 private:
  int d_;
  double alpha_;
};

std::vector<double> sample_isotropic_increment(const StableKernel& k, double dt, RandomStream& rng);

std::int64_t sample_offspring(const OffspringLaw& law, RandomStream& rng);

std::int64_t sample_poisson(double mean, RandomStream& rng);

/// Points of a Poisson field, flattened (n * d values).
std::vector<double> sample_poisson_field(double intensity, const Box& box, RandomStream& rng);

/// Stable law with characteristic function
///   exp{-scale^index |z|^index (1 - i skewness sgn(z) tan(pi index / 2)) + i location z}.
/// With skewness 1 and scale = t^{1/index} this is the law xi_t of the limit.
struct SkewedStableSpec {
  double index = 1.5;
  double skewness = 1.0;
  double scale = 1.0;
  double location = 0.0;

  static SkewedStableSpec at_time(double index, double t) {
    return SkewedStableSpec{index, 1.0, std::pow(t, 1.0 / index), 0.0};
  }
};

double sample_skewed_stable(const SkewedStableSpec& spec, RandomStream& rng);

}  // namespace occfluct
