#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace occfluct {

struct ModelParams {
  int d = 1;
  double alpha = 2.0;
  double beta = 0.5;
  double V = 1.0;          // branching rate
  double intensity = 1.0;  // Poisson intensity of the initial field

  /// Throws std::invalid_argument unless 0 < alpha <= 2, 0 < beta < 1, V > 0, d >= 1.
  void validate() const;
  /// As validate(), but V == 0 and intensity == 0 are allowed (degenerate oracles).
  void validate_for_simulation() const;
};

enum class Regime { BelowIntermediate, Intermediate, Critical, Large };

std::string_view to_string(Regime r);

struct RegimeInfo {
  Regime regime;
  double critical_dimension;  // alpha (1 + beta) / beta
  double lower_dimension;     // alpha / beta
};

RegimeInfo classify_regime(const ModelParams& p);

/// Which exponent to use for the intermediate-dimension norming.
/// Printed: (2 - beta - (d/alpha) beta) / (1 + beta).
/// Continuous: (2 + beta - (d/alpha) beta) / (1 + beta), the variant that
/// matches the critical norming at the boundary.
enum class IntermediateExponent { Printed, Continuous };

struct Norming {
  double value = 0.0;
  Regime regime = Regime::Large;
  bool provisional = false;  // true for the intermediate regime
  double alternative = 0.0;  // other intermediate variant, 0 otherwise
};

/// F_T. Natural logarithm in the critical regime. Throws for the
/// below-intermediate regime and for T <= 1 at the critical dimension.
Norming norming(const ModelParams& p, double T,
                IntermediateExponent variant = IntermediateExponent::Printed);

/// Offspring law with generating function s + (1 - s)^{1+beta} / (1 + beta).
///
/// p_0 = 1/(1+beta), p_1 = 0 and P(K > k) = q_k / (1 + beta) for k >= 1, with
/// q the Sibuya law of index beta (the derivative of the generating function
/// is 1 - (1 - s)^beta). The table is filled by the binomial recurrence; the
/// mass beyond k_max is available in closed form, so sampling is exact.
class OffspringLaw {
 public:
  static OffspringLaw build(double beta, std::int64_t k_max,
                            bool extend_to_tolerance = false);

  double beta() const { return beta_; }
  std::int64_t k_max() const { return static_cast<std::int64_t>(pmf_.size()) - 1; }
  std::span<const double> pmf() const { return pmf_; }
  double tail_mass() const { return tail_mass_; }

  /// P(K > k), closed form.
  double survival(std::int64_t k) const;
  double truncated_mean() const;
  /// sum_{k > k_max} k p_k, closed form.
  double tail_mean() const;

  /// Smallest k with P(K > k) <= v, for v in (0, 1]. Feeding v ~ U(0,1)
  /// yields an exact draw, including the part of the law beyond k_max.
  std::int64_t inverse_survival(double v) const;

 private:
  double beta_ = 0.5;
  std::vector<double> pmf_;
  std::vector<double> survival_;  // survival_[k] = P(K > k), k <= k_max
  double tail_mass_ = 0.0;
};

/// Thin wrapper matching the build-by-value usage in configs.
OffspringLaw offspring_pmf(double beta, std::int64_t k_max, bool extend_to_tolerance = false);

namespace detail {
/// Taylor coefficients p_0..p_kmax of the generating function without
/// checking beta; beta = 1 gives binary branching.
std::vector<double> offspring_series(double beta, std::int64_t k_max);
}  // namespace detail

}  // namespace occfluct
