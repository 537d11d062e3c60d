#include "occfluct/model.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace occfluct {

namespace {

void check_common(const ModelParams& p) {
  if (p.d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(p.alpha > 0.0 && p.alpha <= 2.0)) throw std::invalid_argument("alpha must lie in (0, 2]");
  if (!(p.beta > 0.0 && p.beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
}

// Hard cap for auto-extension of the pmf table; beyond it the closed-form
// tail takes over, so no accuracy is lost by stopping early.
constexpr std::int64_t kMaxTable = std::int64_t{1} << 22;

}  // namespace

void ModelParams::validate() const {
  check_common(*this);
  if (!(V > 0.0)) throw std::invalid_argument("V must be > 0");
  if (!(intensity > 0.0)) throw std::invalid_argument("intensity must be > 0");
}

void ModelParams::validate_for_simulation() const {
  check_common(*this);
  if (!(V >= 0.0) || !std::isfinite(V)) throw std::invalid_argument("V must be >= 0");
  if (!(intensity >= 0.0) || !std::isfinite(intensity))
    throw std::invalid_argument("intensity must be >= 0");
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::BelowIntermediate: return "below-intermediate";
    case Regime::Intermediate: return "intermediate";
    case Regime::Critical: return "critical";
    case Regime::Large: return "large";
  }
  return "unknown";
}

RegimeInfo classify_regime(const ModelParams& p) {
  check_common(p);
  RegimeInfo info;
  info.critical_dimension = p.alpha * (1.0 + p.beta) / p.beta;
  info.lower_dimension = p.alpha / p.beta;
  const double d = p.d;
  if (std::abs(d - info.critical_dimension) <= 1e-12 * info.critical_dimension)
    info.regime = Regime::Critical;
  else if (d > info.critical_dimension)
    info.regime = Regime::Large;
  else if (d > info.lower_dimension)
    info.regime = Regime::Intermediate;
  else
    info.regime = Regime::BelowIntermediate;
  return info;
}

Norming norming(const ModelParams& p, double T, IntermediateExponent variant) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive");
  const RegimeInfo info = classify_regime(p);
  const double b = p.beta;
  Norming n;
  n.regime = info.regime;
  switch (info.regime) {
    case Regime::Large:
      n.value = std::pow(T, 1.0 / (1.0 + b));
      break;
    case Regime::Critical:
      if (T <= 1.0) throw std::invalid_argument("critical norming needs T > 1");
      n.value = std::pow(T * std::log(T), 1.0 / (1.0 + b));
      break;
    case Regime::Intermediate: {
      const double r = p.d / p.alpha * b;
      const double printed = std::pow(T, (2.0 - b - r) / (1.0 + b));
      const double continuous = std::pow(T, (2.0 + b - r) / (1.0 + b));
      n.provisional = true;
      n.value = variant == IntermediateExponent::Printed ? printed : continuous;
      n.alternative = variant == IntermediateExponent::Printed ? continuous : printed;
      break;
    }
    case Regime::BelowIntermediate:
      throw std::invalid_argument("no norming defined below the intermediate dimensions");
  }
  return n;
}

namespace detail {

std::vector<double> offspring_series(double beta, std::int64_t k_max) {
  if (k_max < 2) throw std::invalid_argument("k_max must be >= 2");
  std::vector<double> p(static_cast<std::size_t>(k_max) + 1, 0.0);
  p[0] = 1.0 / (1.0 + beta);
  p[1] = 0.0;
  p[2] = beta / 2.0;
  for (std::int64_t k = 2; k < k_max; ++k)
    p[k + 1] = p[k] * (static_cast<double>(k) - 1.0 - beta) / static_cast<double>(k + 1);
  return p;
}

}  // namespace detail

namespace {

// P(J > n) for the Sibuya law of index beta: Gamma(n+1-beta) / (Gamma(1-beta) Gamma(n+1)).
double sibuya_survival(double beta, std::int64_t n) {
  if (n <= 0) return 1.0;
  const double x = static_cast<double>(n) + 1.0 - beta;
  return boost::math::tgamma_delta_ratio(x, beta) / boost::math::tgamma(1.0 - beta);
}

// P(K > k) for k >= 1.
double survival_closed(double beta, std::int64_t k) {
  // q_k = P(J > k-1) - P(J > k) = beta/k * P(J > k-1)
  const double q = beta / static_cast<double>(k) * sibuya_survival(beta, k - 1);
  return q / (1.0 + beta);
}

}  // namespace

OffspringLaw OffspringLaw::build(double beta, std::int64_t k_max, bool extend_to_tolerance) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (k_max < 2) throw std::invalid_argument("k_max must be >= 2");
  if (extend_to_tolerance) {
    while (k_max < kMaxTable && survival_closed(beta, k_max) >= 1e-12) k_max *= 2;
    k_max = std::min(k_max, kMaxTable);
  }
  OffspringLaw law;
  law.beta_ = beta;
  law.pmf_ = detail::offspring_series(beta, k_max);
  law.survival_.resize(law.pmf_.size());
  law.survival_[0] = beta / (1.0 + beta);
  for (std::int64_t k = 1; k <= k_max; ++k) law.survival_[k] = survival_closed(beta, k);
  law.tail_mass_ = law.survival_.back();
  return law;
}

OffspringLaw offspring_pmf(double beta, std::int64_t k_max, bool extend_to_tolerance) {
  return OffspringLaw::build(beta, k_max, extend_to_tolerance);
}

double OffspringLaw::survival(std::int64_t k) const {
  if (k < 0) return 1.0;
  if (k < static_cast<std::int64_t>(survival_.size())) return survival_[k];
  return survival_closed(beta_, k);
}

double OffspringLaw::truncated_mean() const {
  double m = 0.0;
  for (std::size_t k = pmf_.size(); k-- > 1;) m += static_cast<double>(k) * pmf_[k];
  return m;
}

double OffspringLaw::tail_mean() const {
  const std::int64_t m = k_max();
  // sum_{k>m} k p_k = m P(K>m) + sum_{j>=m} P(K>j) = m S(m) + P(J > m-1)/(1+beta)
  return static_cast<double>(m) * tail_mass_ + sibuya_survival(beta_, m - 1) / (1.0 + beta_);
}

std::int64_t OffspringLaw::inverse_survival(double v) const {
  if (!(v > 0.0)) v = std::numeric_limits<double>::min();
  if (v >= 1.0) return 0;
  if (v >= tail_mass_) {
    // survival_ is nonincreasing (strictly after k = 1)
    std::size_t lo = 0, hi = survival_.size() - 1;  // S(hi) <= v
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (survival_[mid] <= v) hi = mid; else lo = mid + 1;
    }
    return static_cast<std::int64_t>(lo);
  }
  // Beyond the table: S(k) ~ c k^{-1-beta}; bracket then bisect.
  std::int64_t lo = k_max();  // S(lo) > v
  std::int64_t hi = lo;
  const double c = survival_closed(beta_, lo) * std::pow(static_cast<double>(lo), 1.0 + beta_);
  const double guess = std::pow(c / v, 1.0 / (1.0 + beta_));
  constexpr double kCap = 9.0e18;
  hi = static_cast<std::int64_t>(std::min(kCap, std::max(guess * 1.5, static_cast<double>(lo) + 1.0)));
  while (survival_closed(beta_, hi) > v) {
    lo = hi;
    if (hi > static_cast<std::int64_t>(kCap / 2)) return hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (survival_closed(beta_, mid) <= v) hi = mid; else lo = mid;
  }
  return hi;
}

}  // namespace occfluct
