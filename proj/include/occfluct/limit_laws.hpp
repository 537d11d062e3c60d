#pragma once

#include "occfluct/model.hpp"
#include "occfluct/stable_numerics.hpp"
#include "occfluct/test_function.hpp"

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

namespace occfluct {

/// Nodes and weights for integrals over R^d of functionals of
/// G phi_1, ..., G phi_m, with the r^{alpha-d} power tail beyond R handled
/// in closed form. Built around a common centre for concentric functions,
/// or on the line for d = 1.
struct PotentialTable {
  int d = 1;
  double alpha = 1.0;
  std::vector<double> weight;        // Kronrod weights (dx)
  std::vector<double> weight_gauss;  // embedded Gauss weights, 0 off the Gauss nodes
  std::vector<double> r;             // distance from the reference centre
  std::vector<std::vector<double>> G;  // G[j][i]
  std::vector<double> tail_coef;     // G phi_j ~ tail_coef[j] r^{alpha-d} for r > R
  double R = 0.0;
  double G_rel_error = 0.0;
};

PotentialTable build_potential_table(const StableKernel& k, std::span<const TestFunction> phis);

/// int |sum_j c_j G phi_j|^p dx (signed = false) or int |.|^p sgn(.) dx.
Estimate integrate_potential_power(const PotentialTable& t, std::span<const double> c, double p,
                                   bool signed_part = false);

/// exp{-scale |z|^index (1 - i skew sgn(z) tan(pi index / 2))}.
struct StableLimitLaw {
  Regime regime = Regime::Large;
  double index = 1.5;
  double scale = 1.0;
  double skew = 1.0;
  double rel_error = 0.0;  // of scale

  std::complex<double> cf(double z) const;
};

/// Law of <X(t), phi> in the large-dimension limit.
StableLimitLaw large_limit_law(const ModelParams& p, const TestFunction& phi, double t);
/// Law of K_1 lambda(phi) xi_t at the critical dimension.
StableLimitLaw critical_limit_law(const ModelParams& p, const TestFunction& phi, double t);
/// Law of <X~, Phi> in the large-dimension limit.
StableLimitLaw spacetime_limit_law(const ModelParams& p, const SpaceTimeFunction& Phi);

std::complex<double> limit_cf_large(const ModelParams& p, const TestFunction& phi, double t, double z);
std::complex<double> limit_cf_critical(const ModelParams& p, const TestFunction& phi, double t, double z);
std::complex<double> limit_cf_spacetime(const ModelParams& p, const SpaceTimeFunction& Phi, double z);

/// Gil-Pelaez inversion, absolute error target 1e-6.
Estimate stable_cdf(const StableLimitLaw& law, double x);

/// Rows "z,re,im".
void write_cf_table(std::ostream& os, const StableLimitLaw& law, std::span<const double> zs);

}  // namespace occfluct
