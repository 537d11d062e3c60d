#include "occfluct/limit_laws.hpp"

#include "occfluct/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace occfluct {

using std::numbers::pi;

namespace {

// GK15 on [a, b] with the embedded 7-point Gauss weights, in the variable tau;
// x(tau) and the Jacobian are supplied by the caller.
struct Panel {
  std::vector<double> node, wk, wg;
};

Panel gk15(double a, double b) {
  using K = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  const auto& xk = K::abscissa();
  const auto& wk = K::weights();
  const auto& wg = G::weights();
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Panel p;
  for (std::size_t i = 0; i < xk.size(); ++i) {
    const double g = (i % 2 == 0) ? wg[i / 2] : 0.0;  // Gauss nodes sit at even indices
    if (i == 0) {
      p.node.push_back(c);
      p.wk.push_back(h * wk[0]);
      p.wg.push_back(h * g);
    } else {
      for (double s : {-1.0, 1.0}) {
        p.node.push_back(c + s * h * xk[i]);
        p.wk.push_back(h * wk[i]);
        p.wg.push_back(h * g);
      }
    }
  }
  return p;
}

}  // namespace

PotentialTable build_potential_table(const StableKernel& k, std::span<const TestFunction> phis) {
  const int d = k.dimension();
  const double al = k.alpha();
  if (!(d > al)) throw std::invalid_argument("the potential operator needs d > alpha");
  if (phis.empty()) throw std::invalid_argument("no test functions");
  // reference centre and scales
  std::vector<double> centre(d, 0.0);
  double smin = INFINITY, reach = 0.0;
  std::size_t nb = 0;
  for (const auto& f : phis) {
    if (f.dimension() != d) throw std::invalid_argument("test function dimension mismatch");
    for (const auto& b : f.bumps()) {
      for (int i = 0; i < d; ++i) centre[i] += b.center[i];
      smin = std::min(smin, b.sigma);
      ++nb;
    }
  }
  if (nb == 0) smin = 1.0;
  else for (double& c : centre) c /= static_cast<double>(nb);
  bool concentric = true;
  for (const auto& f : phis)
    for (const auto& b : f.bumps()) {
      double off = 0.0;
      for (int i = 0; i < d; ++i) off += (b.center[i] - centre[i]) * (b.center[i] - centre[i]);
      off = std::sqrt(off);
      if (off > 0.0) concentric = false;
      reach = std::max(reach, off + b.sigma);
    }
  if (!concentric && d != 1) throw std::invalid_argument("potential integrals need concentric bumps when d > 1");
  reach = std::max(reach, smin);

  PotentialTable t;
  t.d = d;
  t.alpha = al;
  t.R = 1e6 * reach;
  const double area = concentric ? sphere_area(d) : 1.0;  // d = 1 off-centre: both sides kept separately
  const double r0 = 1e-3 * smin;
  std::vector<Panel> panels;
  std::vector<bool> logscale;
  panels.push_back(gk15(0.0, r0));
  logscale.push_back(false);
  const double per = std::log(10.0) / 3.0;
  for (double tau = std::log(r0); tau < std::log(t.R) - 1e-9; tau += per) {
    panels.push_back(gk15(tau, std::min(tau + per, std::log(t.R))));
    logscale.push_back(true);
  }
  t.G.assign(phis.size(), {});
  auto push = [&](double r, double wk, double wg, double sign) {
    t.r.push_back(r);
    t.weight.push_back(wk);
    t.weight_gauss.push_back(wg);
    std::vector<double> x(centre);
    x[0] += sign * r;
    for (std::size_t j = 0; j < phis.size(); ++j) {
      Estimate g = concentric ? potential_G_radial(k, phis[j], r) : potential_G(k, phis[j], x);
      t.G[j].push_back(g.value);
      if (g.value != 0.0) t.G_rel_error = std::max(t.G_rel_error, g.abs_error / std::abs(g.value));
    }
  };
  for (std::size_t p = 0; p < panels.size(); ++p) {
    for (std::size_t i = 0; i < panels[p].node.size(); ++i) {
      const double r = logscale[p] ? std::exp(panels[p].node[i]) : panels[p].node[i];
      const double jac = (logscale[p] ? r : 1.0) * area * std::pow(r, d - 1);
      if (concentric) {
        push(r, panels[p].wk[i] * jac, panels[p].wg[i] * jac, 1.0);
      } else {
        push(r, panels[p].wk[i] * jac, panels[p].wg[i] * jac, 1.0);
        push(r, panels[p].wk[i] * jac, panels[p].wg[i] * jac, -1.0);
      }
    }
  }
  const double C = k.riesz_constant();
  for (const auto& f : phis) t.tail_coef.push_back(C * f.integral());
  return t;
}

Estimate integrate_potential_power(const PotentialTable& t, std::span<const double> c, double p,
                                   bool signed_part) {
  if (c.size() != t.G.size()) throw std::invalid_argument("coefficient count does not match the table");
  const int d = t.d;
  const double e = d + p * (t.alpha - d);
  if (!(e < 0.0)) throw std::invalid_argument("|G phi|^p is not integrable: need p (d - alpha) > d");
  auto F = [&](double y) {
    const double a = std::pow(std::abs(y), p);
    return signed_part ? (y < 0.0 ? -a : (y > 0.0 ? a : 0.0)) : a;
  };
  double sk = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < t.r.size(); ++i) {
    double y = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) y += c[j] * t.G[j][i];
    const double f = F(y);
    sk += t.weight[i] * f;
    sg += t.weight_gauss[i] * f;
  }
  double A = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) A += c[j] * t.tail_coef[j];
  const double area = sphere_area(d);
  const double tail = area * F(A) * std::pow(t.R, e) / (-e);
  const double err = std::abs(sk - sg) + p * t.G_rel_error * std::abs(sk) + 1e-10 * std::abs(tail);
  return {sk + tail, err};
}

std::complex<double> StableLimitLaw::cf(double z) const {
  if (z == 0.0) return 1.0;
  const double m = scale * std::pow(std::abs(z), index);
  const double sg = z > 0.0 ? 1.0 : -1.0;
  return std::exp(std::complex<double>(-m, m * skew * sg * std::tan(pi * index / 2.0)));
}

namespace {

void require(const ModelParams& p, Regime want) {
  p.validate();
  const Regime r = classify_regime(p).regime;
  if (r != want)
    throw std::invalid_argument(std::string("regime mismatch: parameters are in the ") +
                                std::string(to_string(r)) + " regime, law needs " + std::string(to_string(want)));
}

}  // namespace

StableLimitLaw large_limit_law(const ModelParams& p, const TestFunction& phi, double t) {
  require(p, Regime::Large);
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  const StableKernel k(p.d, p.alpha);
  const double q = 1.0 + p.beta;
  StableLimitLaw law;
  law.regime = Regime::Large;
  law.index = q;
  if (phi.is_zero() || t == 0.0) {
    law.scale = 0.0;
    return law;
  }
  const TestFunction fs[] = {phi};
  const PotentialTable tab = build_potential_table(k, fs);
  const double one[] = {1.0};
  const Estimate a = integrate_potential_power(tab, one, q, false);
  const Estimate s = integrate_potential_power(tab, one, q, true);
  const double Kq = std::pow(constant_K(p.V, p.beta), q);
  law.scale = Kq * t * a.value;
  law.skew = a.value > 0.0 ? s.value / a.value : 0.0;
  law.rel_error = a.rel_error();
  return law;
}

StableLimitLaw critical_limit_law(const ModelParams& p, const TestFunction& phi, double t) {
  require(p, Regime::Critical);
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  const CriticalConstants c = constant_K1(p);
  const double q = 1.0 + p.beta;
  const double lam = phi.integral();
  StableLimitLaw law;
  law.regime = Regime::Critical;
  law.index = q;
  law.scale = t * std::pow(c.K1.value * std::abs(lam), q);
  law.skew = lam >= 0.0 ? 1.0 : -1.0;
  law.rel_error = q * c.K1.rel_error();
  return law;
}

StableLimitLaw spacetime_limit_law(const ModelParams& p, const SpaceTimeFunction& Phi) {
  require(p, Regime::Large);
  const StableKernel k(p.d, p.alpha);
  const double q = 1.0 + p.beta;
  StableLimitLaw law;
  law.regime = Regime::Large;
  law.index = q;
  if (Phi.is_zero()) {
    law.scale = 0.0;
    return law;
  }
  std::vector<TestFunction> phis;
  std::vector<double> br = {0.0, 1.0};
  for (const auto& term : Phi.terms) {
    phis.push_back(term.phi);
    for (double b : term.psi.breakpoints()) br.push_back(b);
  }
  const PotentialTable tab = build_potential_table(k, phis);
  br = quad::clean_breaks(br, 0.0, 1.0);
  double abs_int = 0.0, sgn_int = 0.0, err = 0.0;
  // the s-integrand is piecewise smooth between profile breakpoints
  std::vector<double> c(phis.size());
  auto at = [&](double s, bool sgn) {
    for (std::size_t j = 0; j < phis.size(); ++j) c[j] = Phi.terms[j].psi.chi(s);
    return integrate_potential_power(tab, c, q, sgn);
  };
  for (bool sgn : {false, true}) {
    auto f = [&](double s) { return at(s, sgn).value; };
    const Estimate e = quad::gk_pieces(f, br, 1e-8, 8);
    (sgn ? sgn_int : abs_int) = e.value;
    err += e.abs_error;
  }
  law.scale = std::pow(constant_K(p.V, p.beta), q) * abs_int;
  law.skew = abs_int > 0.0 ? sgn_int / abs_int : 0.0;
  law.rel_error = abs_int > 0.0 ? err / abs_int + q * tab.G_rel_error : 0.0;
  return law;
}

std::complex<double> limit_cf_large(const ModelParams& p, const TestFunction& phi, double t, double z) {
  return large_limit_law(p, phi, t).cf(z);
}

std::complex<double> limit_cf_critical(const ModelParams& p, const TestFunction& phi, double t, double z) {
  return critical_limit_law(p, phi, t).cf(z);
}

std::complex<double> limit_cf_spacetime(const ModelParams& p, const SpaceTimeFunction& Phi, double z) {
  return spacetime_limit_law(p, Phi).cf(z);
}

Estimate stable_cdf(const StableLimitLaw& law, double x) {
  if (!(law.scale > 0.0) || !(law.index > 0.0 && law.index <= 2.0))
    throw std::invalid_argument("stable_cdf needs a positive scale and index in (0, 2]");
  // F(x) = 1/2 - (1/pi) int_0^inf Im(e^{-izx} cf(z)) / z dz, cut where |cf| < 1e-12
  const double zmax = std::pow(std::log(1e12) / law.scale, 1.0 / law.index);
  auto f = [&](double z) {
    if (z == 0.0) return 0.0;
    return std::imag(std::exp(std::complex<double>(0.0, -z * x)) * law.cf(z)) / z;
  };
  std::vector<double> br = {0.0};
  for (double z = zmax * 1e-8; z < zmax; z *= 4.0) br.push_back(z);
  // oscillation from the location term
  if (x != 0.0) {
    const double period = 2.0 * pi / std::abs(x);
    for (double z = period; z < zmax && br.size() < 4000; z += period) br.push_back(z);
  }
  br.push_back(zmax);
  br = quad::clean_breaks(br, 0.0, zmax);
  const Estimate I = quad::gk_pieces(f, br, 1e-10, 12, 1e-9);
  const double v = 0.5 - I.value / pi;
  return {std::clamp(v, 0.0, 1.0), I.abs_error / pi + 1e-12};
}

void write_cf_table(std::ostream& os, const StableLimitLaw& law, std::span<const double> zs) {
  const auto old = os.precision(17);
  os << "z,re,im\n";
  for (double z : zs) {
    const auto c = law.cf(z);
    os << z << ',' << c.real() << ',' << c.imag() << '\n';
  }
  os.precision(old);
}

}  // namespace occfluct
