#pragma once

#include "occfluct/branching_sim.hpp"
#include "occfluct/model.hpp"
#include "occfluct/stable_numerics.hpp"
#include "occfluct/test_function.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace occfluct {

/// Psi(x, t) = sum_j phi_j(x) chi_j(t) with chi_j(t) = int_t^1 psi_j; a
/// point-mass profile gives the step form phi_j 1_{[0, t_j]}.
/// Psi_T(x, s) = Psi(x, s / T) / F_T.
using PsiProfile = SpaceTimeFunction;

/// Time weights of the functional Y = int_0^T <N_s, Psi_T(., s)> ds. With a
/// grid step the integral is replaced by the trapezoid rule on k * step,
/// which is what the simulator evaluates; both sides of the Laplace identity
/// then describe the same random variable exactly.
struct ForcingSpec {
  std::optional<double> grid_step;
};

struct SolverConfig {
  double half_width = 8192.0;  // periodic domain [-half_width, half_width)
  double dx = 0.5;
  double dt = 0.01;
  ForcingSpec forcing;
  std::vector<double> snapshot_times;  // solver times at which v_T(., t) is kept
  std::optional<Box> box;
  int newton_max = 60;
};

struct VTField {
  std::vector<double> x;
  std::vector<double> times;
  std::vector<std::vector<double>> v, u;  // u = int_0^t T_{t-r} Psi_T(., T - r) dr
  double T = 0.0, F_T = 1.0, dt = 0.0, dx = 0.0;
  std::optional<double> grid_step;
  // Integrals over one period (equal to integrals over R up to the wrapped tails).
  double I1 = 0.0, I2 = 0.0, I3 = 0.0;  // continuous forcing only
  double mass_u = 0.0, mass_v = 0.0;    // int u(x, T) dx, int v(x, T) dx
  double box_u = 0.0, box_v = 0.0;      // the same over the box, if one was given
  double min_v = 0.0, max_v = 0.0, max_excess = 0.0;  // max (v - u)

  /// v_T(x, t) at a snapshot time, linear in x between nodes.
  double value(double x, double t) const;
  void write(std::ostream& os) const;  // rows "t,x,v,u"
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves v(t) = int_0^t T_{t-r}[Psi_T(., T-r)(1 - v(r)) - V/(1+beta) v(r)^{1+beta}] dr
/// for d = 1 on a periodic grid (semigroup by FFT, exponential trapezoid in
/// time, Newton for the local nonlinearity). Throws InvariantViolation if
/// 0 <= v <= 1 or v <= u fails by more than 1e-8.
VTField solve_vT(const ModelParams& p, const PsiProfile& psi, double T, double F_T, const SolverConfig& cfg);

struct LaplaceRHS {
  double I1 = 0.0, I2 = 0.0, I3 = 0.0;
  double value_I = 0.0;     // exp{intensity (I1 + V/(1+beta) (I2 - I3))}; NaN for grid forcing
  double value_full = 0.0;  // exp{intensity int (u - v)(x, T) dx}
  double value_box = 0.0;   // exp{intensity int_B (u - v)(x, T) dx}; NaN without a box
  // absolute uncertainties from step doubling in t and halving of the x grid
  double err_I = 0.0, err_full = 0.0, err_box = 0.0;
};

LaplaceRHS laplace_rhs(const VTField& f, const ModelParams& p);
/// laplace_rhs with its numerical uncertainty (three solves).
LaplaceRHS laplace_rhs_with_error(const ModelParams& p, const PsiProfile& psi, double T, double F_T,
                                  const SolverConfig& cfg);

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::int64_t replicas = 0;
  double centering = 0.0;    // mean of Y for the truncated system
  double bias_bound = 0.0;   // intensity int_{B^c} ... : gap to the infinite system
  double mean_Y = 0.0;
  std::int64_t failures = 0;
};

/// Everything a population replica of the Laplace functional needs.
struct LaplaceMcPlan {
  ModelParams p;
  Box box;
  double T = 0.0;
  SimOptions opt;
  std::vector<TestFunction> phis;
  std::vector<std::vector<double>> coef;  // [grid index][term]: W_k chi_j(s_k / T) / F_T
  double centering = 0.0;
  double bias_bound = 0.0;
};

LaplaceMcPlan make_laplace_plan(const ModelParams& p, const PsiProfile& psi, double T, double F_T, const Box& box,
                                double grid_step);
/// Y = sum_k W_k <N_{s_k}, Psi_T(., s_k)> for replica r (stream (seed, r)).
/// Throws PopulationExplosion.
double laplace_replica_Y(const LaplaceMcPlan& plan, std::int64_t r, std::uint64_t seed);

/// E exp{-(Y - m_B)} over population replicas started in `box`, Y evaluated
/// with the trapezoid rule of step grid_step, m_B its mean.
McEstimate mc_laplace_lhs(const ModelParams& p, const PsiProfile& psi, double T, double F_T, const Box& box,
                          double grid_step, std::int64_t replicas, std::uint64_t seed, int threads = 1);

/// 1 - E exp{-sum_k W_k <N^x_{r_k}, Psi_T(., T - t + r_k)>} from single-ancestor
/// runs; T - t must lie on the grid.
McEstimate vT_mc_oracle(const ModelParams& p, double x, double t, const PsiProfile& psi, double T, double F_T,
                        double grid_step, std::int64_t replicas, std::uint64_t seed, int threads = 1);

struct LimitRow {
  double T = 0.0;
  Estimate value;
  double limit = 0.0;
  double rel_gap = 0.0;
};

struct LimitTable {
  std::vector<LimitRow> rows;
  Estimate limit;
  bool gap_decreasing = false;
  std::string note;
};

/// I_2(T) for Phi = phi (x) psi from its substituted form, against
/// int int (G phi chi)^{1+beta}. Large regime, concentric phi >= 0, d <= 2.
LimitTable deterministic_limit_I2(const ModelParams& p, const TestFunction& phi, const TimeProfile& psi,
                                  std::span<const double> T_list);

/// (1/log T) int (int_0^T T_u phi du)^{1+beta} dx against ((1+beta)/V) K_2 lambda(phi)^{1+beta}.
/// Critical regime, d in {1, 2}, concentric phi >= 0.
LimitTable critical_log_limit(const ModelParams& p, const TestFunction& phi, std::span<const double> T_list);

/// The functional Y's trapezoid weights W_k on observation_grid(T, step).
std::vector<double> trapezoid_weights(std::span<const double> grid);

}  // namespace occfluct
