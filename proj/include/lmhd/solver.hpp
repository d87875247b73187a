#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lmhd/ops.hpp"
#include "lmhd/schedule.hpp"

namespace lmhd {

enum class Integrator { if_rk4, imex_cn };

struct SolverConfig {
  int n = 32;
  double dt = 1e-3;
  double nu1 = 0.05;
  double nu2 = 0.05;
  Integrator integrator = Integrator::if_rk4;
  double t_end = 1.0;

  void validate() const {
    if (dt <= 0) fail_config("solver: dt must be positive");
    if (n < 8) fail_config("solver: N >= 8 required");
    if (nu1 <= 0 || nu2 <= 0) fail_config("solver: viscosities must be positive");
  }
};

struct SolverState {
  double t = 0.0;
  VectorField u, B;
};

struct DiagRow {
  double t = 0;
  double energy = 0;              // ||u||^2 + ||B||^2
  double dissipation_integral = 0;  // int_0^t nu1 ||grad u||^2 + nu2 ||grad B||^2
  double cross_helicity = 0;      // int u . B
  double hm_uu = 0, hm_bb = 0, hm_bu = 0, hm_ub = 0;  // L1 norms of eq.-level
                                                      // high-mode nonlinearities
  double grad_norm_sq = 0;        // ||grad u||^2 + ||grad B||^2
};

struct Trajectory {
  std::vector<double> times;
  std::vector<VectorField> u, B;
  std::vector<DiagRow> diag;
};

// Full right-hand side with the pressure eliminated by the Leray projector;
// nonlinear terms built exclusively from P_{<Lambda(t)}-truncated fields and
// re-truncated by P_{<Lambda(t)}.
void rhs(const SolverState& s, const SolverConfig& cfg, const WavenumberSchedule& sched,
         VectorField& du, VectorField& dB);

// One step of the configured integrator; Lambda is evaluated at the step
// midpoint. Aborts with a diagnostic on NaN/Inf.
SolverState step(const SolverState& s, double dt, const SolverConfig& cfg,
                 const WavenumberSchedule& sched);

// Integrates from (u0, B0) at t = 0 and records snapshots at output_times
// (each rounded to the nearest step). Diagnostics are recorded at the same
// times.
Trajectory solve(const SolverConfig& cfg, const WavenumberSchedule& sched, const VectorField& u0,
                 const VectorField& B0, const std::vector<double>& output_times);

// max over rows of |E(t)/2 + D(t) - E(0)/2| / (E(0)/2)
double energy_balance_residual(const Trajectory& traj);

struct RegularityReport {
  bool threshold_crossed = false;
  double t0 = 0.0;                  // first time ||(grad u, grad B)||^4 < c2 nu^4 / c1
  bool monotone_after = false;      // discrete d/dt ||grad||^2 < 0 for t > t0
  double max_rise_after = 0.0;
};

RegularityReport eventual_regularity_check(const Trajectory& traj, double nu, double c1, double c2);

// --- initial data -----------------------------------------------------------

// Random div-free mean-free field with |u_hat(xi)| ~ (1+|xi|)^{-spectral_slope}
// and L2 norm `amplitude`; spectral_slope ~ 4.5 gives comfortable H^3 data.
VectorField random_smooth_field(const Grid& g, uint64_t seed, double amplitude,
                                double spectral_slope);

// Named analytic fields: "taylor_green" (velocity-type), "shear",
// "abc" (Beltrami). All div-free, mean-free.
VectorField named_field(const Grid& g, const std::string& name, double amplitude);

}  // namespace lmhd
