#pragma once

#include <vector>

#include "lmhd/ops.hpp"
#include "lmhd/schedule.hpp"
#include "lmhd/solver.hpp"

namespace lmhd {

// Candidate solution of the relaxed MHD-Reynolds system at one instant.
struct RelaxedTuple {
  double t = 0;
  VectorField u, B;
  TensorField Ru;   // symmetric traceless (verbatim assembly is symmetric)
  TensorField RB;   // skew symmetric
  ScalarField P;
};

// Six-term expression for the level-0 Reynolds stress of the truncated
// system; ring-product = traceless tensor product (trace folded into P0).
TensorField initial_reynolds_stress(const VectorField& u, const VectorField& B, double lambda);

// Skew counterpart for the magnetic equation.
TensorField initial_magnetic_stress(const VectorField& u, const VectorField& B, double lambda);

// Pressure of the truncated system itself: p with
// grad p = -(Id - P_H) of the truncated advection force.
ScalarField lambda_mhd_pressure(const VectorField& u, const VectorField& B, double lambda,
                                double nu1, double nu2);

// P0 = p - 1/3 (P_{>=L}(|P_<u|^2 - |P_<B|^2) - |u|^2 + |B|^2), mean-free.
ScalarField initial_pressure(const VectorField& u, const VectorField& B, double lambda,
                             const ScalarField& p);

// 1/2 (M + M^T), for callers that want the symmetrized variant.
TensorField symmetrized(const TensorField& m);

// Leray-projected L2 residuals of both equations of the relaxed system. The
// snapshots must be uniformly spaced in time with an odd count (5 for the
// 4th-order stencil, 3 for 2nd order); the residual is evaluated at the
// middle snapshot.
struct ResidualPair {
  double res_u = 0, res_B = 0;
};
ResidualPair relaxed_residual(const std::vector<RelaxedTuple>& snaps, double nu1, double nu2);

struct DecayRow {
  double t = 0;
  double Ru_L1 = 0, RB_L1 = 0;
  double sup_left = 0;   // sup over [0, t] of max(Ru_L1, RB_L1)
  double sup_right = 0;  // sup over [T - t, T]
};

// L1 norms of the initial stresses on the trajectory's time mesh, plus
// running window sups accumulating at 0 and at T.
std::vector<DecayRow> stress_decay_scan(const Trajectory& traj, const WavenumberSchedule& sched);

struct ImprovedDecayFit {
  double estar_exponent = 0;  // slope of log sup_{[0,t]} ||R0||_L1 vs log E_*
  double t_exponent = 0;      // slope vs log t at fixed E_*
};

// tables[i] = decay rows for runs with E_star = estars[i]; the E_* slope is
// fitted at the last time of `window_times`, the t slope on the full window
// for the first E_*.
ImprovedDecayFit improved_decay_fit(const std::vector<double>& estars,
                                    const std::vector<std::vector<DecayRow>>& tables,
                                    const std::vector<double>& window_times, double T);

}  // namespace lmhd
