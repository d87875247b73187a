#pragma once

#include <functional>
#include <map>

#include "lmhd/blocks.hpp"
#include "lmhd/geometry.hpp"
#include "lmhd/ops.hpp"

namespace lmhd {

// --- mollification -----------------------------------------------------------

// Fourier multiplier of the compactly supported spatial mollifier of radius
// ell (normalized C^inf bump), evaluated by radial quadrature.
double mollifier_symbol(double k_abs, double ell);

TensorField mollify_space(const TensorField& r, double ell);

// One-sided time mollification over [t - ell, t]: quadrature of the provider
// against the normalized bump kernel on (0, ell).
TensorField mollify_stress(const std::function<TensorField(double)>& provider, double t,
                           double ell, int quad_points = 24);

// --- pointwise amplitude machinery -------------------------------------------

// rho_B = 2 eps_B^{-1} sqrt(ell^2 + |RB_ell|^2): sampled pointwise on the
// amplitude grid and returned as its trigonometric interpolant.
ScalarField rho_B_field(const TensorField& RB_ell, double ell, double eps_B, const Grid& amp_grid);

struct MagneticAmplitudes {
  std::vector<ScalarField> a;    // per direction of Lambda_B, band-limited
  std::vector<ScalarField> a2;   // dealiased squares (exact trig products)
};

// a_(k) = rho_B^{1/2} gamma_(k)(-RB_ell / rho_B), sampled on amp_grid.
MagneticAmplitudes magnetic_amplitudes(const TensorField& RB_ell, double ell, double eps_B,
                                       const DirectionSet& set, const Grid& amp_grid);

// G_B = sum_k a_k^2 (k1 (x) k1 - k2 (x) k2) (the torus-average of the block
// tensor is the constant frame tensor for unit-normalized profiles).
TensorField G_B_field(const MagneticAmplitudes& amps, const DirectionSet& set);

// rho_u = 2 eps_u^{-1} sqrt(ell^2 + |Ru_ell + G_B|^2) on the velocity grid.
ScalarField rho_u_field(const TensorField& Ru_ell, const TensorField& GB, double ell, double eps_u,
                        const Grid& amp_grid);

struct VelocityAmplitudes {
  std::vector<ScalarField> a;
  std::vector<ScalarField> a2;
};

// a_(k) = (rho_u + gamma_e)^{1/2} gamma_(k)(Id - (Ru_ell + G_B)/(rho_u + gamma_e))
VelocityAmplitudes velocity_amplitudes(const TensorField& Ru_ell, const TensorField& GB,
                                       double gamma_e, double ell, double eps_u,
                                       const DirectionSet& set, const Grid& amp_grid);

// --- temporal machinery --------------------------------------------------------

// Step functions and the C^inf cutoff of one iteration level.
struct LevelWindows {
  double T_next = 0, S_next = 0;    // T_{q+1}, S_{q+1} (chi = 1 inside)
  double T_med = 0, S_med = 0;      // supp chi inside [T_med, S_med]
  double ell = 0;
  double delta_q2 = 0, delta_q3 = 0, delta_q4 = 0;  // delta_{q+2}, ...
  double T_q2_ell = 0;              // T_{q+2} + ell_q (start of the f plateaus)
  double S_q2 = 0;                  // S_{q+2}

  double chi(double t) const;       // 1 on [T_next, S_next], 0 outside (T_med, S_med)
  double dchi(double t) const;      // analytic derivative
  double f_e(double t) const;       // 1/4 d_{q+2} inside, 3/4 d_{q+3} on the wings
  double f_h(double t) const;       // 1/256 d_{q+3} inside, 3/256 d_{q+4} on wings
};

// --- heat correctors -----------------------------------------------------------

// Per-direction Duhamel response: J_k(t) = int_0^t e^{nu (t - tau) Lap}
// div Theta_k(tau) dtau, exact per mode (the tau dependence of a same-k block
// product is a rigid translation along k1).
class HeatResponse {
 public:
  // theta0: the block product tensor at tau = 0; k1 of the frame; mu
  HeatResponse(const TensorField& theta0, const Vec3& k1, double mu, double nu);

  VectorField J(double t) const;      // the Duhamel integral
  VectorField dJ_dt(double t) const;  // analytic time derivative
  VectorField source(double t) const; // div Theta(t)

 private:
  VectorField div_theta0_;
  std::vector<double> omega_;  // per-mode phase rate 2 pi mu (xi . k1)
  double nu_;
};

// --- assembly --------------------------------------------------------------------

struct PerturbationConfig {
  DirectionSets sets;
  BlockParams params;            // desk parameters for grid assembly
  ProfileFunctions profiles;
  std::vector<Block> blocks_u;   // velocity-family blocks (frames + shifts)
  std::vector<Block> blocks_B;
  Block block_h;
  Grid amp_grid_B{8}, amp_grid_u{16};  // amplitude sampling grids
  Grid fine{64};                       // parts grid
  double nu1 = 0.1, nu2 = 0.1;
  double eps_u = 0.4, eps_B = 0.5;
  LevelWindows win;
};

PerturbationConfig make_desk_config(double nu1, double nu2, const LevelWindows& win);

struct Parts {
  VectorField w_pb, w_pu, w_h, w_c, w_H;
  VectorField d_p, d_h, d_c, d_H;
  VectorField w_p() const;  // w_pb + w_pu
};

// The full level-(q+1) perturbation machinery over a provided level-q tuple.
class Perturbation {
 public:
  struct LevelData {
    std::function<VectorField(double)> u, B;        // level-q fields (fine grid band)
    std::function<VectorField(double)> du_dt, dB_dt;
    std::function<TensorField(double)> Ru, RB;      // level-q stresses
    std::function<TensorField(double)> dRu_dt, dRB_dt;
    std::function<double(double)> e, h;             // energy / helicity profiles
  };

  Perturbation(const PerturbationConfig& cfg, LevelData lvl);

  const PerturbationConfig& config() const { return cfg_; }

  // mollified stresses (space and one-sided time) and their time derivatives
  TensorField RB_ell(double t) const;
  TensorField Ru_ell(double t) const;
  TensorField dRB_ell_dt(double t) const;
  TensorField dRu_ell_dt(double t) const;

  // gap functionals
  double gamma_h(double t) const;       // h - int u_q . B_q - f_h
  double gamma_h_ell(double t) const;   // time-mollified
  double gamma_e(double t) const;       // the 1/3 (...) functional

  // amplitudes at one time (cached)
  struct AmpSnapshot {
    MagneticAmplitudes mag;
    VelocityAmplitudes vel;
    TensorField GB;
    double gamma_e = 0, gamma_h_ell = 0;
  };
  const AmpSnapshot& amplitudes(double t) const;

  Parts parts(double t) const;

  // w_{q+1} = chi (w_p + w_h + w_c) + chi^2 w_H, and the d counterpart
  std::pair<VectorField, VectorField> perturbation(double t) const;
  std::pair<VectorField, VectorField> updated_fields(double t) const;

  // analytic time derivatives of the perturbations (for exact residuals)
  std::pair<VectorField, VectorField> perturbation_dt(double t) const;

  // heat responses per direction (index: 0..blocks_u-1 velocity family, then
  // magnetic family) for the u equation; magnetic family only for the B one
  const HeatResponse& heat_u(size_t idx) const { return heat_u_[idx]; }
  const HeatResponse& heat_B(size_t idx) const { return heat_B_[idx]; }
  size_t n_heat_u() const { return heat_u_.size(); }
  size_t n_heat_B() const { return heat_B_.size(); }

  // blocks in the u-equation ordering (velocity family then magnetic family)
  const std::vector<Block>& all_blocks() const { return all_blocks_; }
  // amplitude square fields in the same ordering, resampled to the fine grid
  std::vector<ScalarField> a2_fields(double t) const;
  std::vector<ScalarField> da2_dt_fields(double t) const;

  // assembled mean parts: M_B = sum a2 (k2 (x) k1 - k1 (x) k2) and the
  // velocity analogue sum a2 (k1 (x) k1) + sum_B a2 (k1 (x) k1 - k2 (x) k2);
  // these replace -RB_ell and (rho + gamma_e) Id - Ru_ell - G_B in the exact
  // level-(q+1) bookkeeping
  TensorField mean_tensor_B(double t) const;
  TensorField mean_tensor_u(double t) const;  // full, trace included

  // building-block fields on the fine grid
  VectorField block_field(BlockKind kind, size_t idx, double t) const;
  VectorField block_field_dt(BlockKind kind, size_t idx, double t) const;

 private:
  PerturbationConfig cfg_;
  LevelData lvl_;
  std::vector<Block> all_blocks_;
  std::vector<HeatResponse> heat_u_, heat_B_;
  mutable std::map<double, AmpSnapshot> amp_cache_;
  mutable std::map<double, Parts> parts_cache_;
};

// --- verification helpers ---------------------------------------------------------

struct CancellationReport {
  double mag_mean_norm = 0;      // | space mean of sum a2 Theta + RB_ell |
  double mag_residual = 0;       // || sum a2 Theta + RB_ell - sum a2 P_{neq0} Theta ||_2
  double vel_residual = 0;       // velcancel counterpart
  double vel_trace_residual = 0; // trace identity vs 3 (rho_u + gamma_e)
};

// Verifies magcancel / velcancel for given mollified stresses on the
// amplitude grids (no block assembly involved; the block tensor averages are
// the constant frame tensors).
CancellationReport cancellation_check(const TensorField& RB_ell, const TensorField& Ru_ell,
                                      double gamma_e, double ell, double eps_B, double eps_u,
                                      const DirectionSets& sets, const Grid& grid_B,
                                      const Grid& grid_u);

struct HeatIdentityReport {
  double residual_rel = 0;   // Leibniz identity residual, FD time derivative
  double scale = 0;
};

// (d_t - nu Lap) w_H + sum P_H P_{neq0}(a2 div Theta) vs the two error
// families, with d_t w_H approximated by a centered 4th-order stencil of the
// assembled field (resolved-mu step).
HeatIdentityReport heat_identity_check(const Perturbation& pert, double t, double fd_step);

// --- heat trend across the paper lambda grid ---------------------------------------

struct HeatTrendPoint {
  double lambda = 0;
  double norm = 0;  // measured ||w^{(H)}||_{L^2} surrogate at constant amplitude
};

// Constant-amplitude heat-corrector L2 norm via hybrid lattice/integral mode
// sums in rescaled frame coordinates (feasible at any lambda).
std::vector<HeatTrendPoint> heat_corrector_trend(const std::vector<double>& lambdas,
                                                 double epsilon, int n_lambda, double nu,
                                                 double t_eval, const ProfileFunctions& pf);

}  // namespace lmhd
