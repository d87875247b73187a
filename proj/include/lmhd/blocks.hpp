#pragma once

#include <optional>

#include "lmhd/field.hpp"
#include "lmhd/geometry.hpp"
#include "lmhd/profiles.hpp"

namespace lmhd {

// Concentration / oscillation parameters of one building-block level.
struct BlockParams {
  double lambda = 0;
  double epsilon = 0;
  double r_par = 1, r_perp = 1, r_tperp = 1, mu = 1;
  long sigma = 1;           // rounded integer
  double sigma_exact = 1;   // lambda^{4 eps} before rounding
  int n_lambda = 65;        // frequency anchor sigma * N_Lambda must be integer
  bool paper_admissible = true;  // epsilon < 1e-3
  ProfileKind profiles = ProfileKind::bump;

  long freq() const { return sigma * n_lambda; }  // sigma N_Lambda
};

// r_par = l^{-7/8-16e}, r_perp = l^{-7/8-20e}, r_tperp = l^{-1/4-4e},
// mu = l^{1+22e}, sigma = round(l^{4e}); requires lambda^{1/8} integer.
BlockParams params_from_lambda(double lambda, double epsilon, int n_lambda = 65,
                               ProfileKind profiles = ProfileKind::bump);

// Desk-scale parameters for the 3-d pipeline: band-limited single-mode
// profiles, unit concentration scales, small frequency anchor. Not
// paper-faithful; every artifact produced downstream carries the flag.
BlockParams desk_params(int n_lambda_eff = 5, double mu = 16.0);

enum class BlockKind { W, D, Wc, Wtc, Dc, Dtc };

// Per-direction shift alpha_k, stored as the two slab offsets
// (sigma N k . alpha, sigma N k2 . alpha); alpha = (o1 k + o2 k2) / (sigma N).
struct BlockShift {
  double o1 = 0, o2 = 0;
};

// One directional block: frame + shift + parameters + profiles.
struct Block {
  Frame frame;
  Family family = Family::velocity;
  BlockShift shift;

  // scalar profile factors at a physical point (t fixed):
  // s1 = sigmaN (k1.x + mu t), s2 = sigmaN k.(x - alpha), s3 = sigmaN k2.(x - alpha)
  // value = psi_{r_par}(s1) phi_{r_perp}(s2) phit_{r_tperp}(s3)
};

// Evaluates a block field on an n^3 grid at time t; returns the spectral
// field. D vanishes identically for velocity-family directions.
VectorField eval_block(BlockKind kind, const Block& b, const BlockParams& p,
                       const ProfileFunctions& pf, double t, const Grid& g, int dt_order = 0);

// Greedy choice of slab offsets maximizing the pairwise support margins; uses
// exact integer relation arithmetic over the slab lattice. Returns the
// resulting margin (negative means some pair of supports may intersect).
struct ShiftPlan {
  std::vector<BlockShift> shifts;  // per block, ordering follows `blocks`
  double margin = 0;
};
ShiftPlan choose_shifts(const std::vector<Block>& blocks, const BlockParams& p);

// Exact feasibility check of support overlap for one pair (true = provably
// disjoint). nullopt when the relation structure is not separable (never for
// the shipped sets).
std::optional<bool> supports_disjoint(const Block& a, const Block& bl, const BlockParams& p);

// --- separable verification and measurement (no 3-d grids) -----------------

struct DivIdentityReport {
  double div_w_rel = 0;   // ||div(W + Wtc)|| / (freq/r_perp ||W||)
  double curl_w_rel = 0;  // ||W + Wtc - curl Wc|| / ||W||
  double div_d_rel = 0;
  double curl_d_rel = 0;
};

// Spectral check of the corrector identities on 1-d factor grids in frame
// coordinates (exact for tensor-product blocks at any lambda).
DivIdentityReport verify_div_identities(const Block& b, const BlockParams& p,
                                        const ProfileFunctions& pf);

struct IntermittencyRow {
  int N = 0, M = 0;
  double p = 2;
  double lambda = 0;
  double measured = 0;   // dominant tensor-factor norm (exact for p = 2)
  double predicted = 0;  // sigma^N r_perp^{-N} (sigma mu / r_par)^M (r r r)^{1/p-1/2}
};

// Measured block norms across a lambda grid via 1-d factor quadrature.
std::vector<IntermittencyRow> measure_intermittency(BlockKind kind,
                                                    const std::vector<double>& lambdas,
                                                    double epsilon,
                                                    const std::vector<double>& ps, int n_lambda,
                                                    const ProfileFunctions& pf);

// log-log slope of measured / predicted norms in lambda for one (N, M, p)
struct ExponentFit {
  int N = 0, M = 0;
  double p = 2;
  double measured_slope = 0;
  double predicted_slope = 0;
};
std::vector<ExponentFit> fit_intermittency_exponents(const std::vector<IntermittencyRow>& rows);

// --- inverse time derivative -------------------------------------------------

// partial_t^{-1}(P_{neq 0} psi^2_{(k1)}) evaluated through the closed-form
// antiderivative; value(t, s) with s = sigmaN k1 . x.
class InverseTimeDerivative {
 public:
  InverseTimeDerivative(const Profile1D& psi, const BlockParams& p);
  double value(double t, double s) const;
  double sup_abs() const;            // measured sup over (t, s)
  double bound() const;              // 2 sup|G| / (freq mu)
  double space_time_mean(int nt = 64, int ns = 256) const;

 private:
  PsiSquareAntiderivative G_;
  double freq_mu_ = 1;
  long freq_ = 1;
};

}  // namespace lmhd
