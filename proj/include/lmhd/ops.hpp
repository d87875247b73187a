#pragma once

#include <functional>

#include "lmhd/field.hpp"

namespace lmhd {

constexpr double kInfLambda = kInf;

// Smooth radial cutoff: 1 on [0,1), 0 on [2,inf), C^infinity bump-quotient
// ramp in between. Monotone nonincreasing, values in [0,1].
class CutoffProfile {
 public:
  static double eval(double r);        // phi(r)
  static double eval_scaled(double r, double lambda) {
    if (lambda == kInfLambda) return 1.0;
    return eval(r / lambda);
  }
};

// --- transforms -----------------------------------------------------------

// physical samples (n^3 reals per component, z fastest) -> spectral
VectorField forward_transform(const Grid& g, const std::array<std::vector<double>, 3>& phys);
std::array<std::vector<double>, 3> inverse_transform(const VectorField& f);

ScalarField forward_transform_scalar(const Grid& g, const std::vector<double>& phys);
std::vector<double> inverse_transform_scalar(const ScalarField& f);

// --- linear mode-wise operators -------------------------------------------

VectorField leray_project(const VectorField& f);
VectorField remove_mean(const VectorField& f);
ScalarField remove_mean(const ScalarField& f);

// P_{<lambda}: multiply mode xi by phi(|xi|/lambda). lambda = +inf is identity.
VectorField smooth_truncate(const VectorField& f, double lambda);
ScalarField smooth_truncate(const ScalarField& f, double lambda);
TensorField smooth_truncate(const TensorField& f, double lambda);

// P_{>=lambda} = Id - P_{<lambda}
VectorField high_pass(const VectorField& f, double lambda);
TensorField high_pass(const TensorField& f, double lambda);

// e^{nu*dt*Laplacian}: multiply by exp(-nu * 4 pi^2 |xi|^2 dt)
VectorField heat_propagate(const VectorField& f, double nu, double dt);

VectorField gradient(const ScalarField& f);
ScalarField divergence(const VectorField& f);
VectorField divergence(const TensorField& t);  // (div T)_i = d_j T_ij
VectorField curl(const VectorField& f);
VectorField laplacian(const VectorField& f);
ScalarField laplacian(const ScalarField& f);

// (R^u v)^{kl} = d_k inv_lap v^l + d_l inv_lap v^k
//               - 1/2 (delta_kl + d_k d_l inv_lap) div inv_lap v,
// defined for mean-free v; div(R^u v) = v, symmetric and trace-free.
TensorField inverse_divergence_sym(const VectorField& v);

// (R^B f)_{ij} = eps_{ijk} (-Lap)^{-1} (curl f)_k for div-free mean-free f;
// div(R^B f) = f, skew-symmetric.
TensorField inverse_divergence_skew(const VectorField& f);

// --- norms -----------------------------------------------------------------

// Physical-space L^p quadrature over [0,1]^3 on the sample grid (p = inf is
// the max). `pad` up-samples to a finer grid first; p = 2 on band-limited
// data needs no padding (Parseval-exact either way).
double lp_norm(const VectorField& f, double p, int pad = 1);
double lp_norm(const ScalarField& f, double p, int pad = 1);
double lp_norm_tensor(const TensorField& t, double p, int pad = 1);  // pointwise Frobenius
double l2_norm_spectral(const VectorField& f);                       // sqrt(sum |coef|^2)
double sobolev_norm(const VectorField& f, double s);                 // homogeneous H^s
double grad_l2_sq(const VectorField& f);                             // ||grad f||_{L^2}^2

// --- dealiased products -----------------------------------------------------

// All nonlinear products are evaluated on a grid zero-padded to 2x before
// transforming back, so quadratic aliasing vanishes identically.

// outer product a (x) b, with optional trace removal (a tensor-dot b / 3) Id
TensorField outer_product(const VectorField& a, const VectorField& b, bool traceless);

// pointwise dot product a . b
ScalarField dot_product(const VectorField& a, const VectorField& b);

// pointwise scalar * vector
VectorField scalar_times(const ScalarField& s, const VectorField& v);
ScalarField scalar_times(const ScalarField& a, const ScalarField& b);

// pointwise product returned on the doubled grid (no band truncation)
ScalarField product_full(const ScalarField& a, const ScalarField& b);

// pointwise cross product a x b (dealiased)
VectorField cross_field(const VectorField& a, const VectorField& b);

// div(a (x) b) computed spectrally from the dealiased product
VectorField div_outer(const VectorField& a, const VectorField& b);

// Fused MHD nonlinearity: adv_u = div(u (x) u - B (x) B),
// adv_B = div(B (x) u - u (x) B), sharing one padded transform of (u, B).
void mhd_advection(const VectorField& u, const VectorField& B, VectorField& adv_u,
                   VectorField& adv_B);

// resample to a different grid size (spectral zero-pad / crop)
ScalarField resample(const ScalarField& f, const Grid& to);
VectorField resample(const VectorField& f, const Grid& to);
TensorField resample(const TensorField& f, const Grid& to);

}  // namespace lmhd
