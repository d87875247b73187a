#pragma once

#include <array>
#include <vector>

#include "lmhd/util.hpp"

namespace lmhd {

// 1-d profile functions of the intermittent building blocks.
//
// The production set is bump-based: Phi is a C^infinity bump supported on
// [3/8, 5/8], phi := -Phi'' (normalized so int phi^2 = 1), psi := c * bump'
// (mean-free, int psi^2 = 1). Two auxiliary sets exist for tests and for the
// band-limited desk pipeline: "single_mode" (psi = sqrt2 sin, phi = sqrt2 cos,
// Phi = sqrt2 cos / (2 pi)^2, phi_tilde = 1) and "unit" (psi = phi = 1,
// degenerate).
enum class ProfileKind { bump, single_mode, unit };

// Evaluation of one scalar profile and its derivatives at unit scale.
// Outside the support the bump profiles are exactly zero.
class Profile1D {
 public:
  enum class Role { psi, phi, phi_big, one };  // phi_big = Phi (potential)

  Profile1D() = default;
  Profile1D(ProfileKind kind, Role role);

  // value of the j-th derivative at unit scale (j <= 4)
  double deriv(int j, double y) const;
  double operator()(double y) const { return deriv(0, y); }

  // rescaled periodized profile h_r(y) = r^{-1/2} h(frac(y)/r)
  double scaled(int j, double y, double r) const;

  // int over one period of (d^j h)^2 etc., by quadrature at unit scale
  double lp_norm_unit(int j, double p) const;  // ||h^{(j)}||_{L^p(T)} at r = 1
  double mean_unit() const;

  // L^p norm of the rescaled periodized j-th derivative: analytic scaling
  // r^{1/p - 1/2 - j} * ||h^{(j)}||_p at unit scale (exact for supports
  // inside one period; the single-mode/unit sets ignore r)
  double lp_norm_scaled(int j, double p, double r) const;

  bool scale_invariant() const { return kind_ == ProfileKind::single_mode || kind_ == ProfileKind::unit; }
  ProfileKind kind() const { return kind_; }

 private:
  ProfileKind kind_ = ProfileKind::bump;
  Role role_ = Role::psi;
  double norm_c_ = 1.0;  // normalization constant
};

struct ProfileFunctions {
  ProfileKind kind = ProfileKind::bump;
  Profile1D psi;       // along k1 (travelling)
  Profile1D phi;       // along k  (scale r_perp)
  Profile1D phi_big;   // Phi with phi = -Phi''
  Profile1D phi_t;     // along k2 (scale r_tilde_perp); for single_mode: 1

  static ProfileFunctions make(ProfileKind kind);
};

// make_profiles(resolution) -> bump set, renormalized so that the square
// integrals equal 1 to 1e-12 (resolution = quadrature points).
ProfileFunctions make_profiles(int resolution = 200000);

// Antiderivative helper for the inverse time derivative:
// G(y) = int_0^y (psi_r^2(w) - 1) dw, periodic with G(0) = G(1) = 0.
class PsiSquareAntiderivative {
 public:
  PsiSquareAntiderivative(const Profile1D& psi, double r, int resolution = 1 << 16);
  double operator()(double y) const;  // periodic, linear interpolation
  double sup_abs() const { return sup_; }

 private:
  std::vector<double> table_;
  double r_ = 1.0;
  double sup_ = 0;
  bool zero_profile_ = false;
};

}  // namespace lmhd
