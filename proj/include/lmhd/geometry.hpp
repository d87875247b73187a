#pragma once

#include <array>
#include <string>
#include <vector>

#include "lmhd/util.hpp"

namespace lmhd {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

inline double frobenius(const Mat3& m) {
  double s = 0;
  for (double v : m) s += v * v;
  return std::sqrt(s);
}

enum class Family { velocity, magnetic, helicity };

// One orthonormal frame (k, k1, k2) with rational entries num/den; the
// integrality invariant is N_Lambda * k_j in Z^3 for every frame vector.
struct Frame {
  std::array<long, 3> k_num{}, k1_num{}, k2_num{};
  long den = 1;

  Vec3 k() const { return {double(k_num[0]) / den, double(k_num[1]) / den, double(k_num[2]) / den}; }
  Vec3 k1() const {
    return {double(k1_num[0]) / den, double(k1_num[1]) / den, double(k1_num[2]) / den};
  }
  Vec3 k2() const {
    return {double(k2_num[0]) / den, double(k2_num[1]) / den, double(k2_num[2]) / den};
  }
};

struct DirectionSet {
  Family family = Family::velocity;
  std::vector<Frame> frames;
  int n_lambda = 65;

  void validate() const;  // throws Errc::invariant with a diagnostic
};

struct DirectionSets {
  DirectionSet velocity, magnetic, helicity;
  int n_lambda = 65;
};

// Built-in candidate sets (denominator-5 Pythagorean frames); validated
// against every DirectionSet invariant on load. N_Lambda = 65 default.
DirectionSets load_direction_sets();

// Plain-text storage: one frame per line, "kx ky kz k1x k1y k1z k2x k2y k2z den".
DirectionSet parse_direction_set(Family family, const std::string& text, int n_lambda);
std::string format_direction_set(const DirectionSet& s);

struct GammaDecomposition {
  Family family = Family::velocity;
  std::vector<double> weights;  // gamma_(k)^2 per frame, in set order
  double radius = 0;            // validated radius the solve ran under
  double residual = 0;          // Frobenius reconstruction residual
};

// S = sum_k gamma_k^2 k1 (x) k1 for symmetric S near Id; weights strictly
// positive inside the calibrated radius, affine in S (hence smooth).
GammaDecomposition decompose_symmetric(const Mat3& S, const DirectionSet& set);

// A = sum_k gamma_k^2 (k2 (x) k1 - k1 (x) k2) for skew A near 0.
GammaDecomposition decompose_skew(const Mat3& A, const DirectionSet& set);

// Same solves but returning raw weights without the positivity check
// (used by amplitude evaluation after the rho normalization has already
// guaranteed the argument is inside the radius).
std::vector<double> symmetric_weights(const Mat3& S, const DirectionSet& set);
std::vector<double> skew_weights(const Mat3& A, const DirectionSet& set);

struct GeometryCalibration {
  double eps_u = 0;    // largest sampled radius with positive weights (sym)
  double eps_B = 0;    // same for the skew family
  double M_star = 0;   // sampled sup of sum_k ||gamma_k||_{C^4}
};

// Samples dense direction spheres and bisects the largest radii on which the
// decompositions stay strictly positive; M_star from 4th-order finite
// differences of the weight maps. Values are artifact-local constants.
GeometryCalibration calibrate_radii_and_Mstar(const DirectionSets& sets, int samples = 512,
                                              uint64_t seed = 12345);

// Reconstruction helpers (test oracles use these too)
Mat3 reconstruct_symmetric(const std::vector<double>& w, const DirectionSet& set);
Mat3 reconstruct_skew(const std::vector<double>& w, const DirectionSet& set);

}  // namespace lmhd
