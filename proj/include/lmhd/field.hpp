#pragma once

#include <array>
#include <complex>
#include <vector>

#include "lmhd/fft3.hpp"
#include "lmhd/util.hpp"

namespace lmhd {

// Integer wavevector on the lattice Z^3; the physical wavevector is 2*pi*xi
// on the unit torus [0,1]^3.
struct WaveVector {
  int x = 0, y = 0, z = 0;
  double norm2() const { return double(x) * x + double(y) * y + double(z) * z; }
  double norm() const;
};

// Regular n^3 spectral grid. Modes are stored on the full complex cube in
// FFT order; signed component of index i is (i <= n/2 ? i : i - n).
// Fields are kept band-limited to max |xi_j| <= n/2 - 1 (Nyquist planes are
// zeroed) so every stored field has an exactly Hermitian-symmetric spectrum.
struct Grid {
  int n = 0;
  Grid() = default;
  explicit Grid(int n_) : n(n_) {
    if (n_ < 4 || n_ % 2 != 0) fail_config("grid size must be even and >= 4");
  }
  size_t size() const { return size_t(n) * n * n; }
  size_t idx(int ix, int iy, int iz) const { return (size_t(ix) * n + iy) * n + iz; }
  int signed_of(int i) const { return i <= n / 2 ? i : i - n; }
  int index_of(int k) const { return k >= 0 ? k : k + n; }
  WaveVector wave(int ix, int iy, int iz) const {
    return {signed_of(ix), signed_of(iy), signed_of(iz)};
  }
  int max_mode() const { return n / 2 - 1; }
  bool operator==(const Grid& o) const { return n == o.n; }
  bool operator!=(const Grid& o) const { return n != o.n; }
};

enum class TensorFlavor { symmetric_traceless, skew_symmetric, general };

// Scalar field in spectral representation.
class ScalarField {
 public:
  Grid grid;
  std::vector<cd> c;

  ScalarField() = default;
  explicit ScalarField(Grid g) : grid(g), c(g.size(), cd(0.0)) {}

  cd& at(int ix, int iy, int iz) { return c[grid.idx(ix, iy, iz)]; }
  const cd& at(int ix, int iy, int iz) const { return c[grid.idx(ix, iy, iz)]; }
  cd& at_mode(int kx, int ky, int kz) {
    return c[grid.idx(grid.index_of(kx), grid.index_of(ky), grid.index_of(kz))];
  }
  const cd& at_mode(int kx, int ky, int kz) const {
    return c[grid.idx(grid.index_of(kx), grid.index_of(ky), grid.index_of(kz))];
  }

  void zero() { std::fill(c.begin(), c.end(), cd(0.0)); }
  void band_limit();          // zero all modes with any |xi_j| >= n/2
  void enforce_hermitian();   // average with conjugate mirror
  double hermitian_defect() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);
};

// Divergence-free / mean-free flags are declarations of intent: operations
// that require them validate against tolerances below.
class VectorField {
 public:
  Grid grid;
  std::array<std::vector<cd>, 3> c;
  bool mean_free = false;
  bool div_free = false;

  VectorField() = default;
  explicit VectorField(Grid g) : grid(g) {
    for (auto& v : c) v.assign(g.size(), cd(0.0));
  }

  cd& at(int comp, size_t i) { return c[comp][i]; }
  const cd& at(int comp, size_t i) const { return c[comp][i]; }
  cd& at_mode(int comp, int kx, int ky, int kz) {
    return c[comp][grid.idx(grid.index_of(kx), grid.index_of(ky), grid.index_of(kz))];
  }

  void zero() {
    for (auto& v : c) std::fill(v.begin(), v.end(), cd(0.0));
  }
  void band_limit();
  void enforce_hermitian();
  double hermitian_defect() const;

  // max_xi |xi . c(xi)| / l2norm-of-coefficients; 0 for the zero field
  double divergence_defect() const;
  double mean_norm() const;

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double s);
};

class TensorField {
 public:
  Grid grid;
  std::array<std::vector<cd>, 9> c;  // row-major 3x3: c[3*i+j]
  TensorFlavor flavor = TensorFlavor::general;

  TensorField() = default;
  explicit TensorField(Grid g, TensorFlavor f = TensorFlavor::general) : grid(g), flavor(f) {
    for (auto& v : c) v.assign(g.size(), cd(0.0));
  }

  std::vector<cd>& comp(int i, int j) { return c[3 * i + j]; }
  const std::vector<cd>& comp(int i, int j) const { return c[3 * i + j]; }

  void zero() {
    for (auto& v : c) std::fill(v.begin(), v.end(), cd(0.0));
  }
  void band_limit();

  double symmetry_defect() const;       // ||M - M^T|| / ||M||
  double skew_defect() const;           // ||M + M^T|| / ||M||
  double trace_defect() const;          // ||tr M|| / ||M||
  double frobenius_l2() const;          // sqrt(sum_xi |M(xi)|_F^2)

  TensorField& operator+=(const TensorField& o);
  TensorField& operator-=(const TensorField& o);
  TensorField& operator*=(double s);
};

constexpr double tol_div = 1e-10;      // relative divergence tolerance
constexpr double tol_flavor = 1e-12;   // symmetry / trace tolerances

}  // namespace lmhd
