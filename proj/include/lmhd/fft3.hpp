#pragma once

#include <complex>
#include <vector>

namespace lmhd {

using cd = std::complex<double>;

// Thin wrapper around FFTW for 3-d (and 1-d) periodic transforms.
//
// Conventions on the unit torus [0,1]^3 with n samples per axis, x_j = j/n:
//   forward:  u_hat(xi) = (1/n^3) sum_j u(x_j) exp(-2*pi*i xi.x_j)
//   inverse:  u(x_j)    =         sum_xi u_hat(xi) exp(+2*pi*i xi.x_j)
// so coefficients are plain Fourier-series coefficients and Parseval reads
// integral |u|^2 dx = sum |u_hat|^2.
//
// The plan cache is internally synchronized; executing transforms on
// distinct buffers is safe from multiple threads.
class Fft3 {
 public:
  // complex <-> complex on the full cube (size n^3, row-major, z fastest)
  static void forward(int n, cd* inout);
  static void inverse(int n, cd* inout);

  // real grid (n^3 doubles) -> full complex cube of coefficients, and back.
  // The complex cube is the same layout as forward/inverse above.
  static void forward_real(int n, const double* in, cd* out);
  static void inverse_real(int n, const cd* in, double* out);

  // 1-d helpers (periodic, unit interval, same normalization)
  static void forward1d(int n, cd* inout);
  static void inverse1d(int n, cd* inout);
};

}  // namespace lmhd
