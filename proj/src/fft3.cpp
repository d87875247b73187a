#include "lmhd/fft3.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "lmhd/util.hpp"

namespace lmhd {

namespace {

std::mutex plan_mutex;

struct PlanKey {
  int n;
  int kind;  // 0 c2c fwd, 1 c2c inv, 2 r2c, 3 c2r, 4 1d fwd, 5 1d inv
  bool operator<(const PlanKey& o) const { return n != o.n ? n < o.n : kind < o.kind; }
};

std::map<PlanKey, fftw_plan> plans;

fftw_plan get_plan(int n, int kind) {
  std::lock_guard<std::mutex> lock(plan_mutex);
  PlanKey key{n, kind};
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;

  fftw_plan p = nullptr;
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  if (kind == 0 || kind == 1) {
    std::vector<cd> buf(size_t(n) * n * n);
    auto* b = reinterpret_cast<fftw_complex*>(buf.data());
    p = fftw_plan_dft_3d(n, n, n, b, b, kind == 0 ? FFTW_FORWARD : FFTW_BACKWARD, flags);
  } else if (kind == 2) {
    std::vector<double> rin(size_t(n) * n * n);
    std::vector<cd> cout(size_t(n) * n * (n / 2 + 1));
    p = fftw_plan_dft_r2c_3d(n, n, n, rin.data(), reinterpret_cast<fftw_complex*>(cout.data()),
                             flags);
  } else if (kind == 3) {
    std::vector<cd> cin(size_t(n) * n * (n / 2 + 1));
    std::vector<double> rout(size_t(n) * n * n);
    p = fftw_plan_dft_c2r_3d(n, n, n, reinterpret_cast<fftw_complex*>(cin.data()), rout.data(),
                             flags);
  } else {
    std::vector<cd> buf(n);
    auto* b = reinterpret_cast<fftw_complex*>(buf.data());
    p = fftw_plan_dft_1d(n, b, b, kind == 4 ? FFTW_FORWARD : FFTW_BACKWARD, flags);
  }
  if (!p) fail_numeric("fftw plan creation failed");
  plans[key] = p;
  return p;
}

}  // namespace

void Fft3::forward(int n, cd* inout) {
  fftw_plan p = get_plan(n, 0);
  auto* b = reinterpret_cast<fftw_complex*>(inout);
  fftw_execute_dft(p, b, b);
  const double s = 1.0 / (double(n) * n * n);
  const size_t total = size_t(n) * n * n;
  for (size_t i = 0; i < total; ++i) inout[i] *= s;
}

void Fft3::inverse(int n, cd* inout) {
  fftw_plan p = get_plan(n, 1);
  auto* b = reinterpret_cast<fftw_complex*>(inout);
  fftw_execute_dft(p, b, b);
}

void Fft3::forward_real(int n, const double* in, cd* out) {
  fftw_plan p = get_plan(n, 2);
  const size_t nz = size_t(n) / 2 + 1;
  std::vector<cd> half(size_t(n) * n * nz);
  fftw_execute_dft_r2c(p, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(half.data()));
  const double s = 1.0 / (double(n) * n * n);
  // unpack half spectrum (kz in [0, n/2]) into the full cube via Hermitian symmetry
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy) {
      for (int iz = 0; iz < n; ++iz) {
        if (iz < int(nz)) {
          out[(size_t(ix) * n + iy) * n + iz] = s * half[(size_t(ix) * n + iy) * nz + iz];
        } else {
          int cx = ix == 0 ? 0 : n - ix;
          int cy = iy == 0 ? 0 : n - iy;
          int cz = n - iz;
          out[(size_t(ix) * n + iy) * n + iz] =
              std::conj(s * half[(size_t(cx) * n + cy) * nz + cz]);
        }
      }
    }
}

void Fft3::inverse_real(int n, const cd* in, double* out) {
  fftw_plan p = get_plan(n, 3);
  const size_t nz = size_t(n) / 2 + 1;
  std::vector<cd> half(size_t(n) * n * nz);
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < int(nz); ++iz)
        half[(size_t(ix) * n + iy) * nz + iz] = in[(size_t(ix) * n + iy) * n + iz];
  fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(half.data()), out);
}

void Fft3::forward1d(int n, cd* inout) {
  fftw_plan p = get_plan(n, 4);
  auto* b = reinterpret_cast<fftw_complex*>(inout);
  fftw_execute_dft(p, b, b);
  const double s = 1.0 / n;
  for (int i = 0; i < n; ++i) inout[i] *= s;
}

void Fft3::inverse1d(int n, cd* inout) {
  fftw_plan p = get_plan(n, 5);
  auto* b = reinterpret_cast<fftw_complex*>(inout);
  fftw_execute_dft(p, b, b);
}

}  // namespace lmhd
