#include "lmhd/field.hpp"

#include <cmath>

namespace lmhd {

double WaveVector::norm() const { return std::sqrt(norm2()); }

namespace {

template <typename F>
void for_modes(const Grid& g, F&& f) {
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) f(ix, iy, iz, g.idx(ix, iy, iz));
}

void band_limit_one(const Grid& g, std::vector<cd>& c) {
  const int ny = g.n / 2;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    if (ix == ny || iy == ny || iz == ny) c[i] = cd(0.0);
  });
}

void hermitize_one(const Grid& g, std::vector<cd>& c) {
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        int cx = ix == 0 ? 0 : g.n - ix;
        int cy = iy == 0 ? 0 : g.n - iy;
        int cz = iz == 0 ? 0 : g.n - iz;
        size_t a = g.idx(ix, iy, iz), b = g.idx(cx, cy, cz);
        if (a > b) continue;
        cd avg = 0.5 * (c[a] + std::conj(c[b]));
        c[a] = avg;
        c[b] = std::conj(avg);
      }
}

double herm_defect_one(const Grid& g, const std::vector<cd>& c) {
  double worst = 0.0, scale = 0.0;
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        int cx = ix == 0 ? 0 : g.n - ix;
        int cy = iy == 0 ? 0 : g.n - iy;
        int cz = iz == 0 ? 0 : g.n - iz;
        size_t a = g.idx(ix, iy, iz), b = g.idx(cx, cy, cz);
        worst = std::max(worst, std::abs(c[a] - std::conj(c[b])));
        scale = std::max(scale, std::abs(c[a]));
      }
  return scale > 0 ? worst / scale : 0.0;
}

}  // namespace

void ScalarField::band_limit() { band_limit_one(grid, c); }
void ScalarField::enforce_hermitian() { hermitize_one(grid, c); }
double ScalarField::hermitian_defect() const { return herm_defect_one(grid, c); }

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  if (grid != o.grid) fail_numeric("scalar field grid mismatch");
  for (size_t i = 0; i < c.size(); ++i) c[i] += o.c[i];
  return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
  if (grid != o.grid) fail_numeric("scalar field grid mismatch");
  for (size_t i = 0; i < c.size(); ++i) c[i] -= o.c[i];
  return *this;
}
ScalarField& ScalarField::operator*=(double s) {
  for (auto& v : c) v *= s;
  return *this;
}

void VectorField::band_limit() {
  for (auto& v : c) band_limit_one(grid, v);
}
void VectorField::enforce_hermitian() {
  for (auto& v : c) hermitize_one(grid, v);
}
double VectorField::hermitian_defect() const {
  double d = 0;
  for (const auto& v : c) d = std::max(d, herm_defect_one(grid, v));
  return d;
}

double VectorField::divergence_defect() const {
  double l2 = 0.0;
  for (const auto& v : c)
    for (const auto& z : v) l2 += std::norm(z);
  l2 = std::sqrt(l2);
  if (l2 == 0) return 0.0;
  double worst = 0.0;
  for_modes(grid, [&](int ix, int iy, int iz, size_t i) {
    auto w = grid.wave(ix, iy, iz);
    cd d = double(w.x) * c[0][i] + double(w.y) * c[1][i] + double(w.z) * c[2][i];
    worst = std::max(worst, std::abs(d));
  });
  return worst / l2;
}

double VectorField::mean_norm() const {
  double m = 0;
  for (const auto& v : c) m += std::norm(v[0]);
  return std::sqrt(m);
}

VectorField& VectorField::operator+=(const VectorField& o) {
  if (grid != o.grid) fail_numeric("vector field grid mismatch");
  for (int k = 0; k < 3; ++k)
    for (size_t i = 0; i < c[k].size(); ++i) c[k][i] += o.c[k][i];
  div_free = div_free && o.div_free;
  mean_free = mean_free && o.mean_free;
  return *this;
}
VectorField& VectorField::operator-=(const VectorField& o) {
  if (grid != o.grid) fail_numeric("vector field grid mismatch");
  for (int k = 0; k < 3; ++k)
    for (size_t i = 0; i < c[k].size(); ++i) c[k][i] -= o.c[k][i];
  div_free = div_free && o.div_free;
  mean_free = mean_free && o.mean_free;
  return *this;
}
VectorField& VectorField::operator*=(double s) {
  for (auto& v : c)
    for (auto& z : v) z *= s;
  return *this;
}

void TensorField::band_limit() {
  for (auto& v : c) band_limit_one(grid, v);
}

double TensorField::frobenius_l2() const {
  double s = 0;
  for (const auto& v : c)
    for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

double TensorField::symmetry_defect() const {
  double nrm = frobenius_l2();
  if (nrm == 0) return 0;
  double d = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const auto& a = comp(i, j);
      const auto& b = comp(j, i);
      double s = 0;
      for (size_t k = 0; k < a.size(); ++k) s += std::norm(a[k] - b[k]);
      d += 2 * s;
    }
  return std::sqrt(d) / nrm;
}

double TensorField::skew_defect() const {
  double nrm = frobenius_l2();
  if (nrm == 0) return 0;
  double d = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      const auto& a = comp(i, j);
      const auto& b = comp(j, i);
      double s = 0;
      for (size_t k = 0; k < a.size(); ++k) s += std::norm(a[k] + b[k]);
      d += (i == j ? 1 : 2) * s;
    }
  return std::sqrt(d) / nrm;
}

double TensorField::trace_defect() const {
  double nrm = frobenius_l2();
  if (nrm == 0) return 0;
  double d = 0;
  const auto& a = comp(0, 0);
  const auto& b = comp(1, 1);
  const auto& e = comp(2, 2);
  for (size_t k = 0; k < a.size(); ++k) d += std::norm(a[k] + b[k] + e[k]);
  return std::sqrt(d) / nrm;
}

TensorField& TensorField::operator+=(const TensorField& o) {
  if (grid != o.grid) fail_numeric("tensor field grid mismatch");
  for (int k = 0; k < 9; ++k)
    for (size_t i = 0; i < c[k].size(); ++i) c[k][i] += o.c[k][i];
  return *this;
}
TensorField& TensorField::operator-=(const TensorField& o) {
  if (grid != o.grid) fail_numeric("tensor field grid mismatch");
  for (int k = 0; k < 9; ++k)
    for (size_t i = 0; i < c[k].size(); ++i) c[k][i] -= o.c[k][i];
  return *this;
}
TensorField& TensorField::operator*=(double s) {
  for (auto& v : c)
    for (auto& z : v) z *= s;
  return *this;
}

}  // namespace lmhd
