#include "lmhd/ops.hpp"

#include <cmath>

namespace lmhd {

namespace {

constexpr double two_pi = 2.0 * M_PI;

template <typename F>
void for_modes(const Grid& g, F&& f) {
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) f(ix, iy, iz, g.idx(ix, iy, iz));
}

// C^infinity transition t(s): 0 for s<=0, 1 for s>=1
double smoothstep_cinf(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double a = std::exp(-1.0 / s);
  double b = std::exp(-1.0 / (1.0 - s));
  return a / (a + b);
}

void apply_multiplier(const Grid& g, std::vector<cd>& c,
                      const std::function<double(const WaveVector&)>& m) {
  for_modes(g, [&](int ix, int iy, int iz, size_t i) { c[i] *= m(g.wave(ix, iy, iz)); });
}

}  // namespace

double CutoffProfile::eval(double r) {
  r = std::abs(r);
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  return smoothstep_cinf(2.0 - r);
}

// --- transforms -------------------------------------------------------------

VectorField forward_transform(const Grid& g, const std::array<std::vector<double>, 3>& phys) {
  for (const auto& p : phys)
    if (p.size() != g.size()) fail_numeric("forward_transform: dimension mismatch");
  VectorField out(g);
  for (int k = 0; k < 3; ++k) Fft3::forward_real(g.n, phys[k].data(), out.c[k].data());
  out.band_limit();
  return out;
}

std::array<std::vector<double>, 3> inverse_transform(const VectorField& f) {
  std::array<std::vector<double>, 3> out;
  for (int k = 0; k < 3; ++k) {
    out[k].assign(f.grid.size(), 0.0);
    Fft3::inverse_real(f.grid.n, f.c[k].data(), out[k].data());
  }
  return out;
}

ScalarField forward_transform_scalar(const Grid& g, const std::vector<double>& phys) {
  if (phys.size() != g.size()) fail_numeric("forward_transform: dimension mismatch");
  ScalarField out(g);
  Fft3::forward_real(g.n, phys.data(), out.c.data());
  out.band_limit();
  return out;
}

std::vector<double> inverse_transform_scalar(const ScalarField& f) {
  std::vector<double> out(f.grid.size(), 0.0);
  Fft3::inverse_real(f.grid.n, f.c.data(), out.data());
  return out;
}

// --- linear operators --------------------------------------------------------

VectorField leray_project(const VectorField& f) {
  VectorField out = f;
  const Grid& g = f.grid;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    auto w = g.wave(ix, iy, iz);
    double k2 = w.norm2();
    if (k2 == 0.0) {
      out.c[0][i] = out.c[1][i] = out.c[2][i] = cd(0.0);
      return;
    }
    cd kf = (double(w.x) * f.c[0][i] + double(w.y) * f.c[1][i] + double(w.z) * f.c[2][i]) / k2;
    out.c[0][i] = f.c[0][i] - double(w.x) * kf;
    out.c[1][i] = f.c[1][i] - double(w.y) * kf;
    out.c[2][i] = f.c[2][i] - double(w.z) * kf;
  });
  out.div_free = true;
  out.mean_free = true;
  return out;
}

VectorField remove_mean(const VectorField& f) {
  VectorField out = f;
  for (int k = 0; k < 3; ++k) out.c[k][0] = cd(0.0);
  out.mean_free = true;
  return out;
}

ScalarField remove_mean(const ScalarField& f) {
  ScalarField out = f;
  out.c[0] = cd(0.0);
  return out;
}

namespace {
template <typename FieldT>
FieldT truncate_impl(const FieldT& f, double lambda, bool high) {
  if (lambda <= 0.0) fail_numeric("smooth_truncate: lambda must be positive");
  FieldT out = f;
  if (lambda == kInfLambda) {
    if (high) out *= 0.0;
    return out;  // bit-for-bit identity in the low-pass case
  }
  const Grid& g = f.grid;
  std::vector<double> mult(g.size());
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    double r = g.wave(ix, iy, iz).norm();
    double m = CutoffProfile::eval(r / lambda);
    mult[i] = high ? 1.0 - m : m;
  });
  if constexpr (std::is_same_v<FieldT, ScalarField>) {
    for (size_t i = 0; i < out.c.size(); ++i) out.c[i] *= mult[i];
  } else {
    for (auto& comp : out.c)
      for (size_t i = 0; i < comp.size(); ++i) comp[i] *= mult[i];
  }
  return out;
}
}  // namespace

VectorField smooth_truncate(const VectorField& f, double lambda) {
  return truncate_impl(f, lambda, false);
}
ScalarField smooth_truncate(const ScalarField& f, double lambda) {
  return truncate_impl(f, lambda, false);
}
TensorField smooth_truncate(const TensorField& f, double lambda) {
  return truncate_impl(f, lambda, false);
}
VectorField high_pass(const VectorField& f, double lambda) { return truncate_impl(f, lambda, true); }
TensorField high_pass(const TensorField& f, double lambda) { return truncate_impl(f, lambda, true); }

VectorField heat_propagate(const VectorField& f, double nu, double dt) {
  if (dt < 0) fail_numeric("heat_propagate: negative dt");
  if (nu <= 0) fail_numeric("heat_propagate: viscosity must be positive");
  VectorField out = f;
  const Grid& g = f.grid;
  for (int k = 0; k < 3; ++k)
    apply_multiplier(g, out.c[k], [&](const WaveVector& w) {
      return std::exp(-nu * 4.0 * M_PI * M_PI * w.norm2() * dt);
    });
  return out;
}

VectorField gradient(const ScalarField& f) {
  VectorField out(f.grid);
  const Grid& g = f.grid;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    auto w = g.wave(ix, iy, iz);
    cd v = f.c[i] * cd(0.0, two_pi);
    out.c[0][i] = v * double(w.x);
    out.c[1][i] = v * double(w.y);
    out.c[2][i] = v * double(w.z);
  });
  out.mean_free = true;
  return out;
}

ScalarField divergence(const VectorField& f) {
  ScalarField out(f.grid);
  const Grid& g = f.grid;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    auto w = g.wave(ix, iy, iz);
    out.c[i] = cd(0.0, two_pi) *
               (double(w.x) * f.c[0][i] + double(w.y) * f.c[1][i] + double(w.z) * f.c[2][i]);
  });
  return out;
}

VectorField divergence(const TensorField& t) {
  VectorField out(t.grid);
  const Grid& g = t.grid;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    auto w = g.wave(ix, iy, iz);
    double k[3] = {double(w.x), double(w.y), double(w.z)};
    for (int r = 0; r < 3; ++r) {
      cd s(0.0);
      for (int j = 0; j < 3; ++j) s += k[j] * t.comp(r, j)[i];
      out.c[r][i] = cd(0.0, two_pi) * s;
    }
  });
  out.mean_free = true;
  return out;
}

VectorField curl(const VectorField& f) {
  VectorField out(f.grid);
  const Grid& g = f.grid;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    auto w = g.wave(ix, iy, iz);
    cd I(0.0, two_pi);
    out.c[0][i] = I * (double(w.y) * f.c[2][i] - double(w.z) * f.c[1][i]);
    out.c[1][i] = I * (double(w.z) * f.c[0][i] - double(w.x) * f.c[2][i]);
    out.c[2][i] = I * (double(w.x) * f.c[1][i] - double(w.y) * f.c[0][i]);
  });
  out.div_free = true;
  out.mean_free = true;
  return out;
}

VectorField laplacian(const VectorField& f) {
  VectorField out = f;
  for (int k = 0; k < 3; ++k)
    apply_multiplier(f.grid, out.c[k], [](const WaveVector& w) {
      return -4.0 * M_PI * M_PI * w.norm2();
    });
  return out;
}

ScalarField laplacian(const ScalarField& f) {
  ScalarField out = f;
  apply_multiplier(f.grid, out.c,
                   [](const WaveVector& w) { return -4.0 * M_PI * M_PI * w.norm2(); });
  return out;
}

TensorField inverse_divergence_sym(const VectorField& v) {
  if (v.mean_norm() > tol_div * (1.0 + l2_norm_spectral(v)))
    fail_invariant("inverse_divergence_sym: input has nonzero mean mode");
  const Grid& g = v.grid;
  TensorField out(g, TensorFlavor::symmetric_traceless);
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    auto w = g.wave(ix, iy, iz);
    double k2 = w.norm2();
    if (k2 == 0.0) return;
    double k[3] = {double(w.x), double(w.y), double(w.z)};
    cd I(0.0, two_pi);
    cd inv_lap = cd(-1.0 / (4.0 * M_PI * M_PI * k2));
    cd vh[3] = {v.c[0][i], v.c[1][i], v.c[2][i]};
    cd div_inv = I * (k[0] * vh[0] + k[1] * vh[1] + k[2] * vh[2]) * inv_lap;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        cd t = I * k[a] * inv_lap * vh[b] + I * k[b] * inv_lap * vh[a];
        cd corr = ((a == b ? cd(1.0) : cd(0.0)) + I * k[a] * I * k[b] * inv_lap) * div_inv;
        out.comp(a, b)[i] = t - 0.5 * corr;
      }
  });
  return out;
}

TensorField inverse_divergence_skew(const VectorField& f) {
  if (f.divergence_defect() > tol_div)
    fail_invariant("inverse_divergence_skew: input not divergence-free");
  if (f.mean_norm() > tol_div * (1.0 + l2_norm_spectral(f)))
    fail_invariant("inverse_divergence_skew: input has nonzero mean mode");
  const Grid& g = f.grid;
  TensorField out(g, TensorFlavor::skew_symmetric);
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    auto w = g.wave(ix, iy, iz);
    double k2 = w.norm2();
    if (k2 == 0.0) return;
    double k[3] = {double(w.x), double(w.y), double(w.z)};
    cd I(0.0, two_pi);
    cd fh[3] = {f.c[0][i], f.c[1][i], f.c[2][i]};
    // curl f, then (-Lap)^{-1}
    cd cf[3] = {I * (k[1] * fh[2] - k[2] * fh[1]), I * (k[2] * fh[0] - k[0] * fh[2]),
                I * (k[0] * fh[1] - k[1] * fh[0])};
    double inv = 1.0 / (4.0 * M_PI * M_PI * k2);
    for (int a = 0; a < 3; ++a) cf[a] *= inv;
    // eps_{ijk} cf_k
    out.comp(0, 1)[i] = cf[2];
    out.comp(1, 0)[i] = -cf[2];
    out.comp(1, 2)[i] = cf[0];
    out.comp(2, 1)[i] = -cf[0];
    out.comp(2, 0)[i] = cf[1];
    out.comp(0, 2)[i] = -cf[1];
  });
  return out;
}

// --- norms -------------------------------------------------------------------

namespace {

ScalarField pad_scalar(const ScalarField& f, const Grid& to) {
  ScalarField out(to);
  const Grid& g = f.grid;
  int kmax = std::min(g.max_mode(), to.max_mode());
  for (int kx = -kmax; kx <= kmax; ++kx)
    for (int ky = -kmax; ky <= kmax; ++ky)
      for (int kz = -kmax; kz <= kmax; ++kz)
        out.at_mode(kx, ky, kz) = const_cast<ScalarField&>(f).at_mode(kx, ky, kz);
  return out;
}

double quadrature_lp(const std::vector<double>& vals, double p, size_t npts) {
  if (p == kInfLambda) {
    double m = 0;
    for (double v : vals) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0;
  for (double v : vals) s += std::pow(std::abs(v), p);
  return std::pow(s / double(npts), 1.0 / p);
}

}  // namespace

ScalarField resample(const ScalarField& f, const Grid& to) { return pad_scalar(f, to); }

VectorField resample(const VectorField& f, const Grid& to) {
  VectorField out(to);
  out.mean_free = f.mean_free;
  out.div_free = f.div_free;
  for (int k = 0; k < 3; ++k) {
    ScalarField s(f.grid);
    s.c = f.c[k];
    out.c[k] = pad_scalar(s, to).c;
  }
  return out;
}

TensorField resample(const TensorField& f, const Grid& to) {
  TensorField out(to, f.flavor);
  for (int k = 0; k < 9; ++k) {
    ScalarField s(f.grid);
    s.c = f.c[k];
    out.c[k] = pad_scalar(s, to).c;
  }
  return out;
}

double lp_norm(const ScalarField& f, double p, int pad) {
  if (p < 1.0) fail_numeric("lp_norm: p must be >= 1");
  Grid g = f.grid;
  const ScalarField* src = &f;
  ScalarField padded;
  if (pad > 1) {
    padded = resample(f, Grid(f.grid.n * pad));
    src = &padded;
    g = padded.grid;
  }
  auto phys = inverse_transform_scalar(*src);
  return quadrature_lp(phys, p, g.size());
}

double lp_norm(const VectorField& f, double p, int pad) {
  if (p < 1.0) fail_numeric("lp_norm: p must be >= 1");
  Grid g = f.grid;
  const VectorField* src = &f;
  VectorField padded;
  if (pad > 1) {
    padded = resample(f, Grid(f.grid.n * pad));
    src = &padded;
    g = padded.grid;
  }
  auto phys = inverse_transform(*src);
  std::vector<double> mag(g.size());
  for (size_t i = 0; i < g.size(); ++i)
    mag[i] = std::sqrt(phys[0][i] * phys[0][i] + phys[1][i] * phys[1][i] + phys[2][i] * phys[2][i]);
  return quadrature_lp(mag, p, g.size());
}

double lp_norm_tensor(const TensorField& t, double p, int pad) {
  if (p < 1.0) fail_numeric("lp_norm: p must be >= 1");
  Grid g = t.grid;
  const TensorField* src = &t;
  TensorField padded;
  if (pad > 1) {
    padded = resample(t, Grid(t.grid.n * pad));
    src = &padded;
    g = padded.grid;
  }
  std::vector<double> mag(g.size(), 0.0);
  std::vector<double> phys(g.size());
  for (int k = 0; k < 9; ++k) {
    Fft3::inverse_real(g.n, src->c[k].data(), phys.data());
    for (size_t i = 0; i < g.size(); ++i) mag[i] += phys[i] * phys[i];
  }
  for (auto& m : mag) m = std::sqrt(m);
  return quadrature_lp(mag, p, g.size());
}

double l2_norm_spectral(const VectorField& f) {
  double s = 0;
  for (const auto& v : f.c)
    for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

double sobolev_norm(const VectorField& f, double s) {
  double acc = 0;
  const Grid& g = f.grid;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    double k2 = g.wave(ix, iy, iz).norm2();
    if (k2 == 0) return;
    double w = std::pow(k2, s);
    acc += w * (std::norm(f.c[0][i]) + std::norm(f.c[1][i]) + std::norm(f.c[2][i]));
  });
  return std::sqrt(acc);
}

double grad_l2_sq(const VectorField& f) {
  double acc = 0;
  const Grid& g = f.grid;
  for_modes(g, [&](int ix, int iy, int iz, size_t i) {
    double k2 = g.wave(ix, iy, iz).norm2();
    acc += 4.0 * M_PI * M_PI * k2 *
           (std::norm(f.c[0][i]) + std::norm(f.c[1][i]) + std::norm(f.c[2][i]));
  });
  return acc;
}

// --- dealiased products --------------------------------------------------------

namespace {

// Pads each input to 2n, multiplies in physical space, transforms back, crops.
ScalarField product_scalar(const ScalarField& a, const ScalarField& b) {
  if (a.grid != b.grid) fail_numeric("product: grid mismatch");
  Grid fine(a.grid.n * 2);
  auto pa = inverse_transform_scalar(resample(a, fine));
  auto pb = inverse_transform_scalar(resample(b, fine));
  for (size_t i = 0; i < pa.size(); ++i) pa[i] *= pb[i];
  ScalarField prod = forward_transform_scalar(fine, pa);
  return resample(prod, a.grid);
}

}  // namespace

ScalarField scalar_times(const ScalarField& a, const ScalarField& b) { return product_scalar(a, b); }

TensorField outer_product(const VectorField& a, const VectorField& b, bool traceless) {
  if (a.grid != b.grid) fail_numeric("outer_product: grid mismatch");
  Grid fine(a.grid.n * 2);
  std::array<std::vector<double>, 3> pa, pb;
  for (int k = 0; k < 3; ++k) {
    ScalarField s(a.grid);
    s.c = a.c[k];
    pa[k] = inverse_transform_scalar(resample(s, fine));
    s.c = b.c[k];
    pb[k] = inverse_transform_scalar(resample(s, fine));
  }
  TensorField out(a.grid, TensorFlavor::general);
  std::vector<double> work(fine.size());
  std::vector<double> tr;
  if (traceless) {
    tr.assign(fine.size(), 0.0);
    for (int k = 0; k < 3; ++k)
      for (size_t i = 0; i < work.size(); ++i) tr[i] += pa[k][i] * pb[k][i];
    for (auto& v : tr) v /= 3.0;
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      for (size_t q = 0; q < work.size(); ++q) {
        work[q] = pa[i][q] * pb[j][q];
        if (traceless && i == j) work[q] -= tr[q];
      }
      ScalarField s = forward_transform_scalar(fine, work);
      out.comp(i, j) = resample(s, a.grid).c;
    }
  return out;
}

ScalarField dot_product(const VectorField& a, const VectorField& b) {
  if (a.grid != b.grid) fail_numeric("dot_product: grid mismatch");
  Grid fine(a.grid.n * 2);
  std::vector<double> acc(fine.size(), 0.0);
  for (int k = 0; k < 3; ++k) {
    ScalarField s(a.grid);
    s.c = a.c[k];
    auto pa = inverse_transform_scalar(resample(s, fine));
    s.c = b.c[k];
    auto pb = inverse_transform_scalar(resample(s, fine));
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += pa[i] * pb[i];
  }
  ScalarField out = forward_transform_scalar(fine, acc);
  return resample(out, a.grid);
}

VectorField scalar_times(const ScalarField& s, const VectorField& v) {
  if (s.grid != v.grid) fail_numeric("scalar_times: grid mismatch");
  Grid fine(s.grid.n * 2);
  auto ps = inverse_transform_scalar(resample(s, fine));
  VectorField out(v.grid);
  for (int k = 0; k < 3; ++k) {
    ScalarField comp(v.grid);
    comp.c = v.c[k];
    auto pv = inverse_transform_scalar(resample(comp, fine));
    for (size_t i = 0; i < pv.size(); ++i) pv[i] *= ps[i];
    out.c[k] = resample(forward_transform_scalar(fine, pv), v.grid).c;
  }
  return out;
}

VectorField div_outer(const VectorField& a, const VectorField& b) {
  return divergence(outer_product(a, b, false));
}

ScalarField product_full(const ScalarField& a, const ScalarField& b) {
  if (a.grid != b.grid) fail_numeric("product_full: grid mismatch");
  Grid fine(a.grid.n * 2);
  auto pa = inverse_transform_scalar(resample(a, fine));
  auto pb = inverse_transform_scalar(resample(b, fine));
  for (size_t i = 0; i < pa.size(); ++i) pa[i] *= pb[i];
  return forward_transform_scalar(fine, pa);
}

VectorField cross_field(const VectorField& a, const VectorField& b) {
  if (a.grid != b.grid) fail_numeric("cross_field: grid mismatch");
  Grid fine(a.grid.n * 2);
  std::array<std::vector<double>, 3> pa, pb;
  for (int k = 0; k < 3; ++k) {
    ScalarField s(a.grid);
    s.c = a.c[k];
    pa[k] = inverse_transform_scalar(resample(s, fine));
    s.c = b.c[k];
    pb[k] = inverse_transform_scalar(resample(s, fine));
  }
  VectorField out(a.grid);
  std::vector<double> w(fine.size());
  for (int c = 0; c < 3; ++c) {
    int i = (c + 1) % 3, j = (c + 2) % 3;
    for (size_t q = 0; q < w.size(); ++q) w[q] = pa[i][q] * pb[j][q] - pa[j][q] * pb[i][q];
    out.c[c] = resample(forward_transform_scalar(fine, w), a.grid).c;
  }
  return out;
}

void mhd_advection(const VectorField& u, const VectorField& B, VectorField& adv_u,
                   VectorField& adv_B) {
  if (u.grid != B.grid) fail_numeric("mhd_advection: grid mismatch");
  const Grid& g = u.grid;
  Grid fine(g.n * 2);
  std::array<std::vector<double>, 3> pu, pb;
  for (int k = 0; k < 3; ++k) {
    ScalarField s(g);
    s.c = u.c[k];
    pu[k] = inverse_transform_scalar(resample(s, fine));
    s.c = B.c[k];
    pb[k] = inverse_transform_scalar(resample(s, fine));
  }
  // symmetric tensor u (x) u - B (x) B (6 entries) and the three independent
  // entries of the skew tensor B (x) u - u (x) B
  TensorField sym(g), skw(g);
  std::vector<double> work(fine.size());
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      for (size_t q = 0; q < work.size(); ++q)
        work[q] = pu[i][q] * pu[j][q] - pb[i][q] * pb[j][q];
      ScalarField s = forward_transform_scalar(fine, work);
      sym.comp(i, j) = resample(s, g).c;
      if (i != j) sym.comp(j, i) = sym.comp(i, j);
    }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      for (size_t q = 0; q < work.size(); ++q)
        work[q] = pb[i][q] * pu[j][q] - pu[i][q] * pb[j][q];
      ScalarField s = forward_transform_scalar(fine, work);
      skw.comp(i, j) = resample(s, g).c;
    }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      for (size_t q = 0; q < g.size(); ++q) skw.comp(j, i)[q] = -skw.comp(i, j)[q];

  adv_u = divergence(sym);
  adv_B = divergence(skw);
}

}  // namespace lmhd
