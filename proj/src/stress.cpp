#include "lmhd/stress.hpp"

#include <cmath>

namespace lmhd {

namespace {

// a ring-otimes b with a leading high-pass
TensorField hp_outer(const VectorField& a, const VectorField& b, double lambda) {
  return high_pass(outer_product(a, b, true), lambda);
}

ScalarField high_pass_scalar(const ScalarField& f, double lambda) {
  ScalarField lo = smooth_truncate(f, lambda);
  ScalarField out = f;
  out -= lo;
  return out;
}

}  // namespace

TensorField initial_reynolds_stress(const VectorField& u, const VectorField& B, double lambda) {
  VectorField ul = smooth_truncate(u, lambda);
  VectorField uh = high_pass(u, lambda);
  VectorField Bl = smooth_truncate(B, lambda);
  VectorField Bh = high_pass(B, lambda);

  TensorField r = hp_outer(ul, ul, lambda);
  r += outer_product(ul, uh, true);
  r += outer_product(uh, u, true);
  r -= hp_outer(Bl, Bl, lambda);
  r -= outer_product(Bl, Bh, true);
  r -= outer_product(Bh, B, true);
  r.flavor = TensorFlavor::symmetric_traceless;
  return r;
}

TensorField initial_magnetic_stress(const VectorField& u, const VectorField& B, double lambda) {
  VectorField ul = smooth_truncate(u, lambda);
  VectorField uh = high_pass(u, lambda);
  VectorField Bl = smooth_truncate(B, lambda);
  VectorField Bh = high_pass(B, lambda);

  TensorField r = hp_outer(Bl, ul, lambda);
  r += outer_product(Bl, uh, true);
  r += outer_product(Bh, u, true);
  r -= hp_outer(ul, Bl, lambda);
  r -= outer_product(ul, Bh, true);
  r -= outer_product(uh, B, true);
  r.flavor = TensorFlavor::skew_symmetric;
  return r;
}

ScalarField lambda_mhd_pressure(const VectorField& u, const VectorField& B, double lambda,
                                double, double) {
  // grad p = -(Id - P_H) P_{<L} div(P_<u (x) P_<u - P_<B (x) P_<B);
  // the dissipative and time-derivative terms are divergence-free and drop.
  VectorField ul = smooth_truncate(u, lambda);
  VectorField Bl = smooth_truncate(B, lambda);
  VectorField adv_u(u.grid), adv_B(u.grid);
  mhd_advection(ul, Bl, adv_u, adv_B);
  adv_u = smooth_truncate(adv_u, lambda);
  ScalarField d = divergence(adv_u);
  ScalarField p(u.grid);
  const Grid& g = u.grid;
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        size_t i = g.idx(ix, iy, iz);
        double k2 = g.wave(ix, iy, iz).norm2();
        p.c[i] = k2 > 0 ? d.c[i] / (4.0 * M_PI * M_PI * k2) : cd(0.0);
      }
  return p;
}

ScalarField initial_pressure(const VectorField& u, const VectorField& B, double lambda,
                             const ScalarField& p) {
  VectorField ul = smooth_truncate(u, lambda);
  VectorField Bl = smooth_truncate(B, lambda);
  ScalarField q = dot_product(ul, ul);
  q -= dot_product(Bl, Bl);
  q = high_pass_scalar(q, lambda);
  ScalarField out = p;
  ScalarField uu = dot_product(u, u);
  ScalarField bb = dot_product(B, B);
  for (size_t i = 0; i < out.c.size(); ++i)
    out.c[i] -= (q.c[i] - uu.c[i] + bb.c[i]) / 3.0;
  return remove_mean(out);
}

TensorField symmetrized(const TensorField& m) {
  TensorField out = m;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      for (size_t q = 0; q < out.comp(i, j).size(); ++q) {
        cd avg = 0.5 * (m.comp(i, j)[q] + m.comp(j, i)[q]);
        out.comp(i, j)[q] = avg;
        out.comp(j, i)[q] = avg;
      }
  out.flavor = TensorFlavor::symmetric_traceless;
  return out;
}

ResidualPair relaxed_residual(const std::vector<RelaxedTuple>& snaps, double nu1, double nu2) {
  size_t m = snaps.size();
  if (m != 3 && m != 5) fail_config("relaxed_residual: need 3 or 5 uniformly spaced snapshots");
  double h = snaps[1].t - snaps[0].t;
  for (size_t i = 1; i < m; ++i)
    if (std::abs(snaps[i].t - snaps[i - 1].t - h) > 1e-10 * std::max(1.0, std::abs(h)))
      fail_config("relaxed_residual: snapshots not uniformly spaced");
  const RelaxedTuple& mid = snaps[m / 2];
  const Grid& g = mid.u.grid;

  auto stencil_dt = [&](const VectorField RelaxedTuple::*member) {
    VectorField d(g);
    if (m == 3) {
      d = snaps[2].*member;
      d -= snaps[0].*member;
      d *= 1.0 / (2 * h);
    } else {
      // (f_{-2} - 8 f_{-1} + 8 f_{+1} - f_{+2}) / (12 h)
      d = snaps[0].*member;
      VectorField t = snaps[1].*member;
      t *= 8.0;
      d -= t;
      t = snaps[3].*member;
      t *= 8.0;
      d += t;
      d -= snaps[4].*member;
      d *= 1.0 / (12 * h);
    }
    return d;
  };

  VectorField dtu = stencil_dt(&RelaxedTuple::u);
  VectorField dtB = stencil_dt(&RelaxedTuple::B);

  VectorField adv_u(g), adv_B(g);
  mhd_advection(mid.u, mid.B, adv_u, adv_B);

  VectorField ru = dtu;
  {
    VectorField lap = laplacian(mid.u);
    lap *= nu1;
    ru -= lap;
    ru += adv_u;
    ru -= divergence(mid.Ru);
  }
  VectorField rb = dtB;
  {
    VectorField lap = laplacian(mid.B);
    lap *= nu2;
    rb -= lap;
    rb += adv_B;
    rb -= divergence(mid.RB);
  }
  ResidualPair out;
  out.res_u = l2_norm_spectral(leray_project(ru));
  out.res_B = l2_norm_spectral(leray_project(rb));
  return out;
}

std::vector<DecayRow> stress_decay_scan(const Trajectory& traj, const WavenumberSchedule& sched) {
  std::vector<DecayRow> rows;
  rows.reserve(traj.times.size());
  for (size_t i = 0; i < traj.times.size(); ++i) {
    DecayRow r;
    r.t = traj.times[i];
    double lambda = r.t > 0 ? sched.lambda_of_t(r.t) : kInfLambda;
    TensorField Ru = initial_reynolds_stress(traj.u[i], traj.B[i], lambda);
    TensorField RB = initial_magnetic_stress(traj.u[i], traj.B[i], lambda);
    r.Ru_L1 = lp_norm_tensor(Ru, 1.0, 2);
    r.RB_L1 = lp_norm_tensor(RB, 1.0, 2);
    rows.push_back(r);
  }
  double run = 0;
  for (auto& r : rows) {
    run = std::max(run, std::max(r.Ru_L1, r.RB_L1));
    r.sup_left = run;
  }
  run = 0;
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
    run = std::max(run, std::max(it->Ru_L1, it->RB_L1));
    it->sup_right = run;
  }
  return rows;
}

ImprovedDecayFit improved_decay_fit(const std::vector<double>& estars,
                                    const std::vector<std::vector<DecayRow>>& tables,
                                    const std::vector<double>& window_times, double T) {
  if (estars.size() != tables.size() || estars.size() < 2)
    fail_config("improved_decay_fit: need one decay table per E_*");
  for (double t : window_times)
    if (t <= 0 || t > T / 2) fail_config("improved_decay_fit: window outside the t^{-1/3} branch");

  auto sup_at = [&](const std::vector<DecayRow>& rows, double t) {
    double s = 0;
    bool found = false;
    for (const auto& r : rows)
      if (r.t <= t + 1e-12) {
        s = r.sup_left;
        found = true;
      }
    if (!found) fail_config("improved_decay_fit: window time before first sample");
    return s;
  };

  ImprovedDecayFit fit;
  double t_fix = window_times.back();
  std::vector<double> xs, ys;
  for (size_t i = 0; i < estars.size(); ++i) {
    xs.push_back(estars[i]);
    ys.push_back(sup_at(tables[i], t_fix));
  }
  fit.estar_exponent = loglog_fit(xs, ys).slope;

  xs.clear();
  ys.clear();
  for (double t : window_times) {
    double v = sup_at(tables[0], t);
    if (v > 0) {
      xs.push_back(t);
      ys.push_back(v);
    }
  }
  if (xs.size() < 2) fail_numeric("improved_decay_fit: too few nonzero window samples");
  fit.t_exponent = loglog_fit(xs, ys).slope;
  return fit;
}

}  // namespace lmhd
