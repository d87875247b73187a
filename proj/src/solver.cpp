#include "lmhd/solver.hpp"
#include <map>
#include <mutex>

#include <cmath>

namespace lmhd {

namespace {

// Symbol of the heat factor exp(nu * dt * Lap) as a per-mode array; cached
// since solve() reuses the same (n, nu, dt) every step.
const std::vector<double>& heat_factors(const Grid& g, double nu, double dt) {
  struct Key {
    int n;
    double nu, dt;
    bool operator<(const Key& o) const {
      if (n != o.n) return n < o.n;
      if (nu != o.nu) return nu < o.nu;
      return dt < o.dt;
    }
  };
  static std::map<Key, std::vector<double>> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  Key key{g.n, nu, dt};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<double> e(g.size());
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        double k2 = g.wave(ix, iy, iz).norm2();
        e[g.idx(ix, iy, iz)] = std::exp(-nu * 4.0 * M_PI * M_PI * k2 * dt);
      }
  return cache.emplace(key, std::move(e)).first->second;
}

void scale_modes(VectorField& f, const std::vector<double>& e) {
  for (int k = 0; k < 3; ++k)
    for (size_t i = 0; i < f.c[k].size(); ++i) f.c[k][i] *= e[i];
}

void check_finite(const VectorField& f, double t) {
  for (const auto& comp : f.c)
    for (const auto& z : comp)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        fail_numeric("solver: NaN/Inf detected at t = " + std::to_string(t));
}

// Nonlinear part only (no dissipation): minus the truncated advection terms,
// Leray-projected. Both outputs are div-free and mean-free.
void nonlinear_rhs(const VectorField& u, const VectorField& B, double lambda, VectorField& nu_out,
                   VectorField& nB_out) {
  VectorField ul = smooth_truncate(u, lambda);
  VectorField Bl = smooth_truncate(B, lambda);
  VectorField adv_u(u.grid), adv_B(u.grid);
  mhd_advection(ul, Bl, adv_u, adv_B);
  // velocity: -P_H P_{<L} div(ul (x) ul - Bl (x) Bl)
  adv_u = smooth_truncate(adv_u, lambda);
  adv_u = leray_project(adv_u);
  adv_u *= -1.0;
  nu_out = std::move(adv_u);
  // magnetic: -P_H P_{<L} div(Bl (x) ul - ul (x) Bl)
  adv_B = smooth_truncate(adv_B, lambda);
  adv_B = leray_project(adv_B);
  adv_B *= -1.0;
  nB_out = std::move(adv_B);
}

}  // namespace

void rhs(const SolverState& s, const SolverConfig& cfg, const WavenumberSchedule& sched,
         VectorField& du, VectorField& dB) {
  double lambda = sched.lambda_of_t(s.t);
  nonlinear_rhs(s.u, s.B, lambda, du, dB);
  VectorField lap_u = laplacian(s.u);
  lap_u *= cfg.nu1;
  du += lap_u;
  VectorField lap_B = laplacian(s.B);
  lap_B *= cfg.nu2;
  dB += lap_B;
  du.div_free = dB.div_free = true;
  du.mean_free = dB.mean_free = true;
}

SolverState step(const SolverState& s, double dt, const SolverConfig& cfg,
                 const WavenumberSchedule& sched) {
  if (dt <= 0) fail_config("step: dt must be positive");
  const Grid& g = s.u.grid;
  double lambda = sched.lambda_of_t(s.t + 0.5 * dt);

  if (cfg.integrator == Integrator::if_rk4) {
    const auto& e1u = heat_factors(g, cfg.nu1, dt);
    const auto& ehu = heat_factors(g, cfg.nu1, dt / 2);
    const auto& e1b = heat_factors(g, cfg.nu2, dt);
    const auto& ehb = heat_factors(g, cfg.nu2, dt / 2);

    VectorField k1u(g), k1b(g), k2u(g), k2b(g), k3u(g), k3b(g), k4u(g), k4b(g);
    nonlinear_rhs(s.u, s.B, lambda, k1u, k1b);

    VectorField au = s.u, ab = s.B;
    {
      VectorField tu = k1u, tb = k1b;
      tu *= dt / 2;
      tb *= dt / 2;
      au += tu;
      ab += tb;
      scale_modes(au, ehu);
      scale_modes(ab, ehb);
    }
    nonlinear_rhs(au, ab, lambda, k2u, k2b);

    VectorField bu = s.u, bb = s.B;
    scale_modes(bu, ehu);
    scale_modes(bb, ehb);
    {
      VectorField tu = k2u, tb = k2b;
      tu *= dt / 2;
      tb *= dt / 2;
      bu += tu;
      bb += tb;
    }
    nonlinear_rhs(bu, bb, lambda, k3u, k3b);

    VectorField cu = s.u, cb = s.B;
    scale_modes(cu, e1u);
    scale_modes(cb, e1b);
    {
      VectorField tu = k3u, tb = k3b;
      scale_modes(tu, ehu);
      scale_modes(tb, ehb);
      tu *= dt;
      tb *= dt;
      cu += tu;
      cb += tb;
    }
    nonlinear_rhs(cu, cb, lambda, k4u, k4b);

    SolverState out;
    out.t = s.t + dt;
    out.u = s.u;
    out.B = s.B;
    scale_modes(out.u, e1u);
    scale_modes(out.B, e1b);

    scale_modes(k1u, e1u);
    scale_modes(k1b, e1b);
    scale_modes(k2u, ehu);
    scale_modes(k2b, ehb);
    scale_modes(k3u, ehu);
    scale_modes(k3b, ehb);

    for (int c = 0; c < 3; ++c)
      for (size_t i = 0; i < g.size(); ++i) {
        out.u.c[c][i] += dt / 6.0 * (k1u.c[c][i] + 2.0 * (k2u.c[c][i] + k3u.c[c][i]) + k4u.c[c][i]);
        out.B.c[c][i] += dt / 6.0 * (k1b.c[c][i] + 2.0 * (k2b.c[c][i] + k3b.c[c][i]) + k4b.c[c][i]);
      }
    out.u = leray_project(out.u);
    out.B = leray_project(out.B);
    check_finite(out.u, out.t);
    check_finite(out.B, out.t);
    return out;
  }

  // IMEX Crank-Nicolson: nonlinear term explicit (midpoint extrapolation via
  // a half-step predictor), dissipation trapezoidal.
  VectorField nu1f(g), nB1(g);
  nonlinear_rhs(s.u, s.B, lambda, nu1f, nB1);
  // predictor at midpoint
  SolverState mid;
  mid.t = s.t + dt / 2;
  mid.u = s.u;
  mid.B = s.B;
  {
    VectorField tu = nu1f, tb = nB1;
    tu *= dt / 2;
    tb *= dt / 2;
    mid.u += tu;
    mid.B += tb;
    mid.u = heat_propagate(mid.u, cfg.nu1, dt / 2);
    mid.B = heat_propagate(mid.B, cfg.nu2, dt / 2);
  }
  VectorField nu2f(g), nB2(g);
  nonlinear_rhs(mid.u, mid.B, lambda, nu2f, nB2);

  SolverState out;
  out.t = s.t + dt;
  out.u = VectorField(g);
  out.B = VectorField(g);
  for (int c = 0; c < 3; ++c)
    for (int ix = 0; ix < g.n; ++ix)
      for (int iy = 0; iy < g.n; ++iy)
        for (int iz = 0; iz < g.n; ++iz) {
          size_t i = g.idx(ix, iy, iz);
          double k2 = 4.0 * M_PI * M_PI * g.wave(ix, iy, iz).norm2();
          double a1 = 1.0 - 0.5 * dt * cfg.nu1 * k2;
          double b1 = 1.0 + 0.5 * dt * cfg.nu1 * k2;
          double a2 = 1.0 - 0.5 * dt * cfg.nu2 * k2;
          double b2 = 1.0 + 0.5 * dt * cfg.nu2 * k2;
          out.u.c[c][i] = (a1 * s.u.c[c][i] + dt * nu2f.c[c][i]) / b1;
          out.B.c[c][i] = (a2 * s.B.c[c][i] + dt * nB2.c[c][i]) / b2;
        }
  out.u = leray_project(out.u);
  out.B = leray_project(out.B);
  check_finite(out.u, out.t);
  check_finite(out.B, out.t);
  return out;
}

namespace {

DiagRow diagnostics_at(const SolverState& s, const SolverConfig& cfg,
                       const WavenumberSchedule& sched, double dissipation_integral) {
  DiagRow r;
  r.t = s.t;
  double eu = l2_norm_spectral(s.u), eb = l2_norm_spectral(s.B);
  r.energy = eu * eu + eb * eb;
  r.dissipation_integral = dissipation_integral;
  // cross helicity = sum_xi u_hat . conj(B_hat) (real part)
  double ch = 0;
  for (int k = 0; k < 3; ++k)
    for (size_t i = 0; i < s.u.c[k].size(); ++i)
      ch += (s.u.c[k][i] * std::conj(s.B.c[k][i])).real();
  r.cross_helicity = ch;
  r.grad_norm_sq = grad_l2_sq(s.u) + grad_l2_sq(s.B);

  double lambda = s.t > 0 ? sched.lambda_of_t(s.t) : kInfLambda;
  VectorField ul = smooth_truncate(s.u, lambda);
  VectorField Bl = smooth_truncate(s.B, lambda);
  auto hm = [&](const VectorField& a, const VectorField& b) {
    TensorField t = outer_product(a, b, true);
    return lp_norm_tensor(high_pass(t, lambda), 1.0, 2);
  };
  r.hm_uu = hm(ul, ul);
  r.hm_bb = hm(Bl, Bl);
  r.hm_bu = hm(Bl, ul);
  r.hm_ub = hm(ul, Bl);
  return r;
}

}  // namespace

Trajectory solve(const SolverConfig& cfg, const WavenumberSchedule& sched, const VectorField& u0,
                 const VectorField& B0, const std::vector<double>& output_times) {
  cfg.validate();
  if (u0.divergence_defect() > tol_div || B0.divergence_defect() > tol_div)
    fail_invariant("solve: initial data must be divergence-free");
  if (u0.mean_norm() > 0 || B0.mean_norm() > 0)
    fail_invariant("solve: initial data must be mean-free");

  Trajectory traj;
  SolverState s;
  s.t = 0;
  s.u = u0;
  s.B = B0;

  // dissipation integral: trapezoid plus Euler-Maclaurin endpoint correction
  std::vector<double> gvals;  // nu1 ||grad u||^2 + nu2 ||grad B||^2 at steps
  auto gval = [&](const SolverState& st) {
    return cfg.nu1 * grad_l2_sq(st.u) + cfg.nu2 * grad_l2_sq(st.B);
  };
  gvals.push_back(gval(s));
  double trapz = 0;

  auto diss_at = [&](size_t nsteps) {
    if (nsteps == 0) return 0.0;
    double corr = 0;
    if (gvals.size() >= 3) {
      size_t m = nsteps;
      double g0p, gmp;  // one-sided derivative estimates
      g0p = (-3 * gvals[0] + 4 * gvals[1] - gvals[2]) / (2 * cfg.dt);
      gmp = (3 * gvals[m] - 4 * gvals[m - 1] + gvals[m - 2]) / (2 * cfg.dt);
      corr = -cfg.dt * cfg.dt / 12.0 * (gmp - g0p);
    }
    return trapz + corr;
  };

  size_t next_out = 0;
  std::vector<double> outs = output_times;
  std::sort(outs.begin(), outs.end());
  auto maybe_output = [&](size_t nsteps) {
    while (next_out < outs.size() && s.t >= outs[next_out] - 0.5 * cfg.dt) {
      traj.times.push_back(s.t);
      traj.u.push_back(s.u);
      traj.B.push_back(s.B);
      traj.diag.push_back(diagnostics_at(s, cfg, sched, diss_at(nsteps)));
      ++next_out;
    }
  };

  size_t nsteps = 0;
  maybe_output(nsteps);
  while (s.t < cfg.t_end - 0.5 * cfg.dt) {
    SolverState ns = step(s, cfg.dt, cfg, sched);
    double gnew = gval(ns);
    trapz += 0.5 * cfg.dt * (gvals.back() + gnew);
    gvals.push_back(gnew);
    s = std::move(ns);
    ++nsteps;
    maybe_output(nsteps);
  }
  return traj;
}

double energy_balance_residual(const Trajectory& traj) {
  if (traj.diag.empty()) fail_numeric("energy_balance_residual: empty trajectory");
  double e0 = traj.diag.front().energy / 2.0 + traj.diag.front().dissipation_integral;
  double worst = 0;
  for (const auto& r : traj.diag) {
    double lhs = r.energy / 2.0 + r.dissipation_integral;
    worst = std::max(worst, std::abs(lhs - e0) / e0);
  }
  return worst;
}

RegularityReport eventual_regularity_check(const Trajectory& traj, double nu, double c1,
                                           double c2) {
  RegularityReport rep;
  // threshold condition: (||grad||^2)^2 < c2 nu^4 / c1
  double rhs = c2 * std::pow(nu, 4.0) / c1;
  size_t i0 = traj.diag.size();
  for (size_t i = 0; i < traj.diag.size(); ++i) {
    double gsq = traj.diag[i].grad_norm_sq;
    if (gsq * gsq < rhs) {
      rep.threshold_crossed = true;
      rep.t0 = traj.diag[i].t;
      i0 = i;
      break;
    }
  }
  if (!rep.threshold_crossed) return rep;
  rep.monotone_after = true;
  for (size_t i = i0 + 1; i < traj.diag.size(); ++i) {
    double d = traj.diag[i].grad_norm_sq - traj.diag[i - 1].grad_norm_sq;
    if (d >= 0) {
      rep.monotone_after = false;
      rep.max_rise_after = std::max(rep.max_rise_after, d);
    }
  }
  return rep;
}

// --- initial data ------------------------------------------------------------

VectorField random_smooth_field(const Grid& g, uint64_t seed, double amplitude,
                                double spectral_slope) {
  Rng rng(seed);
  VectorField f(g);
  int kmax = g.max_mode();
  for (int kx = -kmax; kx <= kmax; ++kx)
    for (int ky = -kmax; ky <= kmax; ++ky)
      for (int kz = -kmax; kz <= kmax; ++kz) {
        if (kx == 0 && ky == 0 && kz == 0) continue;
        double kn = std::sqrt(double(kx) * kx + double(ky) * ky + double(kz) * kz);
        double amp = std::pow(1.0 + kn, -spectral_slope);
        for (int c = 0; c < 3; ++c)
          f.at_mode(c, kx, ky, kz) = amp * cd(rng.normal(), rng.normal());
      }
  f.enforce_hermitian();
  f = leray_project(f);
  f.band_limit();
  double nrm = l2_norm_spectral(f);
  if (nrm > 0) f *= amplitude / nrm;
  f.mean_free = true;
  f.div_free = true;
  return f;
}

VectorField named_field(const Grid& g, const std::string& name, double amplitude) {
  VectorField f(g);
  auto set = [&](int c, int kx, int ky, int kz, cd v) {
    f.at_mode(c, kx, ky, kz) = v;
    f.at_mode(c, -kx, -ky, -kz) = std::conj(v);
  };
  if (name == "taylor_green") {
    // u = A (sin x cos y, -cos x sin y, 0) with x = 2 pi x1 etc.
    // sin a cos b = (e^{ia}-e^{-ia})(e^{ib}+e^{-ib})/4i
    cd q(0.0, -0.25);  // coefficient of e^{i(a+b)} in sin a cos b
    f.at_mode(0, 1, 1, 0) = q;
    f.at_mode(0, 1, -1, 0) = q;
    f.at_mode(0, -1, 1, 0) = -q;
    f.at_mode(0, -1, -1, 0) = -q;
    f.at_mode(1, 1, 1, 0) = -q;
    f.at_mode(1, -1, 1, 0) = -q;
    f.at_mode(1, 1, -1, 0) = q;
    f.at_mode(1, -1, -1, 0) = q;
  } else if (name == "shear") {
    // u = A (sin 2 pi x2, 0, 0)
    set(0, 0, 1, 0, cd(0.0, -0.5));
  } else if (name == "abc") {
    // A sin z + cos y, B sin x + cos z, C sin y + cos x with A=B=C=1
    set(0, 0, 0, 1, cd(0.0, -0.5));
    set(0, 0, 1, 0, cd(0.5, 0.0));
    set(1, 1, 0, 0, cd(0.0, -0.5));
    set(1, 0, 0, 1, cd(0.5, 0.0));
    set(2, 0, 1, 0, cd(0.0, -0.5));
    set(2, 1, 0, 0, cd(0.5, 0.0));
  } else {
    fail_config("unknown named field: " + name);
  }
  f.enforce_hermitian();
  f = leray_project(f);
  double nrm = l2_norm_spectral(f);
  if (nrm > 0) f *= amplitude / nrm;
  f.mean_free = true;
  f.div_free = true;
  return f;
}

}  // namespace lmhd
