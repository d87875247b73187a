#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lmhd/ops.hpp"
#include "lmhd/solver.hpp"

using namespace lmhd;

TEST_CASE("horizon_T evaluates def-T") {
  CHECK(horizon_T(1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(horizon_T(2.0, 1.0, 1.0, 1.0) == doctest::Approx(0.25));
  CHECK(horizon_T(1.0, 1.0, 16.0, 1.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(horizon_T(-1.0, 1.0, 1.0, 1.0), Error);
}

TEST_CASE("lambda_of_t branches") {
  WavenumberSchedule s(1.0, 10.0);
  CHECK(s.lambda_of_t(1.0) == doctest::Approx(1.0));
  WavenumberSchedule s2(2.0, 10.0);
  CHECK(s2.lambda_of_t(0.125) == doctest::Approx(4.0));
  CHECK(s2.lambda_of_t(10.0) == kInfLambda);
  CHECK(s2.lambda_of_t(12.0) == kInfLambda);
  CHECK_THROWS_AS(s2.lambda_of_t(0.0), Error);
  CHECK_THROWS_AS(s2.lambda_of_t(-1.0), Error);

  SUBCASE("monotone increasing on [T/2, T) and exceeding any bound") {
    WavenumberSchedule s3(1.5, 2.0);
    double prev = 0;
    for (int i = 0; i <= 200; ++i) {
      double t = 1.0 + i * (1.0 - 1e-9) / 200.0;
      double v = s3.lambda_of_t(t);
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(prev > 1e2);
    // continuity at T/2: both branches agree
    CHECK(s3.lambda_of_t(1.0 - 1e-12) == doctest::Approx(s3.lambda_of_t(1.0 + 1e-12)));
  }
}

TEST_CASE("rhs structure") {
  Grid g(16);
  SolverConfig cfg;
  cfg.n = g.n;
  cfg.nu1 = 0.3;
  cfg.nu2 = 0.2;
  WavenumberSchedule sched(100.0, 1e6);  // saturated cutoff

  SUBCASE("unidirectional shear annihilates advection") {
    SolverState s;
    s.t = 1.0;
    s.u = named_field(g, "shear", 1.0);
    s.B = VectorField(g);
    s.B.mean_free = s.B.div_free = true;
    VectorField du(g), dB(g);
    rhs(s, cfg, sched, du, dB);
    VectorField expect = laplacian(s.u);
    expect *= cfg.nu1;
    du -= expect;
    CHECK(l2_norm_spectral(du) < 1e-14);
    CHECK(l2_norm_spectral(dB) < 1e-16);
  }

  SUBCASE("Lambda below all active modes kills the nonlinearity") {
    // data supported on shell |xi| in [4, 6]; Lambda = 1 annihilates P_{<L}
    VectorField u0 = random_smooth_field(g, 5, 0.7, 3.0);
    VectorField u(g);
    for (int kx = -6; kx <= 6; ++kx)
      for (int ky = -6; ky <= 6; ++ky)
        for (int kz = -6; kz <= 6; ++kz) {
          double kn = std::sqrt(double(kx * kx + ky * ky + kz * kz));
          if (kn >= 4.0 && kn <= 6.0)
            for (int c = 0; c < 3; ++c) u.at_mode(c, kx, ky, kz) = u0.at_mode(c, kx, ky, kz);
        }
    u.enforce_hermitian();
    u = leray_project(u);
    SolverState s;
    s.t = 8.0;  // Lambda(8) = 2 * 8^{-1/3} = 1 with E_star = 2
    s.u = u;
    s.B = u;
    WavenumberSchedule low(2.0, 1e6);
    CHECK(low.lambda_of_t(8.0) == doctest::Approx(1.0));
    VectorField du(g), dB(g);
    rhs(s, cfg, low, du, dB);
    VectorField eu = laplacian(s.u);
    eu *= cfg.nu1;
    VectorField eb = laplacian(s.B);
    eb *= cfg.nu2;
    du -= eu;
    dB -= eb;
    CHECK(l2_norm_spectral(du) < 1e-14);
    CHECK(l2_norm_spectral(dB) < 1e-14);
  }

  SUBCASE("for t >= T the rhs coincides bit-for-bit with the untruncated one") {
    WavenumberSchedule fin(1.0, 2.0);
    SolverState s;
    s.t = 3.0;  // past T
    s.u = random_smooth_field(g, 6, 0.5, 3.5);
    s.B = random_smooth_field(g, 7, 0.4, 3.5);
    VectorField du1(g), dB1(g), du2(g), dB2(g);
    rhs(s, cfg, fin, du1, dB1);
    rhs(s, cfg, sched, du2, dB2);  // sched saturates on this grid at t=3
    bool identical = true;
    for (int c = 0; c < 3; ++c)
      for (size_t i = 0; i < g.size(); ++i) {
        identical = identical && du1.c[c][i] == du2.c[c][i];
        identical = identical && dB1.c[c][i] == dB2.c[c][i];
      }
    CHECK(identical);
  }
}

TEST_CASE("step properties") {
  Grid g(16);
  SolverConfig cfg;
  cfg.n = g.n;
  cfg.nu1 = 0.4;
  cfg.nu2 = 0.3;
  WavenumberSchedule sched(100.0, 1e6);

  SUBCASE("pure heat case reproduces exponential decay to machine precision") {
    SolverState s;
    s.t = 0.5;
    s.u = named_field(g, "shear", 1.0);
    s.B = VectorField(g);
    s.B.mean_free = s.B.div_free = true;
    double dt = 0.05;
    SolverState ns = step(s, dt, cfg, sched);
    // shear mode |xi| = 1: exact factor
    double factor = std::exp(-cfg.nu1 * 4 * M_PI * M_PI * dt);
    cd expect = s.u.at_mode(0, 0, 1, 0) * factor;
    CHECK(std::abs(ns.u.at_mode(0, 0, 1, 0) - expect) < 1e-10 * std::abs(expect));
  }

  SUBCASE("dt halving gives 4th-order error reduction for IF-RK4") {
    SolverState s;
    s.t = 0.0;
    s.u = random_smooth_field(g, 11, 0.8, 4.0);
    s.B = random_smooth_field(g, 12, 0.6, 4.0);
    auto advance = [&](double dt, int nsteps) {
      SolverState cur = s;
      for (int i = 0; i < nsteps; ++i) cur = step(cur, dt, cfg, sched);
      return cur;
    };
    SolverState fine = advance(0.0025, 64);
    SolverState mid = advance(0.005, 32);
    SolverState coarse = advance(0.01, 16);
    auto dist = [&](const SolverState& a, const SolverState& b) {
      double d = 0;
      for (int c = 0; c < 3; ++c)
        for (size_t i = 0; i < g.size(); ++i) {
          d += std::norm(a.u.c[c][i] - b.u.c[c][i]);
          d += std::norm(a.B.c[c][i] - b.B.c[c][i]);
        }
      return std::sqrt(d);
    };
    double e_coarse = dist(coarse, fine);
    double e_mid = dist(mid, fine);
    double order = std::log2(e_coarse / e_mid);
    CHECK(order > 3.6);
    CHECK(order < 4.8);
  }

  SUBCASE("energy never increases across a step") {
    SolverState s;
    s.t = 0.0;
    s.u = random_smooth_field(g, 13, 1.0, 3.5);
    s.B = random_smooth_field(g, 14, 0.8, 3.5);
    double e0 = std::pow(l2_norm_spectral(s.u), 2) + std::pow(l2_norm_spectral(s.B), 2);
    for (int i = 0; i < 5; ++i) {
      s = step(s, 0.01, cfg, sched);
      double e = std::pow(l2_norm_spectral(s.u), 2) + std::pow(l2_norm_spectral(s.B), 2);
      CHECK(e <= e0 * (1 + 1e-12));
      e0 = e;
    }
  }

  SUBCASE("snapshots stay divergence-free and mean-free") {
    SolverState s;
    s.t = 0.0;
    s.u = random_smooth_field(g, 15, 1.0, 3.0);
    s.B = random_smooth_field(g, 16, 1.0, 3.0);
    for (int i = 0; i < 10; ++i) s = step(s, 0.01, cfg, sched);
    CHECK(s.u.divergence_defect() < 1e-9);
    CHECK(s.B.divergence_defect() < 1e-9);
    CHECK(s.u.mean_norm() == 0.0);
    CHECK(s.B.mean_norm() == 0.0);
  }
}

// Independent dense-ODE Galerkin oracle: plain RK4 on the spectral ODE system
// with explicit convolution sums over the full resolved band.
namespace {

struct DenseState {
  int K;
  std::vector<cd> a;  // components 0..2 u, 3..5 B
  size_t idx(int c, int kx, int ky, int kz) const {
    int m = 2 * K + 1;
    return ((size_t(c) * m + (kx + K)) * m + (ky + K)) * m + (kz + K);
  }
};

DenseState dense_rhs(const DenseState& s, double nu1, double nu2, double lambda) {
  int K = s.K;
  DenseState out{K, std::vector<cd>(s.a.size(), cd(0))};
  auto phi = [&](double kx, double ky, double kz) {
    double r = std::sqrt(kx * kx + ky * ky + kz * kz);
    return CutoffProfile::eval_scaled(r, lambda);
  };
  std::vector<cd> ul(s.a.size()), bl(s.a.size());
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky)
      for (int kz = -K; kz <= K; ++kz) {
        double p = phi(kx, ky, kz);
        for (int c = 0; c < 3; ++c) {
          ul[s.idx(c, kx, ky, kz)] = p * s.a[s.idx(c, kx, ky, kz)];
          bl[s.idx(c, kx, ky, kz)] = p * s.a[s.idx(c + 3, kx, ky, kz)];
        }
      }
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky)
      for (int kz = -K; kz <= K; ++kz) {
        double k2 = double(kx * kx + ky * ky + kz * kz);
        cd nl_u[3] = {0, 0, 0}, nl_b[3] = {0, 0, 0};
        for (int lx = -K; lx <= K; ++lx)
          for (int ly = -K; ly <= K; ++ly)
            for (int lz = -K; lz <= K; ++lz) {
              int hx = kx - lx, hy = ky - ly, hz = kz - lz;
              if (std::abs(hx) > K || std::abs(hy) > K || std::abs(hz) > K) continue;
              cd kdotu = double(kx) * ul[s.idx(0, hx, hy, hz)] +
                         double(ky) * ul[s.idx(1, hx, hy, hz)] +
                         double(kz) * ul[s.idx(2, hx, hy, hz)];
              cd kdotb = double(kx) * bl[s.idx(0, hx, hy, hz)] +
                         double(ky) * bl[s.idx(1, hx, hy, hz)] +
                         double(kz) * bl[s.idx(2, hx, hy, hz)];
              for (int c = 0; c < 3; ++c) {
                nl_u[c] += ul[s.idx(c, lx, ly, lz)] * kdotu - bl[s.idx(c, lx, ly, lz)] * kdotb;
                nl_b[c] += bl[s.idx(c, lx, ly, lz)] * kdotu - ul[s.idx(c, lx, ly, lz)] * kdotb;
              }
            }
        double p = phi(kx, ky, kz);
        cd I(0.0, 2 * M_PI);
        cd fu[3], fb[3];
        for (int c = 0; c < 3; ++c) {
          fu[c] = -I * p * nl_u[c];
          fb[c] = -I * p * nl_b[c];
        }
        if (k2 > 0) {
          cd du = (double(kx) * fu[0] + double(ky) * fu[1] + double(kz) * fu[2]) / k2;
          cd db = (double(kx) * fb[0] + double(ky) * fb[1] + double(kz) * fb[2]) / k2;
          fu[0] -= double(kx) * du;
          fu[1] -= double(ky) * du;
          fu[2] -= double(kz) * du;
          fb[0] -= double(kx) * db;
          fb[1] -= double(ky) * db;
          fb[2] -= double(kz) * db;
        } else {
          for (int c = 0; c < 3; ++c) fu[c] = fb[c] = cd(0);
        }
        double lap = -4 * M_PI * M_PI * k2;
        for (int c = 0; c < 3; ++c) {
          out.a[out.idx(c, kx, ky, kz)] = nu1 * lap * s.a[s.idx(c, kx, ky, kz)] + fu[c];
          out.a[out.idx(c + 3, kx, ky, kz)] = nu2 * lap * s.a[s.idx(c + 3, kx, ky, kz)] + fb[c];
        }
      }
  return out;
}

void dense_rk4(DenseState& s, double dt, double nu1, double nu2, double lambda) {
  DenseState k1 = dense_rhs(s, nu1, nu2, lambda);
  DenseState t = s;
  for (size_t i = 0; i < s.a.size(); ++i) t.a[i] = s.a[i] + 0.5 * dt * k1.a[i];
  DenseState k2 = dense_rhs(t, nu1, nu2, lambda);
  for (size_t i = 0; i < s.a.size(); ++i) t.a[i] = s.a[i] + 0.5 * dt * k2.a[i];
  DenseState k3 = dense_rhs(t, nu1, nu2, lambda);
  for (size_t i = 0; i < s.a.size(); ++i) t.a[i] = s.a[i] + dt * k3.a[i];
  DenseState k4 = dense_rhs(t, nu1, nu2, lambda);
  for (size_t i = 0; i < s.a.size(); ++i)
    s.a[i] += dt / 6.0 * (k1.a[i] + 2.0 * (k2.a[i] + k3.a[i]) + k4.a[i]);
}

}  // namespace

TEST_CASE("solver matches an independently coded dense Galerkin ODE") {
  Grid g(8);  // resolved band |xi_j| <= 3
  const int K = 3;
  SolverConfig cfg;
  cfg.n = g.n;
  cfg.nu1 = 0.15;
  cfg.nu2 = 0.1;
  cfg.dt = 0.002;
  // Lambda active in the band: on t in [1, 2], Lambda = 4 t^{-1/3} in (3.1, 4)
  WavenumberSchedule sched(4.0, 1e6);

  VectorField u0(g), B0(g);
  Rng rng(99);
  for (int kx = -1; kx <= 1; ++kx)
    for (int ky = -1; ky <= 1; ++ky)
      for (int kz = -1; kz <= 1; ++kz) {
        if (!kx && !ky && !kz) continue;
        for (int c = 0; c < 3; ++c) {
          u0.at_mode(c, kx, ky, kz) = 0.2 * cd(rng.normal(), rng.normal());
          B0.at_mode(c, kx, ky, kz) = 0.15 * cd(rng.normal(), rng.normal());
        }
      }
  u0.enforce_hermitian();
  B0.enforce_hermitian();
  u0 = leray_project(u0);
  B0 = leray_project(B0);

  DenseState ds;
  ds.K = K;
  ds.a.assign(size_t(6) * (2 * K + 1) * (2 * K + 1) * (2 * K + 1), cd(0));
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky)
      for (int kz = -K; kz <= K; ++kz)
        for (int c = 0; c < 3; ++c) {
          ds.a[ds.idx(c, kx, ky, kz)] = u0.at_mode(c, kx, ky, kz);
          ds.a[ds.idx(c + 3, kx, ky, kz)] = B0.at_mode(c, kx, ky, kz);
        }

  SolverState s;
  s.t = 1.0;
  s.u = u0;
  s.B = B0;
  int nsteps = 500;  // unit time
  for (int i = 0; i < nsteps; ++i) {
    double lambda = sched.lambda_of_t(s.t + 0.5 * cfg.dt);
    dense_rk4(ds, cfg.dt, cfg.nu1, cfg.nu2, lambda);
    s = step(s, cfg.dt, cfg, sched);
  }

  double diff = 0, scale = 0;
  for (int kx = -K; kx <= K; ++kx)
    for (int ky = -K; ky <= K; ++ky)
      for (int kz = -K; kz <= K; ++kz)
        for (int c = 0; c < 3; ++c) {
          diff += std::norm(s.u.at_mode(c, kx, ky, kz) - ds.a[ds.idx(c, kx, ky, kz)]);
          diff += std::norm(s.B.at_mode(c, kx, ky, kz) - ds.a[ds.idx(c + 3, kx, ky, kz)]);
          scale += std::norm(ds.a[ds.idx(c, kx, ky, kz)]);
          scale += std::norm(ds.a[ds.idx(c + 3, kx, ky, kz)]);
        }
  CHECK(std::sqrt(diff) / std::sqrt(scale) < 1e-8);
}

TEST_CASE("solve: energy balance and diagnostics") {
  Grid g(16);
  SolverConfig cfg;
  cfg.n = g.n;
  cfg.nu1 = 0.2;
  cfg.nu2 = 0.25;
  cfg.dt = 2.5e-4;
  cfg.t_end = 0.15;
  WavenumberSchedule sched(2.0, 40.0);

  VectorField u0 = random_smooth_field(g, 201, 0.6, 5.5);
  VectorField B0 = random_smooth_field(g, 202, 0.4, 5.5);
  std::vector<double> outs;
  for (int i = 0; i <= 3; ++i) outs.push_back(0.05 * i);
  Trajectory traj = solve(cfg, sched, u0, B0, outs);

  CHECK(traj.times.size() == outs.size());

  // energy equality residual
  CHECK(energy_balance_residual(traj) < 1e-6);

  // div-free / mean-free at every snapshot
  for (const auto& u : traj.u) {
    CHECK(u.divergence_defect() < 1e-9);
    CHECK(u.mean_norm() == 0.0);
  }

  // pure heat run: exact integrating factor
  VectorField shear = named_field(g, "shear", 1.0);
  VectorField zero(g);
  zero.mean_free = zero.div_free = true;
  Trajectory h = solve(cfg, sched, shear, zero, {0.0, 0.05, 0.1, 0.15});
  CHECK(energy_balance_residual(h) < 1e-8);
  for (size_t i = 1; i < h.diag.size(); ++i)
    CHECK(h.diag[i].grad_norm_sq < h.diag[i - 1].grad_norm_sq);
}

TEST_CASE("energy balance residual shrinks under dt refinement") {
  Grid g(8);
  WavenumberSchedule sched(100.0, 1e6);
  // band-2 data: every dissipative time scale is O(1), so the quadrature and
  // the integrator are both in their asymptotic regime
  Rng rng(301);
  VectorField u0(g), B0(g);
  for (int kx = -2; kx <= 2; ++kx)
    for (int ky = -2; ky <= 2; ++ky)
      for (int kz = -2; kz <= 2; ++kz) {
        if (!kx && !ky && !kz) continue;
        for (int c = 0; c < 3; ++c) {
          u0.at_mode(c, kx, ky, kz) = 0.15 * cd(rng.normal(), rng.normal());
          B0.at_mode(c, kx, ky, kz) = 0.1 * cd(rng.normal(), rng.normal());
        }
      }
  u0.enforce_hermitian();
  B0.enforce_hermitian();
  u0 = leray_project(u0);
  B0 = leray_project(B0);
  auto resid = [&](double dt) {
    SolverConfig cfg;
    cfg.n = g.n;
    cfg.nu1 = 0.1;
    cfg.nu2 = 0.1;
    cfg.dt = dt;
    cfg.t_end = 0.2;
    Trajectory t = solve(cfg, sched, u0, B0, {0.0, 0.1, 0.2});
    return energy_balance_residual(t);
  };
  double r1 = resid(0.005);
  double r2 = resid(0.0025);
  double order = std::log2(r1 / r2);
  CHECK(order > 3.0);  // trends to the integrator order as dt -> 0
}

TEST_CASE("eventual regularity check") {
  Grid g(16);
  SolverConfig cfg;
  cfg.n = g.n;
  cfg.nu1 = 0.5;
  cfg.nu2 = 0.5;
  cfg.dt = 2e-3;
  cfg.t_end = 0.3;
  WavenumberSchedule sched(2.0, 100.0);

  SUBCASE("small data decreases monotonically from t = 0") {
    VectorField u0 = random_smooth_field(g, 401, 0.015, 4.0);
    VectorField B0 = random_smooth_field(g, 402, 0.015, 4.0);
    std::vector<double> outs;
    for (int i = 0; i <= 6; ++i) outs.push_back(0.05 * i);
    Trajectory t = solve(cfg, sched, u0, B0, outs);
    auto rep = eventual_regularity_check(t, 0.5, 1.0, 1.0);
    CHECK(rep.threshold_crossed);
    CHECK(rep.t0 == doctest::Approx(0.0));
    CHECK(rep.monotone_after);
  }

  SUBCASE("threshold crossing time decreases as nu increases") {
    std::vector<double> crossing;
    for (double nu : {0.3, 0.5, 0.8}) {
      SolverConfig c2 = cfg;
      c2.nu1 = c2.nu2 = nu;
      VectorField u0 = random_smooth_field(g, 403, 1.0, 4.0);
      VectorField B0 = random_smooth_field(g, 404, 0.8, 4.0);
      std::vector<double> outs;
      for (int i = 0; i <= 15; ++i) outs.push_back(0.02 * i);
      Trajectory t = solve(c2, sched, u0, B0, outs);
      auto rep = eventual_regularity_check(t, nu, 1.0, 5000.0);
      REQUIRE(rep.threshold_crossed);
      crossing.push_back(rep.t0);
    }
    CHECK(crossing[0] >= crossing[1]);
    CHECK(crossing[1] >= crossing[2]);
  }
}
