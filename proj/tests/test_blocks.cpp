#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lmhd/blocks.hpp"
#include "lmhd/ops.hpp"

using namespace lmhd;

TEST_CASE("profile normalization") {
  ProfileFunctions pf = make_profiles();

  // int phi^2 = 1 and int psi^2 = 1 to 1e-12
  CHECK(std::abs(std::pow(pf.phi.lp_norm_unit(0, 2.0), 2.0) - 1.0) < 1e-12);
  CHECK(std::abs(std::pow(pf.psi.lp_norm_unit(0, 2.0), 2.0) - 1.0) < 1e-12);
  // psi mean-free
  CHECK(std::abs(pf.psi.mean_unit()) < 1e-12);
  // phi = -Phi'' pointwise
  for (double y : {0.40, 0.45, 0.5, 0.55, 0.60})
    CHECK(pf.phi(y) == doctest::Approx(-pf.phi_big.deriv(2, y)).epsilon(1e-12));
  // support exactly zero outside [3/8, 5/8]
  for (double y : {0.0, 0.1, 0.374, 0.626, 0.9, 1.0}) {
    CHECK(pf.psi(y) == 0.0);
    CHECK(pf.phi(y) == 0.0);
    CHECK(pf.phi_big(y) == 0.0);
  }
}

TEST_CASE("params_from_lambda") {
  SUBCASE("direct evaluation at lambda = 2^8, eps = 1/100") {
    BlockParams p = params_from_lambda(256.0, 0.01);
    CHECK(p.r_par == doctest::Approx(std::pow(2.0, 8.0 * (-7.0 / 8.0 - 0.16))).epsilon(1e-12));
    CHECK(p.r_perp == doctest::Approx(std::pow(2.0, 8.0 * (-7.0 / 8.0 - 0.20))).epsilon(1e-12));
    CHECK(p.r_tperp == doctest::Approx(std::pow(2.0, 8.0 * (-0.25 - 0.04))).epsilon(1e-12));
    CHECK(p.mu == doctest::Approx(std::pow(2.0, 8.0 * 1.22)).epsilon(1e-12));
    CHECK(!p.paper_admissible);  // 1/100 exceeds the paper bound 1e-3
  }

  SUBCASE("epsilon = 0 collapses the exponents") {
    BlockParams p = params_from_lambda(256.0, 0.0);
    CHECK(p.r_par == doctest::Approx(p.r_perp).epsilon(1e-13));
    CHECK(p.sigma == 1);
  }

  SUBCASE("non-eighth-power lambda rejected") {
    CHECK_THROWS_AS(params_from_lambda(100.0, 1e-3), Error);
  }

  SUBCASE("sigma rounding is logged via sigma_exact") {
    BlockParams p = params_from_lambda(std::pow(2.0, 16.0), 1.0 / 1024.0);
    CHECK(p.sigma == 1);
    CHECK(p.sigma_exact > 1.0);
    CHECK(p.paper_admissible);
  }
}

TEST_CASE("block evaluation on a grid") {
  DirectionSets sets = load_direction_sets();
  BlockParams p = desk_params(5, 8.0);
  ProfileFunctions pf = ProfileFunctions::make(ProfileKind::single_mode);
  Grid g(64);

  Block bl;
  bl.frame = sets.magnetic.frames[0];
  bl.family = Family::magnetic;

  SUBCASE("W is orthogonal to k2 pointwise and D vanishes for velocity frames") {
    VectorField W = eval_block(BlockKind::W, bl, p, pf, 0.1, g);
    auto wp = inverse_transform(W);
    Vec3 k2 = bl.frame.k2();
    double worst = 0;
    for (size_t i = 0; i < g.size(); ++i)
      worst = std::max(worst,
                       std::abs(wp[0][i] * k2[0] + wp[1][i] * k2[1] + wp[2][i] * k2[2]));
    CHECK(worst < 1e-12);

    Block vb;
    vb.frame = sets.velocity.frames[0];
    vb.family = Family::velocity;
    VectorField D = eval_block(BlockKind::D, vb, p, pf, 0.0, g);
    CHECK(l2_norm_spectral(D) == 0.0);
  }

  SUBCASE("pointwise formula oracle at the peak") {
    // bump blocks at moderate scale on a fine grid: value at a chosen point
    BlockParams bp = desk_params(5, 8.0);
    bp.profiles = ProfileKind::bump;
    bp.r_par = 1.0;
    bp.r_perp = 1.0;
    bp.r_tperp = 1.0;
    ProfileFunctions bpf = make_profiles();
    Block bb;
    bb.frame = sets.magnetic.frames[0];
    bb.family = Family::magnetic;
    // direct sample comparison on a few points
    Grid gg(32);
    VectorField W = eval_block(BlockKind::W, bb, bp, bpf, 0.0, gg);
    auto wp = inverse_transform(W);
    Vec3 k = bb.frame.k(), k1 = bb.frame.k1(), k2 = bb.frame.k2();
    double freq = double(bp.freq());
    for (int trial : {3, 7, 11}) {
      int ix = trial, iy = (trial * 5) % gg.n, iz = (trial * 3) % gg.n;
      Vec3 x{double(ix) / gg.n, double(iy) / gg.n, double(iz) / gg.n};
      double s1 = freq * (k1[0] * x[0] + k1[1] * x[1] + k1[2] * x[2]);
      double s2 = freq * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
      double s3 = freq * (k2[0] * x[0] + k2[1] * x[1] + k2[2] * x[2]);
      double expect = bpf.psi.scaled(0, s1, 1.0) * bpf.phi.scaled(0, s2, 1.0) *
                      bpf.phi_t.scaled(0, s3, 1.0);
      // spectral resampling of the bump truncates its tail; compare loosely
      double got = wp[0][gg.idx(ix, iy, iz)];
      CHECK(got == doctest::Approx(expect * k1[0]).epsilon(0.05));
    }
  }
}

TEST_CASE("divergence and curl identities hold at spectral precision") {
  DirectionSets sets = load_direction_sets();
  ProfileFunctions pf = make_profiles();
  Block bl;
  bl.frame = sets.magnetic.frames[0];
  bl.family = Family::magnetic;

  for (double lambda : {256.0, 65536.0}) {
    BlockParams p = params_from_lambda(lambda, 1.0 / 1024.0);
    auto rep = verify_div_identities(bl, p, pf);
    CHECK(rep.div_w_rel < 1e-9);
    CHECK(rep.curl_w_rel < 1e-9);
    CHECK(rep.div_d_rel < 1e-9);
    CHECK(rep.curl_d_rel < 1e-9);
  }

  SUBCASE("corrector vanishes when psi and phi_t are constants") {
    BlockParams p = desk_params(5, 4.0);
    ProfileFunctions upf = ProfileFunctions::make(ProfileKind::unit);
    Grid g(32);
    VectorField wtc = eval_block(BlockKind::Wtc, bl, p, upf, 0.0, g);
    CHECK(l2_norm_spectral(wtc) < 1e-14);
  }

  SUBCASE("curl of the curl potential is divergence-free on the grid") {
    BlockParams p = desk_params(5, 4.0);
    ProfileFunctions spf = ProfileFunctions::make(ProfileKind::single_mode);
    Grid g(64);
    VectorField wc = eval_block(BlockKind::Wc, bl, p, spf, 0.2, g);
    VectorField cc = curl(wc);
    CHECK(cc.divergence_defect() < 1e-12);
  }
}

TEST_CASE("grid-evaluated corrector identities for the desk profile set") {
  // for band-limited profiles the identities are exact on the grid
  DirectionSets sets = load_direction_sets();
  BlockParams p = desk_params(5, 4.0);
  ProfileFunctions pf = ProfileFunctions::make(ProfileKind::single_mode);
  Grid g(64);
  double t = 0.13;
  for (const Frame& fr : {sets.magnetic.frames[0], sets.magnetic.frames[2]}) {
    Block bl;
    bl.frame = fr;
    bl.family = Family::magnetic;
    VectorField W = eval_block(BlockKind::W, bl, p, pf, t, g);
    VectorField Wtc = eval_block(BlockKind::Wtc, bl, p, pf, t, g);
    VectorField Wc = eval_block(BlockKind::Wc, bl, p, pf, t, g);
    VectorField sum = W;
    sum += Wtc;
    CHECK(divergence(sum).c.size() > 0);
    ScalarField dv = divergence(sum);
    double scale = l2_norm_spectral(W) * p.freq() * 2 * M_PI;
    CHECK(lp_norm(dv, 2.0) / scale < 1e-12);
    VectorField cw = curl(Wc);
    cw -= sum;
    CHECK(l2_norm_spectral(cw) / l2_norm_spectral(W) < 1e-12);

    VectorField D = eval_block(BlockKind::D, bl, p, pf, t, g);
    VectorField Dtc = eval_block(BlockKind::Dtc, bl, p, pf, t, g);
    VectorField Dc = eval_block(BlockKind::Dc, bl, p, pf, t, g);
    VectorField dsum = D;
    dsum += Dtc;
    CHECK(lp_norm(divergence(dsum), 2.0) / scale < 1e-12);
    VectorField cd2 = curl(Dc);
    cd2 -= dsum;
    CHECK(l2_norm_spectral(cd2) / l2_norm_spectral(D) < 1e-12);
  }
}

TEST_CASE("intermittency exponents across the lambda grid") {
  ProfileFunctions pf = make_profiles();
  std::vector<double> lambdas = {std::pow(2.0, 8.0), std::pow(2.0, 16.0), std::pow(2.0, 24.0)};
  double eps = 1.0 / 1024.0;
  auto rows = measure_intermittency(BlockKind::W, lambdas, eps, {1.0, 2.0, kInf}, 65, pf);
  auto fits = fit_intermittency_exponents(rows);
  REQUIRE(fits.size() == 12);  // (N, M) in {0,1}^2 x three p values
  for (const auto& f : fits) {
    double tol = std::max(0.05 * std::abs(f.predicted_slope), 0.05);
    CHECK(std::abs(f.measured_slope - f.predicted_slope) < tol);
  }

  SUBCASE("p = 2 normalization: norm 1 and exponent 0") {
    for (const auto& r : rows)
      if (r.N == 0 && r.M == 0 && r.p == 2.0) CHECK(r.measured == doctest::Approx(1.0).epsilon(1e-6));
    for (const auto& f : fits)
      if (f.N == 0 && f.M == 0 && f.p == 2.0) {
        CHECK(std::abs(f.measured_slope) < 0.05);
        CHECK(f.predicted_slope == doctest::Approx(0.0));
      }
  }
}

TEST_CASE("inverse time derivative") {
  ProfileFunctions pf = make_profiles();

  SUBCASE("defining property: d/dt reproduces psi^2 - 1") {
    BlockParams p = params_from_lambda(256.0, 1.0 / 1024.0);
    InverseTimeDerivative inv(pf.psi, p);
    double s = 0.37, t = 0.2 / (p.freq() * p.mu);
    double h = 1e-7 / (p.freq() * p.mu);
    double fd = (inv.value(t + h, s) - inv.value(t - h, s)) / (2 * h);
    double psi_val = pf.psi.scaled(0, s + p.freq() * p.mu * t, p.r_par);
    CHECK(fd == doctest::Approx(psi_val * psi_val - 1.0).epsilon(1e-4));
  }

  SUBCASE("space-time mean vanishes") {
    BlockParams p = params_from_lambda(256.0, 1.0 / 1024.0);
    InverseTimeDerivative inv(pf.psi, p);
    CHECK(std::abs(inv.space_time_mean()) < 1e-8);
  }

  SUBCASE("sup norm scales like (freq mu)^{-1} across a mu grid") {
    std::vector<double> mus, sups;
    for (double lam : {std::pow(2.0, 8.0), std::pow(2.0, 16.0), std::pow(2.0, 24.0)}) {
      BlockParams p = params_from_lambda(lam, 1.0 / 1024.0);
      InverseTimeDerivative inv(pf.psi, p);
      double sup = inv.sup_abs();
      CHECK(sup <= inv.bound() * (1 + 1e-9));
      mus.push_back(double(p.freq()) * p.mu);
      sups.push_back(sup);
    }
    double slope = loglog_fit(mus, sups).slope;
    CHECK(slope == doctest::Approx(-1.0).epsilon(0.02));
  }

  SUBCASE("unit profile gives the zero field") {
    Profile1D one(ProfileKind::unit, Profile1D::Role::psi);
    BlockParams p = desk_params(5, 8.0);
    InverseTimeDerivative inv(one, p);
    CHECK(inv.sup_abs() < 1e-12);
  }
}

TEST_CASE("disjoint supports under chosen shifts") {
  DirectionSets sets = load_direction_sets();
  ProfileFunctions pf = make_profiles();
  // paper-faithful parameters at lambda = 2^16: slabs are thin enough
  BlockParams p = params_from_lambda(std::pow(2.0, 16.0), 1.0 / 1024.0);

  std::vector<Block> blocks;
  for (const auto& f : sets.velocity.frames) blocks.push_back({f, Family::velocity, {}});
  for (const auto& f : sets.magnetic.frames) blocks.push_back({f, Family::magnetic, {}});
  blocks.push_back({sets.helicity.frames[0], Family::helicity, {}});

  ShiftPlan plan = choose_shifts(blocks, p);
  CHECK(plan.margin > 0.0);
  for (size_t i = 0; i < blocks.size(); ++i) blocks[i].shift = plan.shifts[i];

  for (size_t i = 0; i < blocks.size(); ++i)
    for (size_t j = i + 1; j < blocks.size(); ++j) {
      auto dis = supports_disjoint(blocks[i], blocks[j], p);
      REQUIRE(dis.has_value());
      CHECK(*dis);
    }

  SUBCASE("pointwise block product vanishes on a sample cloud") {
    // W values need only the scalar factor product; sample many points
    Rng rng(5);
    double freq = double(p.freq());
    auto factor = [&](const Block& b, const Vec3& x) {
      Vec3 k = b.frame.k(), k2v = b.frame.k2();
      double s2 = freq * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]) - b.shift.o1;
      double s3 = freq * (k2v[0] * x[0] + k2v[1] * x[1] + k2v[2] * x[2]) - b.shift.o2;
      return pf.phi.scaled(0, s2, p.r_perp) * pf.phi_t.scaled(0, s3, p.r_tperp);
    };
    int violations = 0;
    for (int trial = 0; trial < 20000; ++trial) {
      Vec3 x{rng.uniform(), rng.uniform(), rng.uniform()};
      int active = 0;
      for (const auto& b : blocks)
        if (factor(b, x) != 0.0) ++active;
      if (active > 1) ++violations;
    }
    CHECK(violations == 0);
  }
}
