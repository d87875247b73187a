#include "lmhd/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "lmhd/ops.hpp"

namespace lmhd {

namespace {

bool is_eighth_power(double lambda) {
  double root = std::pow(lambda, 1.0 / 8.0);
  double r = std::round(root);
  return r >= 1 && std::abs(std::pow(r, 8.0) - lambda) < 1e-6 * lambda;
}

Vec3 vscale(const Vec3& v, double s) { return {v[0] * s, v[1] * s, v[2] * s}; }
Vec3 vcross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double vdot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

}  // namespace

BlockParams params_from_lambda(double lambda, double epsilon, int n_lambda, ProfileKind profiles) {
  if (lambda <= 1) fail_config("params_from_lambda: lambda must exceed 1");
  if (!is_eighth_power(lambda)) fail_config("params_from_lambda: lambda^{1/8} must be an integer");
  if (epsilon < 0 || epsilon > 0.01)
    fail_config("params_from_lambda: epsilon out of the supported range [0, 0.01]");
  BlockParams p;
  p.lambda = lambda;
  p.epsilon = epsilon;
  p.n_lambda = n_lambda;
  p.profiles = profiles;
  p.paper_admissible = epsilon < 1e-3 && epsilon > 0;
  p.r_par = std::pow(lambda, -7.0 / 8.0 - 16.0 * epsilon);
  p.r_perp = std::pow(lambda, -7.0 / 8.0 - 20.0 * epsilon);
  p.r_tperp = std::pow(lambda, -1.0 / 4.0 - 4.0 * epsilon);
  p.mu = std::pow(lambda, 1.0 + 22.0 * epsilon);
  p.sigma_exact = std::pow(lambda, 4.0 * epsilon);
  p.sigma = std::lround(p.sigma_exact);
  if (p.sigma < 1) p.sigma = 1;
  return p;
}

BlockParams desk_params(int n_lambda_eff, double mu) {
  BlockParams p;
  p.lambda = 0;  // not tied to a paper schedule
  p.epsilon = 0;
  p.n_lambda = n_lambda_eff;
  p.profiles = ProfileKind::single_mode;
  p.paper_admissible = false;
  p.r_par = p.r_perp = p.r_tperp = 1.0;
  p.mu = mu;
  p.sigma = 1;
  p.sigma_exact = 1;
  return p;
}

// --- symbolic separable terms -------------------------------------------------

namespace {

// along axis 2 two base functions occur (phi and its potential Phi)
enum class Axis2Base { phi, phi_big };

struct SepTerm {
  double coef = 1.0;
  Vec3 v{0, 0, 0};  // direction (zero vector marks scalar terms via v = {1,0,0}? no:
                    // scalar terms use coef only and v_is_scalar = true)
  bool scalar = false;
  int d1 = 0, d2 = 0, d3 = 0;
  Axis2Base base2 = Axis2Base::phi;
};

struct SepContext {
  const Block* block;
  const BlockParams* p;
  const ProfileFunctions* pf;

  const Profile1D& prof1() const { return pf->psi; }
  const Profile1D& prof2(Axis2Base b) const {
    return b == Axis2Base::phi ? pf->phi : pf->phi_big;
  }
  const Profile1D& prof3() const { return pf->phi_t; }
};

// d/dx_i over all axes; returns the three directional derivative copies
std::vector<SepTerm> derive_along(const SepTerm& t, const Vec3& dir, const SepContext& ctx) {
  double freq = double(ctx.p->freq());
  Vec3 k1 = ctx.block->frame.k1(), k = ctx.block->frame.k(), k2 = ctx.block->frame.k2();
  std::vector<SepTerm> out;
  auto push = [&](int axis, double proj) {
    if (proj == 0.0) return;
    SepTerm n = t;
    n.coef *= freq * proj;  // chain rule in the slab coordinate
    if (axis == 1) n.d1++;
    if (axis == 2) n.d2++;
    if (axis == 3) n.d3++;
    out.push_back(n);
  };
  push(1, vdot(dir, k1));
  push(2, vdot(dir, k));
  push(3, vdot(dir, k2));
  return out;
}

std::vector<SepTerm> divergence_terms(const std::vector<SepTerm>& terms, const SepContext& ctx) {
  std::vector<SepTerm> out;
  for (const auto& t : terms) {
    for (int i = 0; i < 3; ++i) {
      Vec3 e{0, 0, 0};
      e[i] = 1.0;
      for (auto& d : derive_along(t, e, ctx)) {
        d.coef *= t.v[i];
        d.scalar = true;
        d.v = {0, 0, 0};
        if (d.coef != 0.0) out.push_back(d);
      }
    }
  }
  return out;
}

std::vector<SepTerm> curl_terms(const std::vector<SepTerm>& terms, const SepContext& ctx) {
  double freq = double(ctx.p->freq());
  Vec3 k1 = ctx.block->frame.k1(), k = ctx.block->frame.k(), k2 = ctx.block->frame.k2();
  std::vector<SepTerm> out;
  for (const auto& t : terms) {
    // curl(f v) = grad f x v; grad splits over the three axes
    auto add = [&](int axis, const Vec3& axis_vec) {
      Vec3 c = vcross(axis_vec, t.v);
      if (c[0] == 0 && c[1] == 0 && c[2] == 0) return;
      SepTerm n = t;
      n.coef *= freq;
      n.v = c;
      if (axis == 1) n.d1++;
      if (axis == 2) n.d2++;
      if (axis == 3) n.d3++;
      out.push_back(n);
    };
    add(1, k1);
    add(2, k);
    add(3, k2);
  }
  return out;
}

// 1-d inner product of two scaled factor derivatives on the same axis
double factor_gram(const Profile1D& a, int da, const Profile1D& b, int db, double r) {
  struct Key {
    const Profile1D* a;
    int da;
    const Profile1D* b;
    int db;
    double r;
    bool operator<(const Key& o) const {
      if (a != o.a) return a < o.a;
      if (da != o.da) return da < o.da;
      if (b != o.b) return b < o.b;
      if (db != o.db) return db < o.db;
      return r < o.r;
    }
  };
  static std::map<Key, double> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  Key key{&a, da, &b, db, r};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  // quadrature at unit scale; the scaling exponent is exact for profiles
  // supported inside one period, absent for scale-invariant profiles
  const int npts = 40000;
  double s = 0;
  for (int i = 0; i < npts; ++i) {
    double y = (i + 0.5) / npts;
    s += a.deriv(da, y) * b.deriv(db, y);
  }
  s /= npts;
  double val = s;
  if (!a.scale_invariant()) val *= std::pow(r, -double(da + db));
  cache[key] = val;
  return val;
}

// Canonical signature of a term: frame components of v and per-axis base
// derivative orders, with the phi = -Phi'' relation folded in so algebraically
// cancelling terms share a signature. The residual of an identity is then the
// coefficient sum per signature times the factor norms, which measures the
// cancellation at full floating precision instead of through squared Grams.
struct CanonTerm {
  int comp;              // 0 scalar, 1..3 frame components k1, k, k2
  int o1, o2, o3;        // base-function derivative orders per axis
  double coef;
};

std::vector<CanonTerm> canonicalize(const std::vector<SepTerm>& terms, const SepContext& ctx) {
  const BlockParams& p = *ctx.p;
  Vec3 k1 = ctx.block->frame.k1(), k = ctx.block->frame.k(), k2 = ctx.block->frame.k2();
  ProfileKind kind = ctx.pf->kind;
  std::vector<CanonTerm> out;
  for (const auto& t : terms) {
    // axis-1 (psi role): base order and scale coefficient
    double c1;
    int o1;
    if (kind == ProfileKind::bump) {
      o1 = t.d1 + 1;  // psi = c b'
      c1 = std::pow(p.r_par, -0.5 - t.d1);
    } else if (kind == ProfileKind::single_mode) {
      o1 = t.d1 % 4;  // trig phase class
      c1 = std::pow(2 * M_PI, t.d1);
    } else {
      o1 = t.d1 == 0 ? 0 : -1;  // unit: derivative kills the factor
      c1 = 1.0;
    }
    // axis-2: phi vs Phi folded to bump order (or trig phase)
    double c2;
    int o2;
    if (kind == ProfileKind::bump) {
      if (t.base2 == Axis2Base::phi) {
        o2 = t.d2 + 2;
        c2 = -std::pow(p.r_perp, -0.5 - t.d2);
      } else {
        o2 = t.d2;
        c2 = std::pow(p.r_perp, -0.5 - t.d2);
      }
    } else if (kind == ProfileKind::single_mode) {
      // phi = sqrt2 cos(2 pi y) (2 pi)^d phases; Phi = phi / (2 pi)^2
      o2 = t.d2 % 4;
      c2 = std::pow(2 * M_PI, t.d2) * (t.base2 == Axis2Base::phi_big ? 1.0 / (4 * M_PI * M_PI) : 1.0);
    } else {
      o2 = t.d2 == 0 ? 0 : -1;
      c2 = 1.0;
    }
    // axis-3 (phi_t role)
    double c3;
    int o3;
    if (kind == ProfileKind::bump) {
      o3 = t.d3 + 2;
      c3 = -std::pow(p.r_tperp, -0.5 - t.d3);
    } else if (kind == ProfileKind::single_mode) {
      // phi_t is the constant 1
      o3 = t.d3 == 0 ? 0 : -1;
      c3 = 1.0;
    } else {
      o3 = t.d3 == 0 ? 0 : -1;
      c3 = 1.0;
    }
    if (o1 < 0 || o2 < 0 || o3 < 0) continue;  // factor identically zero
    double base = t.coef * c1 * c2 * c3;
    if (t.scalar) {
      out.push_back({0, o1, o2, o3, base});
    } else {
      double comps[3] = {vdot(t.v, k1), vdot(t.v, k), vdot(t.v, k2)};
      for (int c = 0; c < 3; ++c)
        if (comps[c] != 0.0) out.push_back({c + 1, o1, o2, o3, base * comps[c]});
    }
  }
  return out;
}

// residual of an algebraically vanishing combination: per-signature
// coefficient sums scaled by unit-profile factor norms
double structural_residual(const std::vector<SepTerm>& terms, const SepContext& ctx) {
  auto canon = canonicalize(terms, ctx);
  std::map<std::array<int, 4>, double> sums;
  std::map<std::array<int, 4>, double> scales;
  for (const auto& c : canon) {
    std::array<int, 4> key{c.comp, c.o1, c.o2, c.o3};
    sums[key] += c.coef;
    scales[key] = std::max(scales[key], std::abs(c.coef));
  }
  double acc = 0;
  for (auto& [key, v] : sums) acc += v * v;
  (void)scales;
  return std::sqrt(acc);
}

// scale of the same combination before cancellation
double structural_scale(const std::vector<SepTerm>& terms, const SepContext& ctx) {
  auto canon = canonicalize(terms, ctx);
  double acc = 0;
  for (const auto& c : canon) acc += c.coef * c.coef;
  return std::sqrt(acc);
}

double l2_of_terms(const std::vector<SepTerm>& terms, const SepContext& ctx) {
  double acc = 0;
  const BlockParams& p = *ctx.p;
  for (size_t i = 0; i < terms.size(); ++i)
    for (size_t j = 0; j < terms.size(); ++j) {
      const auto& a = terms[i];
      const auto& b = terms[j];
      double vdotv = (a.scalar && b.scalar) ? 1.0 : vdot(a.v, b.v);
      if (a.scalar != b.scalar) fail_numeric("separable norm: mixing scalar and vector terms");
      if (vdotv == 0.0) continue;
      double g1 = factor_gram(ctx.prof1(), a.d1, ctx.prof1(), b.d1, p.r_par);
      double g2 = factor_gram(ctx.prof2(a.base2), a.d2, ctx.prof2(b.base2), b.d2, p.r_perp);
      double g3 = factor_gram(ctx.prof3(), a.d3, ctx.prof3(), b.d3, p.r_tperp);
      acc += a.coef * b.coef * vdotv * g1 * g2 * g3;
    }
  return std::sqrt(std::max(0.0, acc));
}

std::vector<SepTerm> base_terms(BlockKind kind, const SepContext& ctx) {
  const Block& bl = *ctx.block;
  const BlockParams& p = *ctx.p;
  Vec3 k1 = bl.frame.k1(), k = bl.frame.k(), k2 = bl.frame.k2();
  double pref_c = p.r_perp * p.r_perp / double(p.freq());
  double pref_t = p.r_perp * p.r_perp;
  std::vector<SepTerm> t;
  SepTerm base;
  switch (kind) {
    case BlockKind::W:
      base.v = k1;
      t.push_back(base);
      break;
    case BlockKind::D:
      if (bl.family != Family::velocity) {
        base.v = k2;
        t.push_back(base);
      }
      break;
    case BlockKind::Wc:
      base.coef = pref_c;
      base.base2 = Axis2Base::phi_big;
      base.d2 = 1;
      base.v = k2;
      t.push_back(base);
      break;
    case BlockKind::Wtc:
      base.coef = pref_t;
      base.base2 = Axis2Base::phi_big;
      base.d1 = 1;
      base.d2 = 1;
      base.v = k;
      t.push_back(base);
      break;
    case BlockKind::Dc:
      base.coef = -pref_c;
      base.base2 = Axis2Base::phi_big;
      base.d2 = 1;
      base.v = k1;
      t.push_back(base);
      break;
    case BlockKind::Dtc:
      base.coef = pref_t;
      base.base2 = Axis2Base::phi_big;
      base.d2 = 1;
      base.d3 = 1;
      base.v = k;
      t.push_back(base);
      break;
  }
  return t;
}

}  // namespace

VectorField eval_block(BlockKind kind, const Block& b, const BlockParams& p,
                       const ProfileFunctions& pf, double t, const Grid& g, int dt_order) {
  SepContext ctx{&b, &p, &pf};
  auto terms = base_terms(kind, ctx);
  // time derivatives hit the psi factor: each order adds freq * mu and one
  // derivative along axis 1
  for (int o = 0; o < dt_order; ++o)
    for (auto& tm : terms) {
      tm.coef *= double(p.freq()) * p.mu;
      tm.d1 += 1;
    }
  std::array<std::vector<double>, 3> phys;
  for (auto& c : phys) c.assign(g.size(), 0.0);
  Vec3 k1 = b.frame.k1(), k = b.frame.k(), k2 = b.frame.k2();
  double freq = double(p.freq());
  for (int ix = 0; ix < g.n; ++ix)
    for (int iy = 0; iy < g.n; ++iy)
      for (int iz = 0; iz < g.n; ++iz) {
        Vec3 x{double(ix) / g.n, double(iy) / g.n, double(iz) / g.n};
        double s1 = freq * (vdot(k1, x) + p.mu * t);
        double s2 = freq * vdot(k, x) - b.shift.o1;
        double s3 = freq * vdot(k2, x) - b.shift.o2;
        size_t idx = g.idx(ix, iy, iz);
        for (const auto& term : terms) {
          double val = term.coef * ctx.prof1().scaled(term.d1, s1, p.r_par) *
                       ctx.prof2(term.base2).scaled(term.d2, s2, p.r_perp) *
                       ctx.prof3().scaled(term.d3, s3, p.r_tperp);
          for (int c = 0; c < 3; ++c) phys[c][idx] += val * term.v[c];
        }
      }
  return forward_transform(g, phys);
}

DivIdentityReport verify_div_identities(const Block& b, const BlockParams& p,
                                        const ProfileFunctions& pf) {
  SepContext ctx{&b, &p, &pf};
  DivIdentityReport rep;
  double freq = double(p.freq());

  auto concat = [](std::vector<SepTerm> a, const std::vector<SepTerm>& bb) {
    a.insert(a.end(), bb.begin(), bb.end());
    return a;
  };
  auto negate = [](std::vector<SepTerm> a) {
    for (auto& t : a) t.coef = -t.coef;
    return a;
  };

  (void)freq;
  {
    auto w = base_terms(BlockKind::W, ctx);
    auto wtc = base_terms(BlockKind::Wtc, ctx);
    auto wc = base_terms(BlockKind::Wc, ctx);
    auto sum = concat(w, wtc);
    auto dv = divergence_terms(sum, ctx);
    rep.div_w_rel = structural_residual(dv, ctx) / structural_scale(dv, ctx);
    auto diff = concat(sum, negate(curl_terms(wc, ctx)));
    rep.curl_w_rel = structural_residual(diff, ctx) / structural_scale(diff, ctx);
  }
  if (b.family != Family::velocity) {
    auto d = base_terms(BlockKind::D, ctx);
    auto dtc = base_terms(BlockKind::Dtc, ctx);
    auto dc = base_terms(BlockKind::Dc, ctx);
    auto sum = concat(d, dtc);
    auto dv = divergence_terms(sum, ctx);
    rep.div_d_rel = structural_residual(dv, ctx) / structural_scale(dv, ctx);
    auto diff = concat(sum, negate(curl_terms(dc, ctx)));
    rep.curl_d_rel = structural_residual(diff, ctx) / structural_scale(diff, ctx);
  }
  return rep;
}

std::vector<IntermittencyRow> measure_intermittency(BlockKind kind,
                                                    const std::vector<double>& lambdas,
                                                    double epsilon,
                                                    const std::vector<double>& ps, int n_lambda,
                                                    const ProfileFunctions& pf) {
  std::vector<IntermittencyRow> rows;
  DirectionSets sets = load_direction_sets();
  Block bl;
  bl.frame = sets.magnetic.frames[0];
  bl.family = Family::magnetic;

  for (double lambda : lambdas) {
    BlockParams p = params_from_lambda(lambda, epsilon, n_lambda, pf.kind);
    SepContext ctx{&bl, &p, &pf};
    auto base = base_terms(kind, ctx);
    double freq = double(p.freq());

    for (int N = 0; N <= 1; ++N)
      for (int M = 0; M <= 1; ++M)
        for (double pp : ps) {
          // expand d_t^M grad^N of the base terms; d_t adds freq*mu and a psi
          // derivative, grad adds freq and one derivative along each axis
          struct NTerm {
            double coef;
            int d1, d2, d3;
            Axis2Base base2;
          };
          std::vector<NTerm> work;
          for (const auto& t : base)
            work.push_back({t.coef, t.d1, t.d2, t.d3, t.base2});
          for (int m = 0; m < M; ++m)
            for (auto& t : work) {
              t.coef *= freq * p.mu;
              t.d1 += 1;
            }
          std::vector<NTerm> expanded;
          if (N == 0) {
            expanded = work;
          } else {
            for (const auto& t : work)
              for (int axis = 1; axis <= 3; ++axis) {
                NTerm n = t;
                n.coef *= freq;
                if (axis == 1) n.d1++;
                if (axis == 2) n.d2++;
                if (axis == 3) n.d3++;
                expanded.push_back(n);
              }
          }
          // factorized term norms; exact for p = 2 (orthogonal directions),
          // dominant-term lower bound otherwise
          double measured = 0;
          double sum_sq = 0;
          for (const auto& t : expanded) {
            double n1 = ctx.prof1().lp_norm_scaled(t.d1, pp, p.r_par);
            double n2 = ctx.prof2(t.base2).lp_norm_scaled(t.d2, pp, p.r_perp);
            double n3 = ctx.prof3().lp_norm_scaled(t.d3, pp, p.r_tperp);
            double tn = std::abs(t.coef) * n1 * n2 * n3;
            measured = std::max(measured, tn);
            sum_sq += tn * tn;
          }
          if (pp == 2.0) measured = std::sqrt(sum_sq);

          IntermittencyRow r;
          r.N = N;
          r.M = M;
          r.p = pp;
          r.lambda = lambda;
          r.measured = measured;
          double invp = pp == kInf ? 0.0 : 1.0 / pp;
          r.predicted = std::pow(double(p.sigma), N) * std::pow(p.r_perp, -N) *
                        std::pow(double(p.sigma) * p.mu / p.r_par, M) *
                        std::pow(p.r_par * p.r_perp * p.r_tperp, invp - 0.5);
          rows.push_back(r);
        }
  }
  return rows;
}

std::vector<ExponentFit> fit_intermittency_exponents(const std::vector<IntermittencyRow>& rows) {
  std::vector<ExponentFit> out;
  std::map<std::tuple<int, int, double>, std::vector<const IntermittencyRow*>> groups;
  for (const auto& r : rows) groups[{r.N, r.M, r.p}].push_back(&r);
  for (auto& [key, grp] : groups) {
    if (grp.size() < 2) continue;
    std::vector<double> ls, ms, preds;
    for (const auto* r : grp) {
      ls.push_back(r->lambda);
      ms.push_back(r->measured);
      preds.push_back(r->predicted);
    }
    ExponentFit f;
    f.N = std::get<0>(key);
    f.M = std::get<1>(key);
    f.p = std::get<2>(key);
    f.measured_slope = loglog_fit(ls, ms).slope;
    f.predicted_slope = loglog_fit(ls, preds).slope;
    out.push_back(f);
  }
  return out;
}

// --- disjoint supports ----------------------------------------------------------

namespace {

using IVec = std::array<long, 3>;

IVec form_of(const Frame& f, bool second, long freq) {
  const auto& num = second ? f.k2_num : f.k_num;
  // freq * k = (sigma n_lambda / den) * num, integral when den | n_lambda
  if (freq % f.den != 0) fail_invariant("block form: N_Lambda does not clear the denominator");
  long m = freq / f.den;
  return {num[0] * m, num[1] * m, num[2] * m};
}

// integer kernel of the 4x3 matrix rows via exact fraction-free elimination;
// returns basis vectors of the relation lattice (rank 1 or 2 expected)
std::vector<std::array<long, 4>> integer_kernel(const std::array<IVec, 4>& rows) {
  // work over rationals encoded as doubles is unsafe; use exact long arithmetic
  // by eliminating with cross-multiplication on a 4x3 system transposed:
  // find c with sum_i c_i rows[i] = 0
  // Solve via minors when rank = 3, plus parallel-pair relations.
  std::vector<std::array<long, 4>> basis;

  auto cross_minor = [&](int drop) {
    // determinant of the 3x3 matrix formed by the other three rows
    std::array<IVec, 3> m;
    int q = 0;
    for (int i = 0; i < 4; ++i)
      if (i != drop) m[q++] = rows[i];
    long det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    return det;
  };

  // parallel-pair relations first (a rows[i] + b rows[j] = 0 with small a, b)
  auto parallel_rel = [&](int i, int j) -> std::optional<std::array<long, 2>> {
    // find integers a, b != 0 with a rows[i] = -b rows[j]
    const IVec& a = rows[i];
    const IVec& b = rows[j];
    long na = std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]);
    long nb = std::abs(b[0]) + std::abs(b[1]) + std::abs(b[2]);
    if (na == 0 || nb == 0) return std::nullopt;
    // cross product zero <=> parallel
    long cx = a[1] * b[2] - a[2] * b[1];
    long cy = a[2] * b[0] - a[0] * b[2];
    long cz = a[0] * b[1] - a[1] * b[0];
    if (cx || cy || cz) return std::nullopt;
    // pick a nonzero coordinate to read off the ratio a_k / b_k = -beta/alpha
    for (int q = 0; q < 3; ++q)
      if (b[q] != 0) {
        long alpha = b[q], beta = -a[q];
        long g = std::__gcd(std::abs(alpha), std::abs(beta));
        if (g > 0) {
          alpha /= g;
          beta /= g;
        }
        return std::array<long, 2>{alpha, beta};
      }
    return std::nullopt;
  };

  std::array<bool, 4> used{};
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      if (used[i] || used[j]) continue;
      if (auto rel = parallel_rel(i, j)) {
        std::array<long, 4> c{};
        c[i] = (*rel)[0];
        c[j] = (*rel)[1];
        basis.push_back(c);
        used[i] = used[j] = true;
      }
    }
  if (!basis.empty()) return basis;

  // generic rank-3: single relation from signed minors, gcd-reduced
  std::array<long, 4> c{};
  bool nonzero = false;
  for (int i = 0; i < 4; ++i) {
    long d = cross_minor(i);
    c[i] = (i % 2 == 0 ? d : -d);
    nonzero = nonzero || d != 0;
  }
  if (nonzero) {
    long g = 0;
    for (long v : c) g = std::__gcd(g, std::abs(v));
    if (g > 1)
      for (long& v : c) v /= g;
    basis.push_back(c);
  }
  return basis;
}

struct ArcInterval {
  double lo = 0, hi = 0;  // interval on the real line (width < 1 assumed)
};

// signed distance of the interval [lo, hi] from the integer lattice: negative
// (penetration depth) when an integer lies inside, else the gap to the
// nearest integer
double distance_to_integers(double lo, double hi) {
  if (hi - lo >= 1.0) return -0.5;
  double m = std::floor(hi);
  if (m >= lo) return -std::min(hi - m, m - lo);
  return std::min(lo - m, m + 1.0 - hi);
}

}  // namespace

std::optional<bool> supports_disjoint(const Block& a, const Block& b, const BlockParams& p) {
  long freq = p.freq();
  std::array<IVec, 4> rows = {form_of(a.frame, false, freq), form_of(a.frame, true, freq),
                              form_of(b.frame, false, freq), form_of(b.frame, true, freq)};
  auto basis = integer_kernel(rows);
  if (basis.empty()) return false;  // forms independent: every box is hit

  // slab intervals in the four thetas: theta_i = L_i . x mod 1, constrained to
  // offset + [3 r / 8, 5 r / 8] with r per axis
  std::array<ArcInterval, 4> box;
  auto slab = [&](const BlockShift& s, bool second) {
    double off = second ? s.o2 : s.o1;
    double r = second ? p.r_tperp : p.r_perp;
    if (p.profiles != ProfileKind::bump) {
      // full support: disjointness undecidable by slabs
      return ArcInterval{off, off + 1.0};
    }
    return ArcInterval{off + 3.0 * r / 8.0, off + 5.0 * r / 8.0};
  };
  box[0] = slab(a.shift, false);
  box[1] = slab(a.shift, true);
  box[2] = slab(b.shift, false);
  box[3] = slab(b.shift, true);

  // overlap is possible iff every relation interval contains an integer;
  // for that to be exact the relations must touch disjoint variable sets
  std::array<int, 4> touched{};
  for (const auto& c : basis)
    for (int i = 0; i < 4; ++i)
      if (c[i] != 0) touched[i]++;
  for (int i = 0; i < 4; ++i)
    if (touched[i] > 1) return std::nullopt;

  for (const auto& c : basis) {
    double lo = 0, hi = 0;
    for (int i = 0; i < 4; ++i) {
      if (c[i] == 0) continue;
      double w = double(c[i]);
      if (w > 0) {
        lo += w * box[i].lo;
        hi += w * box[i].hi;
      } else {
        lo += w * box[i].hi;
        hi += w * box[i].lo;
      }
    }
    if (distance_to_integers(lo, hi) > 0) return true;  // this relation separates
  }
  return false;
}

ShiftPlan choose_shifts(const std::vector<Block>& blocks, const BlockParams& p) {
  ShiftPlan plan;
  plan.shifts.assign(blocks.size(), BlockShift{});
  if (p.profiles != ProfileKind::bump) {
    plan.margin = -1.0;  // full-support profiles cannot be separated
    return plan;
  }
  long freq = p.freq();

  // pairwise margin of the current assignment between block i and j
  auto pair_margin = [&](const Block& a, const BlockShift& sa, const Block& b,
                         const BlockShift& sb) {
    std::array<IVec, 4> rows = {form_of(a.frame, false, freq), form_of(a.frame, true, freq),
                                form_of(b.frame, false, freq), form_of(b.frame, true, freq)};
    auto basis = integer_kernel(rows);
    if (basis.empty()) return -1.0;
    std::array<ArcInterval, 4> box;
    auto slab = [&](const BlockShift& s, bool second) {
      double off = second ? s.o2 : s.o1;
      double r = second ? p.r_tperp : p.r_perp;
      return ArcInterval{off + 3.0 * r / 8.0, off + 5.0 * r / 8.0};
    };
    box[0] = slab(sa, false);
    box[1] = slab(sa, true);
    box[2] = slab(sb, false);
    box[3] = slab(sb, true);
    std::array<int, 4> touched{};
    for (const auto& c : basis)
      for (int i = 0; i < 4; ++i)
        if (c[i] != 0) touched[i]++;
    for (int i = 0; i < 4; ++i)
      if (touched[i] > 1) return -1.0;
    double best = -1e9;
    for (const auto& c : basis) {
      double lo = 0, hi = 0;
      for (int i = 0; i < 4; ++i) {
        if (c[i] == 0) continue;
        double w = double(c[i]);
        if (w > 0) {
          lo += w * box[i].lo;
          hi += w * box[i].hi;
        } else {
          lo += w * box[i].hi;
          hi += w * box[i].lo;
        }
      }
      best = std::max(best, distance_to_integers(lo, hi));
    }
    return best;  // positive margin from the best separating relation
  };

  const int lattice = 64;
  for (size_t bi = 1; bi < blocks.size(); ++bi) {
    double best = -1e9;
    BlockShift best_shift;
    for (int i1 = 0; i1 < lattice; ++i1)
      for (int i2 = 0; i2 < lattice; ++i2) {
        BlockShift cand{double(i1) / lattice, double(i2) / lattice};
        double m = 1e9;
        for (size_t bj = 0; bj < bi; ++bj)
          m = std::min(m, pair_margin(blocks[bi], cand, blocks[bj], plan.shifts[bj]));
        if (m > best) {
          best = m;
          best_shift = cand;
        }
      }
    plan.shifts[bi] = best_shift;
  }
  plan.margin = 1e9;
  for (size_t i = 0; i < blocks.size(); ++i)
    for (size_t j = i + 1; j < blocks.size(); ++j)
      plan.margin =
          std::min(plan.margin, pair_margin(blocks[i], plan.shifts[i], blocks[j], plan.shifts[j]));
  return plan;
}

InverseTimeDerivative::InverseTimeDerivative(const Profile1D& psi, const BlockParams& p)
    : G_(psi, p.r_par), freq_mu_(double(p.freq()) * p.mu), freq_(p.freq()) {}

double InverseTimeDerivative::value(double t, double s) const {
  return (G_(s + freq_mu_ * t) - G_(s)) / freq_mu_;
}

double InverseTimeDerivative::sup_abs() const {
  // sup over t, s of |G(s + freq mu t) - G(s)| / (freq mu) = 2 sup|G| / (freq mu)
  // measured on a dense sample
  double m = 0;
  const int ns = 2048, nt = 64;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) {
      double s = double(i) / ns;
      double t = double(j) / (nt * freq_mu_);
      m = std::max(m, std::abs(value(t, s)));
    }
  return m;
}

double InverseTimeDerivative::bound() const { return 2.0 * G_.sup_abs() / freq_mu_; }

double InverseTimeDerivative::space_time_mean(int nt, int ns) const {
  double acc = 0;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) {
      double s = (i + 0.5) / ns;
      double t = (j + 0.5) / (nt * freq_mu_);
      acc += value(t, s);
    }
  return acc / (double(ns) * nt);
}

}  // namespace lmhd
