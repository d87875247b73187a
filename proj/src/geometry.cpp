#include "lmhd/geometry.hpp"

#include <cmath>
#include <sstream>

namespace lmhd {

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[3 * i + j] = a[i] * b[j];
  return m;
}

// dense Gaussian elimination with partial pivoting
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < 1e-14) fail_numeric("geometry: singular frame system");
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = a[r * n + col] / a[col * n + col];
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
    x[r] = s / a[r * n + r];
  }
  return x;
}

// sym3 packing (xx, yy, zz, xy, yz, xz) with radical-2 weights so the packed
// euclidean norm equals the Frobenius norm
std::array<double, 6> pack_sym(const Mat3& m) {
  const double r2 = std::sqrt(2.0);
  return {m[0], m[4], m[8], r2 * 0.5 * (m[1] + m[3]), r2 * 0.5 * (m[5] + m[7]),
          r2 * 0.5 * (m[2] + m[6])};
}

Vec3 axial(const Mat3& a) {
  // skew matrix with A x = w cross x: w = (A_{21}, A_{02}, A_{10})
  return {a[7], a[2], a[3]};
}

long ldot(const std::array<long, 3>& a, const std::array<long, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace

void DirectionSet::validate() const {
  if (frames.empty()) fail_invariant("direction set: empty");
  for (const auto& f : frames) {
    if (f.den <= 0) fail_invariant("direction set: nonpositive denominator");
    long d2 = f.den * f.den;
    if (ldot(f.k_num, f.k_num) != d2 || ldot(f.k1_num, f.k1_num) != d2 ||
        ldot(f.k2_num, f.k2_num) != d2)
      fail_invariant("direction set: frame vector not on the rational unit sphere");
    if (ldot(f.k_num, f.k1_num) != 0 || ldot(f.k_num, f.k2_num) != 0 ||
        ldot(f.k1_num, f.k2_num) != 0)
      fail_invariant("direction set: frame not orthogonal");
    // right-handedness: k x k1 = k2 exactly (numerators scale by den)
    long cx = f.k_num[1] * f.k1_num[2] - f.k_num[2] * f.k1_num[1];
    long cy = f.k_num[2] * f.k1_num[0] - f.k_num[0] * f.k1_num[2];
    long cz = f.k_num[0] * f.k1_num[1] - f.k_num[1] * f.k1_num[0];
    if (cx != f.k2_num[0] * f.den || cy != f.k2_num[1] * f.den || cz != f.k2_num[2] * f.den)
      fail_invariant("direction set: frame not right-handed (k x k1 != k2)");
    if (n_lambda % f.den != 0)
      fail_invariant("direction set: N_Lambda does not clear the denominator");
  }
  for (size_t i = 0; i < frames.size(); ++i)
    for (size_t j = i + 1; j < frames.size(); ++j)
      if (frames[i].k_num == frames[j].k_num && frames[i].den == frames[j].den)
        fail_invariant("direction set: duplicate direction");
  if (family == Family::helicity && frames.size() != 1)
    fail_invariant("helicity set must have exactly one direction");
}

DirectionSets load_direction_sets() {
  DirectionSets out;
  out.n_lambda = 65;

  auto F = [](std::array<long, 3> k, std::array<long, 3> k1, std::array<long, 3> k2, long den) {
    Frame f;
    f.k_num = k;
    f.k1_num = k1;
    f.k2_num = k2;
    f.den = den;
    return f;
  };

  // velocity family: the six k1 directions {(3,+-4,0), (0,3,+-4), (+-4,0,3)}/5
  // tile the symmetric matrices with Id = (1/2) sum k1 (x) k1
  out.velocity.family = Family::velocity;
  out.velocity.n_lambda = out.n_lambda;
  out.velocity.frames = {
      F({4, -3, 0}, {3, 4, 0}, {0, 0, 5}, 5),
      F({4, 3, 0}, {3, -4, 0}, {0, 0, -5}, 5),
      F({0, 4, -3}, {0, 3, 4}, {5, 0, 0}, 5),
      F({0, 4, 3}, {0, 3, -4}, {-5, 0, 0}, 5),
      F({-3, 0, 4}, {4, 0, 3}, {0, 5, 0}, 5),
      F({3, 0, 4}, {-4, 0, 3}, {0, -5, 0}, 5),
  };

  // magnetic family: axial vectors +-(3,4,0)/5, +-(0,3,4)/5, +-(4,0,3)/5
  // positively span R^3
  out.magnetic.family = Family::magnetic;
  out.magnetic.n_lambda = out.n_lambda;
  out.magnetic.frames = {
      F({3, 4, 0}, {-4, 3, 0}, {0, 0, 5}, 5),
      F({-3, -4, 0}, {-4, 3, 0}, {0, 0, -5}, 5),
      F({0, 3, 4}, {0, -4, 3}, {5, 0, 0}, 5),
      F({0, -3, -4}, {0, -4, 3}, {-5, 0, 0}, 5),
      F({4, 0, 3}, {3, 0, -4}, {0, 5, 0}, 5),
      F({-4, 0, -3}, {3, 0, -4}, {0, -5, 0}, 5),
  };

  out.helicity.family = Family::helicity;
  out.helicity.n_lambda = out.n_lambda;
  out.helicity.frames = {F({0, 0, 1}, {1, 0, 0}, {0, 1, 0}, 1)};

  out.velocity.validate();
  out.magnetic.validate();
  out.helicity.validate();

  // pairwise disjoint direction labels across the three families
  auto key = [](const Frame& f) {
    return std::array<double, 3>{double(f.k_num[0]) / f.den, double(f.k_num[1]) / f.den,
                                 double(f.k_num[2]) / f.den};
  };
  std::vector<std::array<double, 3>> all;
  for (const auto* s : {&out.velocity, &out.magnetic, &out.helicity})
    for (const auto& f : s->frames) all.push_back(key(f));
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j)
      if (all[i] == all[j]) fail_invariant("direction families are not disjoint");

  return out;
}

DirectionSet parse_direction_set(Family family, const std::string& text, int n_lambda) {
  DirectionSet s;
  s.family = family;
  s.n_lambda = n_lambda;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Frame f;
    long vals[10];
    for (int i = 0; i < 10; ++i)
      if (!(ls >> vals[i])) fail_config("direction set: expected 10 integers per line");
    f.k_num = {vals[0], vals[1], vals[2]};
    f.k1_num = {vals[3], vals[4], vals[5]};
    f.k2_num = {vals[6], vals[7], vals[8]};
    f.den = vals[9];
    s.frames.push_back(f);
  }
  s.validate();
  return s;
}

std::string format_direction_set(const DirectionSet& s) {
  std::ostringstream os;
  os << "# kx ky kz k1x k1y k1z k2x k2y k2z den\n";
  for (const auto& f : s.frames) {
    os << f.k_num[0] << ' ' << f.k_num[1] << ' ' << f.k_num[2] << ' ' << f.k1_num[0] << ' '
       << f.k1_num[1] << ' ' << f.k1_num[2] << ' ' << f.k2_num[0] << ' ' << f.k2_num[1] << ' '
       << f.k2_num[2] << ' ' << f.den << '\n';
  }
  return os.str();
}

Mat3 reconstruct_symmetric(const std::vector<double>& w, const DirectionSet& set) {
  Mat3 m{};
  for (size_t i = 0; i < set.frames.size(); ++i) {
    Mat3 o = outer(set.frames[i].k1(), set.frames[i].k1());
    for (int j = 0; j < 9; ++j) m[j] += w[i] * o[j];
  }
  return m;
}

Mat3 reconstruct_skew(const std::vector<double>& w, const DirectionSet& set) {
  Mat3 m{};
  for (size_t i = 0; i < set.frames.size(); ++i) {
    Mat3 a = outer(set.frames[i].k2(), set.frames[i].k1());
    Mat3 b = outer(set.frames[i].k1(), set.frames[i].k2());
    for (int j = 0; j < 9; ++j) m[j] += w[i] * (a[j] - b[j]);
  }
  return m;
}

std::vector<double> symmetric_weights(const Mat3& S, const DirectionSet& set) {
  size_t n = set.frames.size();
  if (n != 6) fail_config("symmetric decomposition expects 6 frames");
  std::vector<double> M(36);
  for (size_t i = 0; i < n; ++i) {
    auto col = pack_sym(outer(set.frames[i].k1(), set.frames[i].k1()));
    for (int r = 0; r < 6; ++r) M[r * 6 + i] = col[r];
  }
  auto rhs = pack_sym(S);
  return solve_dense(M, std::vector<double>(rhs.begin(), rhs.end()), 6);
}

std::vector<double> skew_weights(const Mat3& A, const DirectionSet& set) {
  size_t n = set.frames.size();
  if (n % 2 != 0) fail_config("skew decomposition expects paired directions");
  // axial form: w(A) = sum gamma^2 k. For the shipped +-paired set solve the
  // 3x3 system for the signed differences and spread around a fixed offset,
  // the minimum-norm interior right inverse (affine in A, hence smooth).
  Vec3 w = axial(A);
  size_t half = n / 2;
  std::vector<double> base(half * 3);
  for (size_t i = 0; i < half; ++i) {
    Vec3 k = set.frames[2 * i].k();
    for (int r = 0; r < 3; ++r) base[r * half + i] = k[r];
  }
  if (half != 3) fail_config("skew decomposition expects exactly 3 +- pairs");
  std::vector<double> m = solve_dense(base, {w[0], w[1], w[2]}, 3);
  // offset chosen so positivity holds on a comfortable ball around zero
  const double offset = 0.25;
  std::vector<double> out(n);
  for (size_t i = 0; i < half; ++i) {
    out[2 * i] = offset + 0.5 * m[i];
    out[2 * i + 1] = offset - 0.5 * m[i];
  }
  return out;
}

namespace {

GammaDecomposition finish(Family fam, std::vector<double> w, const DirectionSet& set, bool skew,
                          const Mat3& target, double radius) {
  GammaDecomposition d;
  d.family = fam;
  d.weights = std::move(w);
  d.radius = radius;
  for (double v : d.weights)
    if (v <= 0.0) {
      std::string which = skew ? "skew" : "symmetric";
      fail_invariant(which + " decomposition: matrix outside the validated radius");
    }
  Mat3 rec = skew ? reconstruct_skew(d.weights, set) : reconstruct_symmetric(d.weights, set);
  double num = 0;
  for (int i = 0; i < 9; ++i) num += (rec[i] - target[i]) * (rec[i] - target[i]);
  d.residual = std::sqrt(num);
  return d;
}

}  // namespace

GammaDecomposition decompose_symmetric(const Mat3& S, const DirectionSet& set) {
  // symmetry check
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(S[3 * i + j] - S[3 * j + i]) > 1e-12 * (1 + frobenius(S)))
        fail_invariant("decompose_symmetric: input not symmetric");
  Mat3 dev = S;
  dev[0] -= 1.0;
  dev[4] -= 1.0;
  dev[8] -= 1.0;
  return finish(set.family, symmetric_weights(S, set), set, false, S, frobenius(dev));
}

GammaDecomposition decompose_skew(const Mat3& A, const DirectionSet& set) {
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      if (std::abs(A[3 * i + j] + A[3 * j + i]) > 1e-12 * (1 + frobenius(A)))
        fail_invariant("decompose_skew: input not skew");
  return finish(set.family, skew_weights(A, set), set, true, A, frobenius(A));
}

GeometryCalibration calibrate_radii_and_Mstar(const DirectionSets& sets, int samples,
                                              uint64_t seed) {
  Rng rng(seed);
  GeometryCalibration cal;

  // random unit-Frobenius symmetric deviations around Id
  auto sym_dir = [&]() {
    Mat3 d{};
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double v = rng.normal();
        d[3 * i + j] = v;
        d[3 * j + i] = v;
      }
    double n = frobenius(d);
    for (auto& v : d) v /= n;
    return d;
  };
  auto skew_dir = [&]() {
    Mat3 d{};
    d[1] = rng.normal();
    d[2] = rng.normal();
    d[5] = rng.normal();
    d[3] = -d[1];
    d[6] = -d[2];
    d[7] = -d[5];
    double n = frobenius(d);
    for (auto& v : d) v /= n;
    return d;
  };

  auto min_weight_sym = [&](const Mat3& dir, double r) {
    Mat3 s = dir;
    for (auto& v : s) v *= r;
    s[0] += 1.0;
    s[4] += 1.0;
    s[8] += 1.0;
    auto w = symmetric_weights(s, sets.velocity);
    double m = 1e300;
    for (double v : w) m = std::min(m, v);
    return m;
  };
  auto min_weight_skew = [&](const Mat3& dir, double r) {
    Mat3 a = dir;
    for (auto& v : a) v *= r;
    auto w = skew_weights(a, sets.magnetic);
    double m = 1e300;
    for (double v : w) m = std::min(m, v);
    return m;
  };

  std::vector<Mat3> sdirs, adirs;
  for (int i = 0; i < samples; ++i) {
    sdirs.push_back(sym_dir());
    adirs.push_back(skew_dir());
  }

  // The weight maps are affine, so for every direction the critical radius is
  // found by bisection, and the worst directions are the per-weight dual
  // maximizers; including them makes the sampled minimum exact.
  auto unpack_sym = [](const std::array<double, 6>& p) {
    const double r2 = std::sqrt(2.0);
    Mat3 m{};
    m[0] = p[0];
    m[4] = p[1];
    m[8] = p[2];
    m[1] = m[3] = p[3] / r2;
    m[5] = m[7] = p[4] / r2;
    m[2] = m[6] = p[5] / r2;
    return m;
  };
  {
    // adversarial symmetric directions: rows of M^{-1} pulled back to matrices
    std::vector<double> M(36);
    for (int i = 0; i < 6; ++i) {
      auto col = pack_sym(outer(sets.velocity.frames[i].k1(), sets.velocity.frames[i].k1()));
      for (int r = 0; r < 6; ++r) M[r * 6 + i] = col[r];
    }
    std::vector<double> Mt(36);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) Mt[r * 6 + c] = M[c * 6 + r];
    for (int i = 0; i < 6; ++i) {
      std::vector<double> e(6, 0.0);
      e[i] = 1.0;
      auto row = solve_dense(Mt, e, 6);  // M^{-T} e_i = i-th row of M^{-1}
      double n = 0;
      for (double v : row) n += v * v;
      n = std::sqrt(n);
      std::array<double, 6> p{};
      for (int q = 0; q < 6; ++q) p[q] = -row[q] / n;
      sdirs.push_back(unpack_sym(p));
    }
  }
  {
    // adversarial skew directions: axial vectors along rows of C^{-1}
    std::vector<double> base(9);
    for (int i = 0; i < 3; ++i) {
      Vec3 k = sets.magnetic.frames[2 * i].k();
      for (int r = 0; r < 3; ++r) base[r * 3 + i] = k[r];
    }
    std::vector<double> baseT(9);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) baseT[r * 3 + c] = base[c * 3 + r];
    for (int i = 0; i < 3; ++i)
      for (double sgn : {1.0, -1.0}) {
        std::vector<double> e(3, 0.0);
        e[i] = sgn;
        auto w = solve_dense(baseT, e, 3);
        Mat3 a{};
        // skew matrix with axial vector w: A x = w cross x
        a[1] = -w[2];
        a[2] = w[1];
        a[3] = w[2];
        a[5] = -w[0];
        a[6] = -w[1];
        a[7] = w[0];
        double n = frobenius(a);
        for (auto& v : a) v /= n;
        adirs.push_back(a);
      }
  }

  auto critical_radius = [&](auto&& minw, const Mat3& d) {
    double lo = 0.0, hi = 8.0;
    for (int it = 0; it < 52; ++it) {
      double mid = 0.5 * (lo + hi);
      (minw(d, mid) > 0 ? lo : hi) = mid;
    }
    return lo;
  };
  auto min_radius = [&](auto&& minw, const std::vector<Mat3>& dirs) {
    double m = 1e300;
    for (const auto& d : dirs) m = std::min(m, critical_radius(minw, d));
    return m;
  };

  cal.eps_u = min_radius(min_weight_sym, sdirs);
  cal.eps_B = min_radius(min_weight_skew, adirs);

  // the last entries of sdirs / adirs are the per-weight adversarial
  // directions; the C4 sup estimator probes them explicitly
  std::vector<Mat3> sym_adv(sdirs.end() - 6, sdirs.end());
  std::vector<Mat3> skew_adv(adirs.end() - 6, adirs.end());

  // M_star: sampled sup of sum_k ||gamma_k||_{C^4} inside the half-radius
  // balls, via 4th-order central finite differences of gamma = sqrt(weight)
  // along random matrix directions.
  auto c4_sum = [&](bool skew) {
    const DirectionSet& set = skew ? sets.magnetic : sets.velocity;
    double radius = 0.5 * (skew ? cal.eps_B : cal.eps_u);
    double total = 0;
    size_t nf = set.frames.size();
    std::vector<double> per_frame(nf, 0.0);
    const auto& adv = skew ? skew_adv : sym_adv;
    int pts = std::min(samples, 64);
    int targeted = int(adv.size()) * 4;
    for (int p = 0; p < pts + targeted; ++p) {
      Mat3 base, dir;
      if (p < targeted) {
        // extreme pairs: walk toward the weight-vanishing boundary along the
        // adversarial direction and differentiate along it
        dir = adv[p / 4];
        base = dir;
        double frac = 0.25 * (1 + p % 4);
        for (auto& v : base) v *= frac * radius;
      } else {
        base = skew ? adirs[p % adirs.size()] : sdirs[p % sdirs.size()];
        for (auto& v : base) v *= rng.uniform(0.0, radius);
        dir = skew ? skew_dir() : sym_dir();
      }
      double h = radius / 16.0;
      // gamma values on the 9-point stencil along dir
      std::array<std::vector<double>, 9> g;
      for (int s = -4; s <= 4; ++s) {
        Mat3 m = base;
        for (int q = 0; q < 9; ++q) m[q] += s * h * dir[q];
        std::vector<double> w;
        if (skew) {
          w = skew_weights(m, set);
        } else {
          Mat3 sm = m;
          sm[0] += 1.0;
          sm[4] += 1.0;
          sm[8] += 1.0;
          w = symmetric_weights(sm, set);
        }
        g[s + 4].resize(nf);
        for (size_t i = 0; i < nf; ++i) {
          if (w[i] <= 0) fail_numeric("calibration: negative weight inside half radius");
          g[s + 4][i] = std::sqrt(w[i]);
        }
      }
      for (size_t i = 0; i < nf; ++i) {
        auto v = [&](int s) { return g[s + 4][i]; };
        double d0 = std::abs(v(0));
        double d1 = std::abs((-v(2) + 8 * v(1) - 8 * v(-1) + v(-2)) / (12 * h));
        double d2 = std::abs((-v(2) + 16 * v(1) - 30 * v(0) + 16 * v(-1) - v(-2)) / (12 * h * h));
        double d3 = std::abs((v(2) - 2 * v(1) + 2 * v(-1) - v(-2)) / (2 * h * h * h));
        double d4 = std::abs((v(2) - 4 * v(1) + 6 * v(0) - 4 * v(-1) + v(-2)) / (h * h * h * h));
        per_frame[i] = std::max(per_frame[i], d0 + d1 + d2 + d3 + d4);
      }
    }
    for (double v : per_frame) total += v;
    return total;
  };

  cal.M_star = c4_sum(false) + c4_sum(true);
  return cal;
}

}  // namespace lmhd
