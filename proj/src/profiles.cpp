#include "lmhd/profiles.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace lmhd {

namespace {

constexpr double kSupLo = 3.0 / 8.0;
constexpr double kSupHi = 5.0 / 8.0;

// order-5 jet (value + 4 derivatives) arithmetic for exact bump derivatives
struct Jet {
  std::array<double, 5> d{};  // d[j] = j-th derivative
};

Jet jmul(const Jet& a, const Jet& b) {
  Jet r;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; i + j < 5; ++j) {
      // Leibniz with binomial weights
      static const double binom[5][5] = {{1, 0, 0, 0, 0},
                                         {1, 1, 0, 0, 0},
                                         {1, 2, 1, 0, 0},
                                         {1, 3, 3, 1, 0},
                                         {1, 4, 6, 4, 1}};
      r.d[i + j] += binom[i + j][i] * a.d[i] * b.d[j];
    }
  return r;
}

Jet jrecip(const Jet& a) {
  // r = 1/a via r0 = 1/a0 and the recurrence from (a r)' = 0
  Jet r{};
  r.d[0] = 1.0 / a.d[0];
  for (int n = 1; n < 5; ++n) {
    static const double binom[5][5] = {{1, 0, 0, 0, 0},
                                       {1, 1, 0, 0, 0},
                                       {1, 2, 1, 0, 0},
                                       {1, 3, 3, 1, 0},
                                       {1, 4, 6, 4, 1}};
    double s = 0;
    for (int k = 1; k <= n; ++k) s += binom[n][k] * a.d[k] * r.d[n - k];
    r.d[n] = -s / a.d[0];
  }
  return r;
}

Jet jexp(const Jet& a) {
  // e = exp(a): e' = a' e, differentiate repeatedly
  Jet e{};
  e.d[0] = std::exp(a.d[0]);
  // e^{(n)} = sum_{k=0}^{n-1} C(n-1,k) a^{(n-k)} e^{(k)}
  static const double binom[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
  for (int n = 1; n < 5; ++n) {
    double s = 0;
    for (int k = 0; k < n; ++k) s += binom[n - 1][k] * a.d[n - k] * e.d[k];
    e.d[n] = s;
  }
  return e;
}

// bump(y) = exp(-1 / ((y - lo)(hi - y))) on (lo, hi), zero outside
Jet bump_jet(double y) {
  Jet g{};
  g.d[0] = (y - kSupLo) * (kSupHi - y);
  g.d[1] = kSupLo + kSupHi - 2 * y;
  g.d[2] = -2.0;
  Jet f = jrecip(g);
  for (auto& v : f.d) v = -v;
  return jexp(f);
}

double bump_deriv(int j, double y) {
  if (y <= kSupLo || y >= kSupHi) return 0.0;
  return bump_jet(y).d[j];
}

// cached quadrature of |d^j bump-derived|^p over the support
struct QuadKey {
  int base_order;  // bump derivative order of the underlying function
  int j;
  double p;
  bool operator<(const QuadKey& o) const {
    if (base_order != o.base_order) return base_order < o.base_order;
    if (j != o.j) return j < o.j;
    return p < o.p;
  }
};

double quad_bump(int order, double p, int npts = 200000) {
  static std::map<QuadKey, double> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  QuadKey key{order, 0, p};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  // midpoint rule; the integrand vanishes to all orders at the endpoints so
  // convergence is spectral
  double h = (kSupHi - kSupLo) / npts;
  double s = 0;
  for (int i = 0; i < npts; ++i) {
    double y = kSupLo + (i + 0.5) * h;
    s += std::pow(std::abs(bump_deriv(order, y)), p);
  }
  s *= h;
  cache[key] = s;
  return s;
}

double sup_bump(int order, int npts = 200000) {
  double h = (kSupHi - kSupLo) / npts;
  double m = 0;
  for (int i = 0; i < npts; ++i) {
    double y = kSupLo + (i + 0.5) * h;
    m = std::max(m, std::abs(bump_deriv(order, y)));
  }
  return m;
}

}  // namespace

Profile1D::Profile1D(ProfileKind kind, Role role) : kind_(kind), role_(role) {
  if (kind_ == ProfileKind::bump) {
    if (role_ == Role::psi) {
      // psi = c * bump', int psi^2 = 1
      norm_c_ = 1.0 / std::sqrt(quad_bump(1, 2.0));
    } else if (role_ == Role::phi || role_ == Role::phi_big) {
      // phi = -c * bump''; Phi = c * bump; int phi^2 = 1
      norm_c_ = 1.0 / std::sqrt(quad_bump(2, 2.0));
    } else {
      norm_c_ = 1.0;
    }
  }
}

double Profile1D::deriv(int j, double y) const {
  if (j < 0 || j > 4) fail_numeric("Profile1D: derivative order out of range");
  switch (kind_) {
    case ProfileKind::unit:
      return j == 0 ? 1.0 : 0.0;
    case ProfileKind::single_mode: {
      const double w = 2.0 * M_PI;
      double a = w * y;
      if (role_ == Role::one) return j == 0 ? 1.0 : 0.0;
      if (role_ == Role::psi) {
        // sqrt2 sin(2 pi y)
        double phase = a + j * M_PI / 2.0;
        return std::sqrt(2.0) * std::pow(w, j) * std::sin(phase);
      }
      if (role_ == Role::phi) {
        double phase = a + j * M_PI / 2.0;
        return std::sqrt(2.0) * std::pow(w, j) * std::cos(phase);
      }
      // Phi = sqrt2 cos(2 pi y) / (2 pi)^2 so that -Phi'' = sqrt2 cos
      double phase = a + j * M_PI / 2.0;
      return std::sqrt(2.0) * std::pow(w, j) * std::cos(phase) / (w * w);
    }
    case ProfileKind::bump:
    default: {
      if (role_ == Role::one) return j == 0 ? 1.0 : 0.0;
      if (role_ == Role::psi) return norm_c_ * bump_deriv(j + 1, y);
      if (role_ == Role::phi) return -norm_c_ * bump_deriv(j + 2, y);
      return norm_c_ * bump_deriv(j, y);  // Phi
    }
  }
}

double Profile1D::scaled(int j, double y, double r) const {
  if (scale_invariant() || role_ == Role::one) {
    double w = y - std::floor(y);
    return deriv(j, w);
  }
  double w = y - std::floor(y);
  return std::pow(r, -0.5 - j) * deriv(j, w / r);
}

double Profile1D::lp_norm_unit(int j, double p) const {
  if (kind_ == ProfileKind::unit || role_ == Role::one)
    return j == 0 ? 1.0 : 0.0;
  if (kind_ == ProfileKind::single_mode) {
    double amp = std::sqrt(2.0) * std::pow(2.0 * M_PI, j);
    if (role_ == Role::phi_big) amp /= (2.0 * M_PI) * (2.0 * M_PI);
    // ||sin||_p over one period
    if (p == kInf) return amp;
    // int |sin|^p: quadrature once
    static std::map<double, double> cache;
    static std::mutex m;
    double base;
    {
      std::lock_guard<std::mutex> lock(m);
      auto it = cache.find(p);
      if (it == cache.end()) {
        int npts = 100000;
        double s = 0;
        for (int i = 0; i < npts; ++i)
          s += std::pow(std::abs(std::sin(2 * M_PI * (i + 0.5) / npts)), p);
        base = std::pow(s / npts, 1.0 / p);
        cache[p] = base;
      } else {
        base = it->second;
      }
    }
    return amp * base;
  }
  int order = role_ == Role::psi ? j + 1 : (role_ == Role::phi ? j + 2 : j);
  double c = std::abs(role_ == Role::phi ? -norm_c_ : norm_c_);
  if (p == kInf) return c * sup_bump(order);
  return c * std::pow(quad_bump(order, p), 1.0 / p);
}

double Profile1D::mean_unit() const {
  if (kind_ == ProfileKind::unit || role_ == Role::one) return 1.0;
  if (kind_ == ProfileKind::single_mode) return 0.0;  // sin and cos are mean-free
  // bump: mean of psi = c [bump]' integrates to zero; phi likewise; Phi > 0
  int order = role_ == Role::psi ? 1 : (role_ == Role::phi ? 2 : 0);
  if (order > 0) return 0.0;  // derivative of a compactly supported function
  int npts = 200000;
  double h = (kSupHi - kSupLo) / npts, s = 0;
  for (int i = 0; i < npts; ++i) s += bump_deriv(0, kSupLo + (i + 0.5) * h);
  return norm_c_ * s * h;
}

double Profile1D::lp_norm_scaled(int j, double p, double r) const {
  if (scale_invariant() || role_ == Role::one) return lp_norm_unit(j, p);
  double expo = (p == kInf) ? (-0.5 - j) : (1.0 / p - 0.5 - j);
  return std::pow(r, expo) * lp_norm_unit(j, p);
}

ProfileFunctions ProfileFunctions::make(ProfileKind kind) {
  ProfileFunctions pf;
  pf.kind = kind;
  pf.psi = Profile1D(kind, Profile1D::Role::psi);
  pf.phi = Profile1D(kind, Profile1D::Role::phi);
  pf.phi_big = Profile1D(kind, Profile1D::Role::phi_big);
  pf.phi_t = Profile1D(kind, kind == ProfileKind::single_mode ? Profile1D::Role::one
                                                              : Profile1D::Role::phi);
  return pf;
}

ProfileFunctions make_profiles(int) { return ProfileFunctions::make(ProfileKind::bump); }

PsiSquareAntiderivative::PsiSquareAntiderivative(const Profile1D& psi, double r, int resolution)
    : r_(psi.scale_invariant() ? 1.0 : r) {
  // cumulative mass Q(y) = int_0^y psi^2 at unit scale; G_r(s) then follows
  // in closed form as Q(s / r) - s (support sits inside one period, so the
  // scaling is exact at any r)
  table_.assign(resolution + 1, 0.0);
  double h = 1.0 / resolution;
  double acc = 0;
  for (int i = 0; i < resolution; ++i) {
    double y = (i + 0.5) * h;
    double v = psi.deriv(0, y);
    acc += v * v * h;
    table_[i + 1] = acc;
  }
  // normalize the total mass drift (int psi^2 = 1 up to quadrature)
  double total = table_.back();
  if (total > 0)
    for (auto& v : table_) v *= 1.0 / total;
  zero_profile_ = total < 1e-14;
  // sup over a dense s-sample of |Q(s/r) - s|
  const int ns = 1 << 16;
  for (int i = 0; i <= ns; ++i) {
    double sv = double(i) / ns;
    sup_ = std::max(sup_, std::abs((*this)(sv)));
  }
}

double PsiSquareAntiderivative::operator()(double y) const {
  double w = y - std::floor(y);
  if (zero_profile_) {
    // psi identically 1 is handled by the caller convention psi^2 - 1 = 0;
    // a vanishing profile never occurs for the shipped sets
    return 0.0;
  }
  double z = w / r_;
  double q;
  if (z >= 1.0) {
    q = 1.0;
  } else {
    double x = z * (table_.size() - 1);
    size_t i = size_t(x);
    if (i >= table_.size() - 1) i = table_.size() - 2;
    double f = x - i;
    q = table_[i] * (1 - f) + table_[i + 1] * f;
  }
  return q - w;
}

}  // namespace lmhd
