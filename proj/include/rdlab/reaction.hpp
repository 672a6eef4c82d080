#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace rdlab {

// Drift V(x) = x - F(x). The first-class family is F(x) = x^{1+nu} (nu=1
// logistic growth, nu=2 cubic); arbitrary F is supported as a tabulated curve
// with linear interpolation so the hypothesis checks stay decidable.
struct PotentialSpec {
  double nu = 1.0;
  bool tabulated = false;
  bool off = false;  // drift identically zero (pure diffusion runs)
  std::vector<double> tab_x;  // increasing, starting at 0
  std::vector<double> tab_F;

  double m0() const { return 1.0 + nu; }

  double F(double x) const {
    if (tabulated) {
      if (tab_x.size() < 2) throw std::invalid_argument("PotentialSpec: bad table");
      if (x <= tab_x.front()) return tab_F.front();
      if (x >= tab_x.back()) {
        // linear continuation with the last segment's slope
        const std::size_t n = tab_x.size();
        const double slope =
            (tab_F[n - 1] - tab_F[n - 2]) / (tab_x[n - 1] - tab_x[n - 2]);
        return tab_F[n - 1] + slope * (x - tab_x[n - 1]);
      }
      auto it = std::lower_bound(tab_x.begin(), tab_x.end(), x);
      const std::size_t hi = static_cast<std::size_t>(it - tab_x.begin());
      const std::size_t lo = hi - 1;
      const double w = (x - tab_x[lo]) / (tab_x[hi] - tab_x[lo]);
      return (1.0 - w) * tab_F[lo] + w * tab_F[hi];
    }
    if (x < 0.0) {
      const double p = 1.0 + nu;
      if (p != std::floor(p))
        throw std::domain_error("PotentialSpec: negative argument with fractional power");
      return std::pow(x, p);
    }
    return std::pow(x, 1.0 + nu);
  }

  static PotentialSpec power(double nu) { return PotentialSpec{nu, false, false, {}, {}}; }
  static PotentialSpec kpp() { return power(1.0); }
  static PotentialSpec cubic() { return power(2.0); }
  static PotentialSpec drift_off() { return PotentialSpec{0.0, false, true, {}, {}}; }
  static PotentialSpec from_table(std::vector<double> xs, std::vector<double> Fs) {
    if (xs.size() != Fs.size() || xs.size() < 2)
      throw std::invalid_argument("PotentialSpec: bad table");
    return PotentialSpec{0.0, true, false, std::move(xs), std::move(Fs)};
  }
};

inline double eval_V(const PotentialSpec& spec, double x) {
  return spec.off ? 0.0 : x - spec.F(x);
}

// Truncated drift: 0 below zero, V on (0,N), frozen at V(N) beyond.
inline double eval_V_truncated(const PotentialSpec& spec, double N, double w) {
  if (w <= 0.0) return 0.0;
  if (w >= N) return eval_V(spec, N);
  return eval_V(spec, w);
}

// Multiplicative noise coefficient with sector constants
// lower*|a| <= |sigma(a)| <= lip*|a| and sigma(0)=0.
struct DiffusionSpec {
  double c = 1.0;                        // linear fast path sigma(x) = c*x
  std::function<double(double)> custom;  // empty -> linear
  double lip = 1.0;
  double lower = 1.0;

  double operator()(double x) const { return custom ? custom(x) : c * x; }
  bool is_linear() const { return !custom; }

  static DiffusionSpec linear(double c) {
    DiffusionSpec d;
    d.c = c;
    d.lip = std::abs(c);
    d.lower = std::abs(c);
    return d;
  }
};

struct SectorReport {
  bool ordered = false;          // lower <= lip
  bool upper_holds = false;      // |sigma(a)| <= lip |a| on the lattice
  bool lower_holds = false;      // |sigma(a)| >= lower |a| when lower > 0
  bool vanishes_at_zero = false;
  bool all() const { return ordered && upper_holds && lower_holds && vanishes_at_zero; }
};

inline SectorReport check_sector(const DiffusionSpec& d, double x_max = 8.0, int probes = 400) {
  SectorReport r;
  r.ordered = d.lower <= d.lip;
  r.vanishes_at_zero = d(0.0) == 0.0;
  r.upper_holds = true;
  r.lower_holds = true;
  for (int i = 1; i <= probes; ++i) {
    const double a = x_max * i / probes;
    for (double v : {a, -a}) {
      const double s = std::abs(d(v));
      if (s > d.lip * std::abs(v) * (1.0 + 1e-12)) r.upper_holds = false;
      if (d.lower > 0.0 && s < d.lower * std::abs(v) * (1.0 - 1e-12)) r.lower_holds = false;
    }
  }
  return r;
}

struct HypothesisReport {
  bool F_vanishes_at_zero = false;
  bool F_monotone = false;
  bool ratio_below_one_near_zero = false;
  bool ratio_eventually_increasing = false;
  bool V_bounded_above = false;
  bool all() const {
    return F_vanishes_at_zero && F_monotone && ratio_below_one_near_zero &&
           ratio_eventually_increasing && V_bounded_above;
  }
};

// Probes the growth hypotheses on a log-spaced grid over (0, x_max]:
// F(0)=0, F nondecreasing, F(x)/x < 1 near zero, F(x)/x strictly increasing
// on the upper range, and V = x - F topping out inside the grid.
inline HypothesisReport check_hypotheses(const PotentialSpec& spec, double x_max = 8.0,
                                         int probes = 200) {
  HypothesisReport r;
  r.F_vanishes_at_zero = std::abs(spec.F(0.0)) <= 1e-14;
  std::vector<double> xs(probes), Fs(probes);
  for (int i = 0; i < probes; ++i) {
    xs[i] = x_max * std::pow(2.0, -0.1 * (probes - 1 - i));  // log spacing
    Fs[i] = spec.F(xs[i]);
  }
  r.F_monotone = true;
  for (int i = 1; i < probes; ++i)
    if (Fs[i] < Fs[i - 1] - 1e-12) r.F_monotone = false;
  r.ratio_below_one_near_zero = Fs[0] / xs[0] < 1.0;
  // strict ratio growth across the top decade of the grid
  const double r_hi = Fs[probes - 1] / xs[probes - 1];
  const double r_mid = Fs[probes - 34] / xs[probes - 34];
  r.ratio_eventually_increasing = r_hi > r_mid * (1.0 + 1e-9);
  double vmax = -1e300;
  for (int i = 0; i < probes; ++i) vmax = std::max(vmax, xs[i] - Fs[i]);
  r.V_bounded_above = (xs[probes - 1] - Fs[probes - 1]) < vmax;
  return r;
}

inline double gamma_constant(double lip_sigma) {
  const double a = 64.0 * lip_sigma * lip_sigma;
  return std::max(a * a, 0.25);
}

namespace detail {
// Numeric maximization of (V(y) + g y)/(1 + g) over y >= 0 on a refining grid.
inline double moment_bound_numeric(const PotentialSpec& spec, double g) {
  double lo = 0.0, hi = 1.0;
  // expand until the objective is decreasing at the right edge
  auto obj = [&](double y) { return (eval_V(spec, y) + g * y) / (1.0 + g); };
  while (obj(hi) >= obj(0.9 * hi) && hi < 1e12) hi *= 2.0;
  double best = 0.0, arg = 0.0;
  for (int round = 0; round < 60; ++round) {
    const int n = 64;
    best = -1e300;
    for (int i = 0; i <= n; ++i) {
      const double y = lo + (hi - lo) * i / n;
      const double v = obj(y);
      if (v > best) {
        best = v;
        arg = y;
      }
    }
    const double span = (hi - lo) / n;
    lo = std::max(0.0, arg - 2.0 * span);
    hi = arg + 2.0 * span;
    if (span < 1e-14 * std::max(1.0, arg)) break;
  }
  return best;
}
}  // namespace detail

// sup_{y>=0} (V(y) + gamma k^2 y)/(1 + gamma k^2). For F = y^{1+nu} the
// supremum is attained at y* = (a/(1+nu))^{1/nu} with a = 1 + gamma k^2 and
// equals nu a^{1/nu} / (1+nu)^{(1+nu)/nu}.
inline double moment_bound_R(const PotentialSpec& spec, double k, double gamma) {
  if (k < 2.0) throw std::domain_error("moment_bound_R: k >= 2");
  const double a = 1.0 + gamma * k * k;
  if (spec.tabulated) return detail::moment_bound_numeric(spec, gamma * k * k);
  const double nu = spec.nu;
  return nu * std::pow(a, 1.0 / nu) / std::pow(1.0 + nu, (1.0 + nu) / nu);
}

// Largest negative integer M with  v/2 <= V(v) <= v  on (0, 2^{M+1}], i.e.
// 2^{M+1} below the root of F(v) = v/2. Bisection then a downward scan.
inline int compute_level_M(const PotentialSpec& spec) {
  auto excess = [&](double v) { return spec.F(v) - 0.5 * v; };
  double hi = 1.0;
  while (excess(hi) <= 0.0 && hi < 1e18) hi *= 2.0;
  if (hi >= 1e18) throw std::runtime_error("compute_level_M: F never exceeds v/2");
  double lo = hi / 2.0;
  while (excess(lo) > 0.0 && lo > 1e-300) lo /= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) <= 0.0 ? lo : hi) = mid;
  }
  const double v_star = lo;
  for (int M = -1; M >= -60; --M) {
    if (std::pow(2.0, M + 1) <= v_star * (1.0 + 1e-9)) return M;
  }
  throw std::runtime_error("compute_level_M: no admissible level above 2^-60");
}

}  // namespace rdlab
