#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "noise.hpp"
#include "solver.hpp"
#include "stats.hpp"

namespace rdlab {

// Shared quadrature knobs for the closed-form Gaussian integrals.
struct QuadratureConfig {
  int nodes = 4096;      // Simpson subintervals, >= 64
  double cutoff = 12.0;  // integration window edge in standard deviations
};

namespace appendix_detail {

inline void validate_quadrature(const QuadratureConfig& cfg) {
  if (cfg.nodes < 64) throw std::invalid_argument("QuadratureConfig: nodes >= 64");
  if (!(cfg.cutoff > 0.0)) throw std::invalid_argument("QuadratureConfig: cutoff > 0");
}

// P(|Z| < c) for standard normal Z, as sqrt(2/pi) * int_0^c exp(-x^2/2) dx,
// by composite Simpson. The window is capped at cfg.cutoff; the discarded
// tail is below 1e-30 at the default cutoff.
inline double half_gauss_integral(double c, const QuadratureConfig& cfg) {
  validate_quadrature(cfg);
  if (c <= 0.0) return 0.0;
  const double b = std::min(c, cfg.cutoff);
  int n = cfg.nodes;
  if (n % 2 != 0) ++n;
  const double h = b / n;
  const auto f = [](double x) { return std::exp(-0.5 * x * x); };
  double s = f(0.0) + f(b);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return std::sqrt(2.0 / M_PI) * s * h / 3.0;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double h = cdf(sample[i]);
    d = std::max(d, std::max(h - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - h));
  }
  return d;
}

}  // namespace appendix_detail

// P(inf over (0,t) of a continuous martingale >= -eps given quadratic
// variation at least A). Equality holds for Brownian motion by reflection:
// the value is P(|Z| < eps/sqrt(A)).
inline double small_ball_probability(double eps, double A, const QuadratureConfig& cfg = {}) {
  if (!(eps > 0.0) || !(A > 0.0))
    throw std::invalid_argument("small_ball_probability: eps, A > 0");
  return appendix_detail::half_gauss_integral(eps / std::sqrt(A), cfg);
}

// Bound on P(the process stays above eps^2 while its normalized quadratic
// variation accumulates at least b^2) for a nonnegative Ito process with
// drift at most itself, started at a^2. Value: P(|Z| < 2(a - eps e^{-t/2})/b).
inline double sdi_hitting_bound(double a, double b, double t, double eps,
                                const QuadratureConfig& cfg = {}) {
  if (!(a > 0.0) || !(b > 0.0) || !(t > 0.0))
    throw std::domain_error("sdi_hitting_bound: a, b, t > 0");
  const double eps_max = a * std::exp(0.5 * t);
  if (!(eps > 0.0) || eps > eps_max * (1.0 + 1e-12))
    throw std::domain_error("sdi_hitting_bound: eps in (0, a*exp(t/2)]");
  const double c = 2.0 * (a - eps * std::exp(-0.5 * t)) / b;
  return appendix_detail::half_gauss_integral(c, cfg);
}

// E[(|X| - a)_+^{-s}] for centered normal X, with the convention that samples
// at or below the offset contribute zero (the law has an integrable
// singularity just above it). The supremum over a >= 0 is attained at a = 0:
//   Gamma((1-s)/2) / ((2 Var)^{s/2} sqrt(pi)).
inline double gauss_negative_moment(double s, double variance) {
  if (!(s > 0.0) || !(s < 1.0)) throw std::domain_error("gauss_negative_moment: s in (0,1)");
  if (!(variance > 0.0)) throw std::invalid_argument("gauss_negative_moment: variance > 0");
  return std::tgamma(0.5 * (1.0 - s)) /
         (std::pow(2.0 * variance, 0.5 * s) * std::sqrt(M_PI));
}

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
  long long n = 0;
};

// Mean overshoot of a discretely monitored Brownian barrier, -zeta(1/2)/sqrt(2 pi).
// Shifting the barrier by this times sqrt(dt) removes the O(sqrt(dt)) survival
// bias of grid monitoring; the residual is O(dt).
inline constexpr double kBarrierShift = 0.5826;

// Frequency of {min over a Brownian path on [0, A] of B > -eps} across paths.
// With the bias correction on, the estimate targets the continuum probability;
// off, it keeps the raw grid-monitored value, which overshoots by about
// kBarrierShift * sqrt(dt) * density at the barrier.
inline McEstimate small_ball_mc(double eps, double A, long long paths, std::uint64_t seed,
                                int steps_per_unit = 1000, bool correct_monitoring_bias = true) {
  if (!(eps > 0.0) || !(A > 0.0)) throw std::invalid_argument("small_ball_mc: eps, A > 0");
  if (paths < 2) throw std::invalid_argument("small_ball_mc: paths >= 2");
  if (steps_per_unit < 10) throw std::invalid_argument("small_ball_mc: steps_per_unit >= 10");
  const long long n = std::max<long long>(1, static_cast<long long>(std::ceil(A * steps_per_unit - 1e-9)));
  const double dt = A / static_cast<double>(n);
  const double sdt = std::sqrt(dt);
  const double barrier = -eps + (correct_monitoring_bias ? kBarrierShift * sdt : 0.0);
  long long hits = 0;
  for (long long r = 0; r < paths; ++r) {
    NoiseStream str(seed, static_cast<std::uint32_t>(r));
    double b = 0.0;
    bool alive = true;
    for (long long k = 0; k < n; ++k) {
      b += sdt * str.normal_at(static_cast<std::uint64_t>(k), 0);
      if (b <= barrier) {
        alive = false;
        break;
      }
    }
    hits += alive;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(paths);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(paths)), paths};
}

// Frequency of the joint event {inf over (0,t) of X > eps^2,
// int_0^t e^{-s} X_s ds >= b^2} for dX = X dt + X dW from a^2, simulated
// exactly at the grid points (X = a^2 exp(s/2 + W_s)); only the event
// monitoring is discrete, which biases the frequency upward, i.e. against
// the bound it is checked under.
inline McEstimate sdi_hitting_mc(double a, double b, double t, double eps, long long paths,
                                 std::uint64_t seed, int steps_per_unit = 1000) {
  if (!(a > 0.0) || !(b > 0.0) || !(t > 0.0) || !(eps > 0.0))
    throw std::domain_error("sdi_hitting_mc: a, b, t, eps > 0");
  if (paths < 2) throw std::invalid_argument("sdi_hitting_mc: paths >= 2");
  if (steps_per_unit < 10) throw std::invalid_argument("sdi_hitting_mc: steps_per_unit >= 10");
  const long long n = std::max<long long>(1, static_cast<long long>(std::ceil(t * steps_per_unit - 1e-9)));
  const double dt = t / static_cast<double>(n);
  const double sdt = std::sqrt(dt);
  const double x0 = a * a, floor = eps * eps, target = b * b;
  long long hits = 0;
  for (long long r = 0; r < paths; ++r) {
    NoiseStream str(seed, static_cast<std::uint32_t>(r));
    double w = 0.0, prev = x0, integral = 0.0;
    bool above = true;
    for (long long k = 1; k <= n; ++k) {
      w += sdt * str.normal_at(static_cast<std::uint64_t>(k - 1), 0);
      const double s = k * dt;
      const double x = x0 * std::exp(0.5 * s + w);
      if (x <= floor) above = false;
      integral += 0.5 * dt * (std::exp(-(s - dt)) * prev + std::exp(-s) * x);
      prev = x;
    }
    hits += (above && integral >= target);
  }
  const double p = static_cast<double>(hits) / static_cast<double>(paths);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(paths)), paths};
}

// Sample mean of (|X| - a)_+^{-s} for X centered normal; zero contribution
// at or below the offset. Finite-variance sampling needs s < 1/2.
inline McEstimate gauss_moment_mc(double s, double variance, double a, long long n,
                                  std::uint64_t seed) {
  if (!(s > 0.0) || !(s < 1.0)) throw std::domain_error("gauss_moment_mc: s in (0,1)");
  if (!(variance > 0.0)) throw std::invalid_argument("gauss_moment_mc: variance > 0");
  if (a < 0.0) throw std::invalid_argument("gauss_moment_mc: a >= 0");
  if (n < 2) throw std::invalid_argument("gauss_moment_mc: n >= 2");
  const double sd = std::sqrt(variance);
  NoiseStream str(seed, 0);
  MeanVar acc;
  for (long long k = 0; k < n; ++k) {
    const double x = std::abs(sd * str.normal_at(static_cast<std::uint64_t>(k), 0));
    acc.add(x > a ? std::pow(x - a, -s) : 0.0);
  }
  return {acc.mean, acc.standard_error(), n};
}

// Y_i = H^{-1}(G(X_i)) with the right-continuous inverse inf{y : H(y) >= u},
// found by bisection on [lo, hi] to 1e-12. Requires G >= H on a uniform probe
// grid; then Y_i >= X_i samplewise and Y carries the law H. Deterministic in
// its inputs: equal calls give bitwise equal output.
inline std::vector<double> monotone_coupling(const std::vector<double>& x_samples,
                                             const std::function<double(double)>& G,
                                             const std::function<double(double)>& H,
                                             double lo, double hi, int probe_points = 256) {
  if (x_samples.empty()) throw std::invalid_argument("monotone_coupling: empty sample");
  if (!G || !H) throw std::invalid_argument("monotone_coupling: missing cdf");
  if (!(lo < hi)) throw std::invalid_argument("monotone_coupling: lo < hi");
  if (probe_points < 2) throw std::invalid_argument("monotone_coupling: probe_points >= 2");
  for (int i = 0; i < probe_points; ++i) {
    const double x = lo + (hi - lo) * i / (probe_points - 1);
    if (G(x) < H(x) - 1e-12)
      throw std::invalid_argument("monotone_coupling: G >= H fails on the probe grid");
  }
  std::vector<double> y(x_samples.size());
  for (std::size_t i = 0; i < x_samples.size(); ++i) {
    const double u = G(x_samples[i]);
    if (H(lo) >= u) {
      y[i] = lo;
      continue;
    }
    if (H(hi) < u)
      throw std::invalid_argument("monotone_coupling: bracket does not cover the target law");
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      (H(mid) >= u ? b : a) = mid;
    }
    y[i] = b;
  }
  return y;
}

struct TailRow {
  double rho = 0.0;
  double prob = 0.0;
  double se = 0.0;
};

struct TailReport {
  std::vector<TailRow> rows;
  double slope = 0.0;      // d log P / d rho^2 over rows with prob in (0,1)
  double intercept = 0.0;
  double rho_scale = 0.0;  // sqrt(-1/slope); Gaussian decay scale in rho
  int fit_points = 0;
};

// Tail table of sup |Z| over [0,T] x torus for dZ = Laplacian Z dt +
// lambda * (4 lip L_level) dW from zero: the stochastic convolution with the
// integrand clipped at its sector ceiling. Gaussian-type decay shows as a
// negative linear trend of log P(sup > rho) in rho^2, with scale
// proportional to lambda * lip * L_level and T^{1/4}.
inline TailReport convolution_tail_check(double T, double lambda, double lip, double L_level,
                                         const std::vector<double>& rho_grid, int replicas,
                                         int J = 64, std::uint64_t seed = 0) {
  if (!(T > 0.0)) throw std::invalid_argument("convolution_tail_check: T > 0");
  if (lambda < 0.0) throw std::invalid_argument("convolution_tail_check: lambda >= 0");
  if (!(lip > 0.0) || !(L_level > 0.0))
    throw std::invalid_argument("convolution_tail_check: lip, L_level > 0");
  if (rho_grid.empty()) throw std::invalid_argument("convolution_tail_check: empty rho grid");
  for (std::size_t i = 0; i < rho_grid.size(); ++i)
    if (!(rho_grid[i] > 0.0) || (i > 0 && rho_grid[i] <= rho_grid[i - 1]))
      throw std::invalid_argument("convolution_tail_check: rho grid strictly increasing, > 0");
  if (replicas < 2) throw std::invalid_argument("convolution_tail_check: replicas >= 2");
  if (J < 8) throw std::invalid_argument("convolution_tail_check: J >= 8");

  SolverConfig cfg;
  cfg.J = J;
  cfg.t_end = T;
  cfg.lambda = lambda;
  cfg.potential = PotentialSpec::drift_off();
  DiffusionSpec d;
  const double amp = 4.0 * lip * L_level;
  d.custom = [amp](double) { return amp; };
  cfg.diffusion = d;
  cfg.scheme = Scheme::explicit_euler;
  cfg.clamp_nonnegative = false;
  const double dx = 2.0 / J;
  cfg.dt = dx * dx / 4.0;

  std::vector<double> sups(static_cast<std::size_t>(replicas));
  for (int r = 0; r < replicas; ++r) {
    Stepper st(cfg);
    NoiseStream str(seed, static_cast<std::uint32_t>(r));
    Field u = Field::Zero(J);
    Field slab(J);
    const long long n = static_cast<long long>(std::ceil(T / st.dt() - 1e-9));
    double m = 0.0;
    for (long long k = 0; k < n; ++k) {
      str.fill_slab(static_cast<std::uint64_t>(k), slab);
      st.advance(u, slab, k);
      m = std::max(m, u.cwiseAbs().maxCoeff());
    }
    sups[static_cast<std::size_t>(r)] = m;
  }

  TailReport out;
  std::vector<double> xs, ys;
  for (double rho : rho_grid) {
    long long hits = 0;
    for (double v : sups) hits += (v > rho);
    const double p = static_cast<double>(hits) / replicas;
    out.rows.push_back({rho, p, std::sqrt(p * (1.0 - p) / replicas)});
    if (p > 0.0 && p < 1.0) {
      xs.push_back(rho * rho);
      ys.push_back(std::log(p));
    }
  }
  out.fit_points = static_cast<int>(xs.size());
  if (out.fit_points >= 2) {
    const LineFit fit = fit_line(xs, ys);
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.rho_scale = fit.slope < 0.0 ? std::sqrt(-1.0 / fit.slope)
                                    : std::numeric_limits<double>::quiet_NaN();
  } else {
    out.slope = std::numeric_limits<double>::quiet_NaN();
    out.intercept = std::numeric_limits<double>::quiet_NaN();
    out.rho_scale = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

struct LemmaCheck {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double reference = 0.0;
  std::string detail;
};

// Full validator battery; one row per result. cost_divisor >= 1 trims the
// Monte Carlo path counts for quick runs (1 = full scale).
inline std::vector<LemmaCheck> appendix_battery(std::uint64_t seed, int cost_divisor = 1) {
  if (cost_divisor < 1 || cost_divisor > 1000)
    throw std::invalid_argument("appendix_battery: cost_divisor in [1, 1000]");
  std::vector<LemmaCheck> out;
  char buf[160];

  {
    const double eps = 0.5, A = 1.0;
    const long long paths = 100000 / cost_divisor;
    const double closed = small_ball_probability(eps, A);
    const McEstimate mc = small_ball_mc(eps, A, paths, seed);
    std::snprintf(buf, sizeof(buf), "corrected Brownian monitoring, %lld paths, se %.4f",
                  paths, mc.se);
    out.push_back({"small_ball", std::abs(mc.value - closed) <= 0.01, mc.value, closed, buf});
  }
  {
    const double s = 0.3, var = 1.0;
    const long long n = 1000000 / cost_divisor;
    const double closed = gauss_negative_moment(s, var);
    const McEstimate at0 = gauss_moment_mc(s, var, 0.0, n, seed + 1);
    const McEstimate off = gauss_moment_mc(s, var, 0.5, n, seed + 2);
    const bool pass =
        std::abs(at0.value - closed) <= 3.0 * at0.se && off.value < closed;
    std::snprintf(buf, sizeof(buf), "offset 0 within 3 se (%.4f), offset 0.5 gives %.4f",
                  at0.se, off.value);
    out.push_back({"negative_moment", pass, at0.value, closed, buf});
  }
  {
    const long long n = 10000;
    NoiseStream str(seed + 3, 0);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (long long k = 0; k < n; ++k)
      x[static_cast<std::size_t>(k)] = str.normal_at(static_cast<std::uint64_t>(k), 0);
    const double shift = 0.7;
    const auto G = [](double v) { return appendix_detail::normal_cdf(v); };
    const auto H = [shift](double v) { return appendix_detail::normal_cdf(v - shift); };
    const auto y = monotone_coupling(x, G, H, -12.0, 12.0);
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < y.size(); ++i) min_gap = std::min(min_gap, y[i] - x[i]);
    const double ks = appendix_detail::ks_statistic(y, H);
    const double crit = 1.6276 / std::sqrt(static_cast<double>(n));
    const bool pass = min_gap >= -1e-12 && ks < crit;
    std::snprintf(buf, sizeof(buf), "min(Y-X) = %.2e, KS critical %.5f at n=%lld", min_gap,
                  crit, n);
    out.push_back({"monotone_coupling", pass, ks, crit, buf});
  }
  {
    const double a = 1.0, b = 1.0, t = 1.0, eps = 0.1;
    const long long paths = 100000 / cost_divisor;
    const double bound = sdi_hitting_bound(a, b, t, eps);
    const McEstimate mc = sdi_hitting_mc(a, b, t, eps, paths, seed + 4);
    std::snprintf(buf, sizeof(buf), "joint event frequency over %lld paths, se %.4f", paths,
                  mc.se);
    out.push_back({"hitting_bound", mc.value <= bound + 3.0 * mc.se, mc.value, bound, buf});
  }
  {
    const double T = 1.0, lambda = 0.5, lip = 1.0;
    const std::vector<double> grid = {2.75, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5};
    std::vector<double> grid2(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) grid2[i] = 2.0 * grid[i];
    const int replicas = 2500 / cost_divisor;
    const auto base = convolution_tail_check(T, lambda, lip, 1.0, grid, replicas, 32, seed + 5);
    const auto doubled =
        convolution_tail_check(T, lambda, lip, 2.0, grid2, replicas, 32, seed + 6);
    const double ratio = doubled.rho_scale / base.rho_scale;
    const bool pass = base.fit_points >= 3 && base.slope < 0.0 && doubled.slope < 0.0 &&
                      ratio >= 1.7 && ratio <= 2.3;
    std::snprintf(buf, sizeof(buf), "slope %.4f per rho^2, scale ratio under level doubling %.3f",
                  base.slope, ratio);
    out.push_back({"convolution_tail", pass, ratio, 2.0, buf});
  }
  return out;
}

}  // namespace rdlab
