#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <rdlab/noise.hpp>
#include <rdlab/solver.hpp>
#include <rdlab/stats.hpp>
#include <rdlab/torus.hpp>

namespace rdlab {

// Snapshots of one long run, thinned so consecutive fields are close to
// independent. All measure-level statistics below are computed from these.
struct EmpiricalMeasure {
  int J = 0;
  double lambda = 0.0;
  std::vector<double> times;
  std::vector<Field> snapshots;
  bool extinct = false;        // sup dropped below the hard floor while sampling
  double extinction_time = 0.0;
};

// Two-resolution stepping for large grids: cheap coarse steps carry the field
// between snapshots, and a short fine-step burst before each snapshot restores
// the small-scale fluctuation statistics that the coarse steps distort. A
// scale r re-equilibrates in time about r^2, so burst_t covers r up to
// sqrt(burst_t) while dt_fine must stay well under r_min^2.
struct MeasureSchedule {
  double dt_coarse = 1e-3;
  double burst_t = 0.02;
  double dt_fine = 4e-6;
};

inline double time_average_series(const std::vector<double>& times,
                                  const std::vector<double>& values,
                                  const std::function<double(double)>& f) {
  if (times.size() != values.size() || times.size() < 2)
    throw std::invalid_argument("time_average_series: need >= 2 matched points");
  const double span = times.back() - times.front();
  if (span <= 0.0) throw std::invalid_argument("time_average_series: zero span");
  double acc = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i)
    acc += (times[i] - times[i - 1]) * f(values[i - 1]);
  return acc / span;
}

// Fraction of time the spatial minimum sits below eps, left-endpoint rule.
inline double time_average_occupation(const Trajectory& tr, double eps) {
  if (tr.times.empty() || tr.times.back() - tr.times.front() < 10.0)
    throw std::invalid_argument("time_average_occupation: trajectory shorter than 10 time units");
  return time_average_series(tr.times, tr.min_series,
                             [eps](double v) { return v < eps ? 1.0 : 0.0; });
}

constexpr double kExtinctionFloor = 1e-12;

// Thinned snapshots along one trajectory from the all-ones profile. With a
// schedule, the loop alternates coarse transport and a fine burst per
// snapshot; one global step counter keeps every noise slab distinct.
inline EmpiricalMeasure kb_sample(const SolverConfig& cfg, double burn_in, double thinning,
                                  int total, std::uint64_t seed, std::uint32_t stream = 0,
                                  const std::optional<MeasureSchedule>& schedule = {}) {
  if (burn_in < 1.0) throw std::invalid_argument("kb_sample: burn_in >= 1");
  if (thinning < 1.0) throw std::invalid_argument("kb_sample: thinning >= 1 (decorrelation window)");
  if (total < 1) throw std::invalid_argument("kb_sample: total >= 1");

  EmpiricalMeasure m;
  m.J = cfg.J;
  m.lambda = cfg.lambda;

  if (!schedule) {
    SolverConfig run = cfg;
    run.t_end = burn_in + (total - 1) * thinning;
    run.snapshot_times.clear();
    for (int i = 0; i < total; ++i) run.snapshot_times.push_back(burn_in + i * thinning);
    const auto tr = simulate(Field::Ones(cfg.J), run, NoiseStream(seed, stream));
    double dead_at = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      if (tr.max_series[i] < kExtinctionFloor) {
        dead_at = tr.times[i];
        break;
      }
    }
    for (const auto& [t, f] : tr.snapshots) {
      if (t >= dead_at) break;
      m.times.push_back(t);
      m.snapshots.push_back(f);
    }
    if (std::isfinite(dead_at)) {
      m.extinct = true;
      m.extinction_time = dead_at;
    }
    return m;
  }

  const MeasureSchedule& sc = *schedule;
  if (!(sc.dt_fine > 0.0) || !(sc.dt_coarse >= sc.dt_fine))
    throw std::invalid_argument("kb_sample: need dt_coarse >= dt_fine > 0");
  if (!(sc.burst_t > 0.0) || sc.burst_t > std::min(burn_in, thinning))
    throw std::invalid_argument("kb_sample: burst_t in (0, min(burn_in, thinning)]");

  SolverConfig coarse_cfg = cfg, fine_cfg = cfg;
  coarse_cfg.dt = sc.dt_coarse;
  fine_cfg.dt = sc.dt_fine;
  Stepper coarse(coarse_cfg), fine(fine_cfg);

  const NoiseStream str(seed, stream);
  Field u = Field::Ones(cfg.J);
  Field slab(cfg.J);
  std::uint64_t k = 0;
  double t = 0.0;
  for (int i = 0; i < total; ++i) {
    const double target = burn_in + i * thinning;
    const auto count = [](double span, double dt) {
      return span <= 0.0 ? 0LL : static_cast<long long>(std::ceil(span / dt - 1e-9));
    };
    for (long long n = count(target - sc.burst_t - t, coarse.dt()); n > 0; --n) {
      str.fill_slab(k, slab);
      coarse.advance(u, slab, static_cast<long long>(k));
      ++k;
      t += coarse.dt();
    }
    for (long long n = count(target - t, fine.dt()); n > 0; --n) {
      str.fill_slab(k, slab);
      fine.advance(u, slab, static_cast<long long>(k));
      ++k;
      t += fine.dt();
    }
    t = target;
    if (u.maxCoeff() < kExtinctionFloor) {
      m.extinct = true;
      m.extinction_time = t;
      break;
    }
    m.times.push_back(t);
    m.snapshots.push_back(u);
  }
  return m;
}

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
};

namespace detail {

inline std::vector<int> dyadic_lags(int J) {
  std::vector<int> lags;
  for (int h = 1; h <= J / 2; h *= 2) lags.push_back(h);
  return lags;
}

inline SummaryRow summarize(const std::string& name, const std::vector<double>& v) {
  SummaryRow row;
  row.name = name;
  MeanVar mv;
  for (double x : v) mv.add(x);
  row.mean = mv.mean;
  row.q25 = quantile(v, 0.25);
  row.q50 = quantile(v, 0.50);
  row.q75 = quantile(v, 0.75);
  return row;
}

}  // namespace detail

// Quantile table of the standard snapshot functionals. The minimum snapshot
// count guards every statistic reported off an EmpiricalMeasure.
inline std::vector<SummaryRow> measure_summary(const EmpiricalMeasure& m,
                                               const std::vector<double>& alphas = {0.4}) {
  if (m.snapshots.size() < 30)
    throw std::invalid_argument("measure_summary: need >= 30 snapshots");
  const TorusGrid grid(m.J);
  const auto lags = detail::dyadic_lags(m.J);
  const std::size_t n = m.snapshots.size();

  std::vector<double> infs(n), sups(n), means(n);
  for (std::size_t i = 0; i < n; ++i) {
    infs[i] = m.snapshots[i].minCoeff();
    sups[i] = m.snapshots[i].maxCoeff();
    means[i] = m.snapshots[i].mean();
  }
  std::vector<SummaryRow> rows;
  rows.push_back(detail::summarize("inf", infs));
  rows.push_back(detail::summarize("sup", sups));
  rows.push_back(detail::summarize("mean", means));
  for (double a : alphas) {
    std::vector<double> hs(n);
    for (std::size_t i = 0; i < n; ++i) hs[i] = holder_seminorm(grid, m.snapshots[i], a, lags);
    char label[32];
    std::snprintf(label, sizeof(label), "holder@%g", a);
    rows.push_back(detail::summarize(label, hs));
  }
  return rows;
}

struct AgreementRow {
  std::string name;
  double avg_a = 0.0;
  double se_a = 0.0;
  double avg_b = 0.0;
  double se_b = 0.0;
  double z = 0.0;
};

struct AgreementReport {
  std::vector<AgreementRow> rows;
  bool within(double k) const {
    for (const auto& r : rows)
      if (r.z > k) return false;
    return true;
  }
};

namespace detail {

inline AgreementRow agreement_row(const std::string& name, const MeanVar& a, const MeanVar& b) {
  AgreementRow row;
  row.name = name;
  row.avg_a = a.mean;
  row.se_a = a.standard_error();
  row.avg_b = b.mean;
  row.se_b = b.standard_error();
  const double gap = std::abs(row.avg_a - row.avg_b);
  const double denom = std::hypot(row.se_a, row.se_b);
  row.z = denom > 0.0 ? gap / denom : (gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return row;
}

}  // namespace detail

// First-half versus second-half agreement of the snapshot functionals, a
// stationarity proxy: a still-relaxing run separates the windows.
inline AgreementReport window_agreement(const EmpiricalMeasure& m) {
  if (m.snapshots.size() < 30)
    throw std::invalid_argument("window_agreement: need >= 30 snapshots");
  const std::size_t n = m.snapshots.size(), half = n / 2;
  const TorusGrid grid(m.J);
  const auto lags = detail::dyadic_lags(m.J);
  struct Fn {
    std::string name;
    std::function<double(const Field&)> f;
  };
  const std::vector<Fn> fns = {
      {"inf", [](const Field& f) { return f.minCoeff(); }},
      {"sup", [](const Field& f) { return f.maxCoeff(); }},
      {"mean", [](const Field& f) { return f.mean(); }},
      {"holder@0.4",
       [&](const Field& f) { return holder_seminorm(grid, f, 0.4, lags); }},
  };
  AgreementReport rep;
  for (const auto& fn : fns) {
    MeanVar first, second;
    for (std::size_t i = 0; i < n; ++i) (i < half ? first : second).add(fn.f(m.snapshots[i]));
    rep.rows.push_back(detail::agreement_row(fn.name, first, second));
  }
  return rep;
}

struct SeriesFunctional {
  std::string name;
  // arguments: spatial min, spatial max, spatial mean at one time
  std::function<double(double, double, double)> eval;
};

inline std::vector<SeriesFunctional> default_series_functionals() {
  return {
      {"min", [](double l, double, double) { return l; }},
      {"max", [](double, double u, double) { return u; }},
      {"mean", [](double, double, double m) { return m; }},
  };
}

// Long-run averages of scalar functionals from two starting profiles, testing
// that the averages forget the initial data. With shared_noise each pair rides
// one noise realization (equal starts then agree exactly, distinct starts
// typically merge); without it the runs are independent and agreement is
// statistical. Standard errors come from batch means over [burn_in, t_end].
inline AgreementReport ergodic_agreement(const Field& psi0_a, const Field& psi0_b,
                                         const std::vector<SeriesFunctional>& fns,
                                         const SolverConfig& cfg, double burn_in, int replicas,
                                         int batches, std::uint64_t seed,
                                         bool shared_noise = true) {
  if (psi0_a.size() != cfg.J || psi0_b.size() != cfg.J)
    throw std::invalid_argument("ergodic_agreement: profile size != J");
  if ((psi0_a < 0.0).any() || (psi0_b < 0.0).any() || psi0_a.maxCoeff() <= 0.0 ||
      psi0_b.maxCoeff() <= 0.0)
    throw std::invalid_argument("ergodic_agreement: profiles must be nonnegative, not all zero");
  if (fns.empty()) throw std::invalid_argument("ergodic_agreement: empty functional list");
  if (replicas < 1 || batches < 1 || replicas * batches < 2)
    throw std::invalid_argument("ergodic_agreement: need at least 2 batch samples");
  if (!(burn_in >= 0.0) || !(cfg.t_end > burn_in))
    throw std::invalid_argument("ergodic_agreement: need 0 <= burn_in < t_end");

  const double batch_len = (cfg.t_end - burn_in) / batches;
  std::vector<MeanVar> acc_a(fns.size()), acc_b(fns.size());
  const auto accumulate = [&](const Trajectory& tr, std::vector<MeanVar>& acc) {
    for (int b = 0; b < batches; ++b) {
      const double t0 = burn_in + b * batch_len, t1 = t0 + batch_len;
      std::vector<MeanVar> batch(fns.size());
      for (std::size_t i = 0; i < tr.times.size(); ++i) {
        if (tr.times[i] < t0 || tr.times[i] >= t1) continue;
        for (std::size_t j = 0; j < fns.size(); ++j)
          batch[j].add(fns[j].eval(tr.min_series[i], tr.max_series[i], tr.mean_series[i]));
      }
      if (batch[0].n == 0) throw std::logic_error("ergodic_agreement: empty batch window");
      for (std::size_t j = 0; j < fns.size(); ++j) acc[j].add(batch[j].mean);
    }
  };
  for (int r = 0; r < replicas; ++r) {
    const auto ra = static_cast<std::uint32_t>(shared_noise ? r : 2 * r);
    const auto rb = static_cast<std::uint32_t>(shared_noise ? r : 2 * r + 1);
    accumulate(simulate(psi0_a, cfg, NoiseStream(seed, ra)), acc_a);
    accumulate(simulate(psi0_b, cfg, NoiseStream(seed, rb)), acc_b);
  }
  AgreementReport rep;
  for (std::size_t j = 0; j < fns.size(); ++j)
    rep.rows.push_back(detail::agreement_row(fns[j].name, acc_a[j], acc_b[j]));
  return rep;
}

struct LowerTailRow {
  double eps = 0.0;
  double fraction = 0.0;
};

struct LowerTailTable {
  std::vector<LowerTailRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();  // log fraction vs log eps
};

// Empirical mass of {inf omega <= eps} with a log-log slope across the grid.
// Rows with zero hits carry no log information and are excluded from the fit.
inline LowerTailTable lower_tail_curve(const EmpiricalMeasure& m,
                                       const std::vector<double>& eps_grid) {
  if (m.snapshots.size() < 200)
    throw std::invalid_argument("lower_tail_curve: need >= 200 snapshots");
  if (eps_grid.empty()) throw std::invalid_argument("lower_tail_curve: empty grid");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0)) throw std::invalid_argument("lower_tail_curve: eps > 0");
    if (i > 0 && eps_grid[i] <= eps_grid[i - 1])
      throw std::invalid_argument("lower_tail_curve: eps grid strictly increasing");
  }
  std::vector<double> infs(m.snapshots.size());
  for (std::size_t i = 0; i < m.snapshots.size(); ++i) infs[i] = m.snapshots[i].minCoeff();

  LowerTailTable table;
  std::vector<double> xs, ys;
  for (double eps : eps_grid) {
    const auto hits = static_cast<double>(
        std::count_if(infs.begin(), infs.end(), [eps](double v) { return v <= eps; }));
    const double frac = hits / static_cast<double>(infs.size());
    table.rows.push_back({eps, frac});
    if (frac > 0.0) {
      xs.push_back(std::log(eps));
      ys.push_back(std::log(frac));
    }
  }
  if (xs.size() >= 2 && xs.front() != xs.back()) table.slope = fit_line(xs, ys).slope;
  return table;
}

struct ModulusRow {
  double r = 0.0;
  double sup_increment = 0.0;   // over all lags up to r and all locations
  double min_local_osc = 0.0;   // smallest over locations of the lag-sup there
};

struct ModulusStats {
  double limsup_stat = 0.0;
  double liminf_stat = 0.0;
  std::vector<ModulusRow> rows;
};

// Normalized roughness statistics of one profile. The sup-increment over
// scales below r divided by sqrt(r log(1/r)) identifies the noise level on
// rough profiles; the least-oscillating location, scaled by
// sqrt(16 log(1/r) / (pi^2 r)), identifies the same level from below. Both
// are reported relative to lambda * sup |sigma(omega)|.
inline ModulusStats modulus_estimator(const Field& omega, const DiffusionSpec& diffusion,
                                      double lambda, std::vector<double> r_grid) {
  const int J = static_cast<int>(omega.size());
  if (J < 4096) throw std::invalid_argument("modulus_estimator: J >= 4096");
  if (!(lambda > 0.0)) throw std::invalid_argument("modulus_estimator: lambda > 0");
  if (r_grid.empty()) throw std::invalid_argument("modulus_estimator: empty r grid");
  const double dx = 2.0 / J;
  std::sort(r_grid.begin(), r_grid.end());
  if (r_grid.front() < 4.0 * dx || r_grid.back() > 0.1)
    throw std::invalid_argument("modulus_estimator: r grid within [4*dx, 0.1]");

  double level = 0.0;
  for (int i = 0; i < J; ++i) level = std::max(level, std::abs(diffusion(omega[i])));
  const double norm = lambda * level;
  if (!(norm > 0.0)) throw std::invalid_argument("modulus_estimator: zero noise level on profile");

  ModulusStats out;
  Field osc = Field::Zero(J);
  double sup_inc = 0.0;
  std::size_t next_r = 0;
  const int h_max = static_cast<int>(std::floor(r_grid.back() / dx));
  for (int h = 1; h <= h_max && next_r < r_grid.size(); ++h) {
    for (int i = 0; i < J; ++i) {
      const int j = i + h < J ? i + h : i + h - J;
      const double d = std::abs(omega[j] - omega[i]);
      if (d > osc[i]) osc[i] = d;
      if (d > osc[j]) osc[j] = d;
      if (d > sup_inc) sup_inc = d;
    }
    while (next_r < r_grid.size() &&
           h + 1 > static_cast<int>(std::floor(r_grid[next_r] / dx))) {
      out.rows.push_back({r_grid[next_r], sup_inc, osc.minCoeff()});
      ++next_r;
    }
  }

  out.limsup_stat = 0.0;
  out.liminf_stat = std::numeric_limits<double>::infinity();
  for (const auto& row : out.rows) {
    const double lg = std::log(1.0 / row.r);
    out.limsup_stat = std::max(out.limsup_stat, row.sup_increment / std::sqrt(row.r * lg));
    out.liminf_stat = std::min(
        out.liminf_stat, std::sqrt(16.0 * lg / (M_PI * M_PI * row.r)) * row.min_local_osc);
  }
  out.limsup_stat /= norm;
  out.liminf_stat /= norm;
  return out;
}

// Midpoints of the 2^depth surviving middle-thirds intervals on [0, 1].
inline std::vector<double> cantor_points(int depth) {
  if (depth < 1 || depth > 20) throw std::invalid_argument("cantor_points: depth in [1, 20]");
  std::vector<double> lefts{0.0};
  double len = 1.0;
  for (int d = 0; d < depth; ++d) {
    len /= 3.0;
    std::vector<double> next;
    next.reserve(2 * lefts.size());
    for (double a : lefts) {
      next.push_back(a);
      next.push_back(a + 2.0 * len);
    }
    lefts.swap(next);
  }
  for (double& a : lefts) a += 0.5 * len;
  return lefts;
}

// Box-counting dimension of the value set {omega(x): x in points}, least
// squares of log N(delta) against log(1/delta). Values are read at the
// nearest grid node.
inline double dimension_doubling(const Field& omega, const std::vector<double>& points,
                                 const std::vector<double>& box_sizes) {
  const int J = static_cast<int>(omega.size());
  if (J < 2) throw std::invalid_argument("dimension_doubling: empty profile");
  if (points.empty()) throw std::invalid_argument("dimension_doubling: empty point set");
  if (box_sizes.size() < 3)
    throw std::invalid_argument("dimension_doubling: need >= 3 box scales");
  const double dx = 2.0 / J;
  std::vector<double> values;
  values.reserve(points.size());
  for (double x : points) {
    if (x < -1.0 - 1e-12 || x > 1.0 + 1e-12)
      throw std::invalid_argument("dimension_doubling: point outside the torus");
    const long long idx = std::llround((x + 1.0) / dx);
    values.push_back(omega[static_cast<int>(((idx % J) + J) % J)]);
  }
  std::vector<double> xs, ys;
  for (double delta : box_sizes) {
    if (!(delta > 0.0) || delta >= 1.0)
      throw std::invalid_argument("dimension_doubling: box sizes in (0, 1)");
    std::set<long long> boxes;
    for (double v : values) boxes.insert(static_cast<long long>(std::floor(v / delta)));
    xs.push_back(std::log(1.0 / delta));
    ys.push_back(std::log(static_cast<double>(boxes.size())));
  }
  return fit_line(xs, ys).slope;
}

enum class PhaseVerdict { extinct, persistent, undecided };

inline const char* phase_verdict_name(PhaseVerdict v) {
  switch (v) {
    case PhaseVerdict::extinct: return "extinct";
    case PhaseVerdict::persistent: return "persistent";
    default: return "undecided";
  }
}

struct PhaseReplica {
  double slope = 0.0;
  double slope_se = 0.0;
  bool hit_zero = false;
  std::vector<double> occupation;  // aligned with eps_grid
  double mean_min = 0.0;           // time average of the spatial minimum
};

struct PhasePoint {
  double lambda = 0.0;
  double slope = 0.0;
  double slope_ci_lo = 0.0;
  double slope_ci_hi = 0.0;
  std::vector<double> eps_grid;
  std::vector<double> occupation;  // replica means, aligned with eps_grid
  PhaseVerdict verdict = PhaseVerdict::undecided;
  std::vector<PhaseReplica> replicas;
};

// Decision thresholds: a decay rate is called only when the slope confidence
// interval clears -1e-3, and persistence needs the minimum to live an order
// of magnitude above the occupation floor.
constexpr double kExtinctSlopeCeiling = -1e-3;
constexpr double kOccupationFloor = 1e-3;
constexpr double kOccupationThreshold = 0.05;

inline PhasePoint phase_point(double lambda, const SolverConfig& base, int replicas,
                              const std::vector<double>& eps_grid, std::uint64_t seed,
                              std::uint32_t stream_base = 0) {
  if (replicas < 1) throw std::invalid_argument("phase_point: replicas >= 1");
  if (eps_grid.empty()) throw std::invalid_argument("phase_point: empty eps grid");
  SolverConfig cfg = base;
  cfg.lambda = lambda;
  cfg.snapshot_times.clear();
  const double t0 = std::max(1.0, cfg.t_end / 5.0);

  PhasePoint pt;
  pt.lambda = lambda;
  pt.eps_grid = eps_grid;
  MeanVar slope_acc;
  std::vector<MeanVar> occ_acc(eps_grid.size());
  MeanVar min_acc;
  int zero_hits = 0;
  for (int r = 0; r < replicas; ++r) {
    const auto tr =
        simulate(Field::Ones(cfg.J), cfg, NoiseStream(seed, stream_base + static_cast<std::uint32_t>(r)));
    PhaseReplica rep;
    const auto ly = estimate_lyapunov(tr, t0, cfg.t_end);
    rep.slope = ly.slope;
    rep.slope_se = ly.slope_se;
    rep.hit_zero = ly.hit_zero;
    for (double eps : eps_grid) rep.occupation.push_back(time_average_occupation(tr, eps));
    rep.mean_min = time_average_series(tr.times, tr.min_series, [](double v) { return v; });
    if (rep.hit_zero) {
      ++zero_hits;
    } else {
      slope_acc.add(rep.slope);
    }
    for (std::size_t e = 0; e < eps_grid.size(); ++e) occ_acc[e].add(rep.occupation[e]);
    min_acc.add(rep.mean_min);
    pt.replicas.push_back(std::move(rep));
  }
  for (const auto& acc : occ_acc) pt.occupation.push_back(acc.mean);

  const double inf = std::numeric_limits<double>::infinity();
  if (slope_acc.n == 0) {
    pt.slope = -inf;
    pt.slope_ci_lo = -inf;
    pt.slope_ci_hi = -inf;
  } else {
    pt.slope = slope_acc.mean;
    const double half = 1.96 * slope_acc.standard_error();
    pt.slope_ci_lo = pt.slope - half;
    pt.slope_ci_hi = pt.slope + half;
  }

  const bool extinct =
      pt.slope_ci_hi < kExtinctSlopeCeiling || 2 * zero_hits > replicas;
  std::size_t floor_idx = 0;
  double best = inf;
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    const double gap = std::abs(eps_grid[e] - kOccupationFloor);
    if (gap < best) {
      best = gap;
      floor_idx = e;
    }
  }
  const bool persistent = pt.occupation[floor_idx] < kOccupationThreshold &&
                          min_acc.mean > 10.0 * kOccupationFloor;
  if (extinct != persistent)
    pt.verdict = extinct ? PhaseVerdict::extinct : PhaseVerdict::persistent;
  return pt;
}

inline std::vector<PhasePoint> phase_sweep(const std::vector<double>& lambda_grid,
                                           const SolverConfig& base, int replicas,
                                           std::uint64_t seed,
                                           const std::vector<double>& eps_grid = {1e-2, 1e-3,
                                                                                  1e-4}) {
  if (lambda_grid.empty()) throw std::invalid_argument("phase_sweep: empty lambda grid");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i)
    if (lambda_grid[i] <= lambda_grid[i - 1])
      throw std::invalid_argument("phase_sweep: lambda grid strictly increasing");
  std::vector<PhasePoint> points;
  for (std::size_t i = 0; i < lambda_grid.size(); ++i)
    points.push_back(phase_point(lambda_grid[i], base, replicas, eps_grid, seed,
                                 static_cast<std::uint32_t>(i * replicas)));
  return points;
}

}  // namespace rdlab
