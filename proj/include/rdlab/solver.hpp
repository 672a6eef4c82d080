#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "rdlab/noise.hpp"
#include "rdlab/reaction.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/torus.hpp"

namespace rdlab {

enum class Scheme { explicit_euler, semi_implicit_laplacian };

struct SolverConfig {
  int J = 256;
  double dt = 0.0;  // <= 0 asks resolve_dt for the scheme default
  double t_end = 1.0;
  double lambda = 0.0;
  PotentialSpec potential = PotentialSpec::kpp();
  DiffusionSpec diffusion = DiffusionSpec::linear(1.0);
  std::optional<double> truncation_N;  // absent -> raw drift
  Scheme scheme = Scheme::semi_implicit_laplacian;
  bool clamp_nonnegative = true;
  std::vector<double> snapshot_times;  // sorted, within [0, t_end]
};

struct BlowUpError : std::runtime_error {
  long long step;
  double time;
  BlowUpError(long long s, double t)
      : std::runtime_error("non-finite field at step " + std::to_string(s) +
                           ", t = " + std::to_string(t)),
        step(s),
        time(t) {}
};

// Step-size policy: explicit stays under the dx^2/2 diffusion limit with a
// factor-2 margin; the implicit-diffusion scheme is limited only by the
// multiplicative noise, which wants lambda*Lip*sqrt(dt/dx) well below 1.
inline double resolve_dt(const SolverConfig& cfg) {
  const double dx = 2.0 / cfg.J;
  if (cfg.dt > 0.0) {
    if (cfg.scheme == Scheme::explicit_euler && cfg.dt > 0.5 * dx * dx * (1.0 + 1e-12))
      throw std::invalid_argument("resolve_dt: explicit scheme needs dt <= dx^2/2");
    return cfg.dt;
  }
  if (cfg.scheme == Scheme::explicit_euler) return 0.25 * dx * dx;
  const double amp = cfg.lambda * cfg.diffusion.lip;
  double dt = dx;
  if (amp > 0.0) dt = std::min(dt, 0.09 * dx / (amp * amp));
  return dt;
}

// One-trajectory integrator. Explicit: u' = u + dt*lap(u) + dt*V(u) + noise.
// Semi-implicit: (I - dt*lap) u' = u + dt*V(u) + noise, solved by the grid
// Fourier multiplier; the spatial mean is split off first, so mode 0 (whose
// multiplier is exactly 1) never touches the FFT and constants are preserved
// bit-exactly. Noise enters explicitly in both schemes.
class Stepper {
 public:
  explicit Stepper(const SolverConfig& cfg)
      : cfg_(cfg), grid_(cfg.J), dt_(resolve_dt(cfg)) {
    noise_scale_ = std::sqrt(dt_ / grid_.dx);
    if (cfg_.scheme == Scheme::semi_implicit_laplacian) {
      inv_symbol_.resize(cfg_.J);
      const double r = dt_ / (grid_.dx * grid_.dx);
      for (int j = 0; j < cfg_.J; ++j) {
        const double s = std::sin(M_PI * j / cfg_.J);
        inv_symbol_[j] = 1.0 / (1.0 + 4.0 * r * s * s);
      }
      real_buf_.resize(cfg_.J);
      spec_buf_.resize(cfg_.J);
    }
    drift_.resize(cfg_.J);
    amp_.resize(cfg_.J);
    next_.resize(cfg_.J);
  }

  double dt() const { return dt_; }
  const TorusGrid& grid() const { return grid_; }

  void advance(Field& u, const Field& slab, long long step_index) {
    const int J = cfg_.J;
    fill_drift(u);
    fill_noise_amp(u);
    if (cfg_.scheme == Scheme::explicit_euler) {
      const double r = dt_ / (grid_.dx * grid_.dx);
      for (int i = 0; i < J; ++i) {
        const double um = u[(i + J - 1) % J], up = u[(i + 1) % J];
        next_[i] = u[i] + r * (um - 2.0 * u[i] + up) + dt_ * drift_[i] + amp_[i] * slab[i];
      }
      u.swap(next_);
    } else {
      next_ = u + dt_ * drift_ + amp_ * slab;
      const double m = next_.sum() / J;
      for (int i = 0; i < J; ++i) real_buf_[i] = next_[i] - m;
      fft_.fwd(spec_buf_, real_buf_);
      for (int j = 0; j < J; ++j) spec_buf_[j] *= inv_symbol_[j];
      fft_.inv(real_buf_, spec_buf_);
      for (int i = 0; i < J; ++i) u[i] = m + real_buf_[i];
    }
    if (cfg_.clamp_nonnegative) u = u.max(0.0);
    if (!u.allFinite()) throw BlowUpError(step_index, (step_index + 1) * dt_);
  }

 private:
  void fill_drift(const Field& u) {
    const auto& pot = cfg_.potential;
    if (pot.off) {
      drift_.setZero();
      return;
    }
    if (cfg_.truncation_N) {
      const double N = *cfg_.truncation_N;
      for (int i = 0; i < cfg_.J; ++i) drift_[i] = eval_V_truncated(pot, N, u[i]);
    } else if (!pot.tabulated && pot.nu == 1.0) {
      for (int i = 0; i < cfg_.J; ++i) drift_[i] = u[i] - u[i] * u[i];
    } else if (!pot.tabulated && pot.nu == 2.0) {
      for (int i = 0; i < cfg_.J; ++i) drift_[i] = u[i] - u[i] * u[i] * u[i];
    } else {
      for (int i = 0; i < cfg_.J; ++i) drift_[i] = eval_V(pot, u[i]);
    }
  }

  void fill_noise_amp(const Field& u) {
    if (cfg_.lambda == 0.0) {
      amp_.setZero();
      return;
    }
    const double a = cfg_.lambda * noise_scale_;
    if (cfg_.diffusion.is_linear()) {
      amp_ = (a * cfg_.diffusion.c) * u;
    } else {
      for (int i = 0; i < cfg_.J; ++i) amp_[i] = a * cfg_.diffusion(u[i]);
    }
  }

  SolverConfig cfg_;
  TorusGrid grid_;
  double dt_;
  double noise_scale_;
  std::vector<double> inv_symbol_;
  Eigen::FFT<double> fft_;
  std::vector<double> real_buf_;
  std::vector<std::complex<double>> spec_buf_;
  Field drift_, amp_, next_;
};

// Single update, for tests and callers that manage their own loop.
inline Field step(const Field& f, const Field& slab, const SolverConfig& cfg) {
  Stepper st(cfg);
  Field u = f;
  st.advance(u, slab, 0);
  return u;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<double> min_series;   // L_t
  std::vector<double> max_series;   // U_t
  std::vector<double> mean_series;  // spatial average
  std::vector<std::pair<double, Field>> snapshots;
  double dt = 0.0;
  std::uint64_t config_digest = 0;
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::string rng;
};

namespace detail {

inline void validate_snapshot_times(const SolverConfig& cfg) {
  double prev = 0.0;
  for (double s : cfg.snapshot_times) {
    if (s < 0.0 || s > cfg.t_end * (1.0 + 1e-12))
      throw std::invalid_argument("simulate: snapshot time outside [0, t_end]");
    if (s < prev) throw std::invalid_argument("simulate: snapshot times not sorted");
    prev = s;
  }
}

inline void record(Trajectory& tr, double t, const Field& u) {
  tr.times.push_back(t);
  tr.min_series.push_back(u.minCoeff());
  tr.max_series.push_back(u.maxCoeff());
  tr.mean_series.push_back(u.sum() / static_cast<double>(u.size()));
}

}  // namespace detail

inline Trajectory simulate(const Field& psi0, const SolverConfig& cfg,
                           const NoiseStream& stream) {
  if (psi0.size() != cfg.J) throw std::invalid_argument("simulate: psi0 size != J");
  if (cfg.clamp_nonnegative && (psi0 < 0.0).any())
    throw std::invalid_argument("simulate: negative initial data with clamp on");
  detail::validate_snapshot_times(cfg);

  Stepper st(cfg);
  const double dt = st.dt();
  const long long n_steps = static_cast<long long>(std::ceil(cfg.t_end / dt - 1e-9));

  Trajectory tr;
  tr.dt = dt;
  tr.seed = stream.seed();
  tr.stream = stream.stream();
  tr.rng = rng_identity();

  Field u = psi0;
  Field slab(cfg.J);
  std::size_t sp = 0;
  detail::record(tr, 0.0, u);
  while (sp < cfg.snapshot_times.size() && cfg.snapshot_times[sp] <= 1e-12) {
    tr.snapshots.emplace_back(0.0, u);
    ++sp;
  }
  for (long long n = 0; n < n_steps; ++n) {
    stream.fill_slab(static_cast<std::uint64_t>(n), slab);
    st.advance(u, slab, n);
    const double t = (n + 1) * dt;
    detail::record(tr, t, u);
    while (sp < cfg.snapshot_times.size() && cfg.snapshot_times[sp] <= t + 1e-12) {
      tr.snapshots.emplace_back(t, u);
      ++sp;
    }
  }
  // requests at t_end that missed the last grid time by roundoff
  while (sp < cfg.snapshot_times.size()) {
    tr.snapshots.emplace_back(tr.times.back(), u);
    ++sp;
  }
  return tr;
}

// Natural coupling: both trajectories consume identical slabs.
inline std::pair<Trajectory, Trajectory> simulate_pair_shared_noise(
    const Field& psi0_low, const Field& psi0_high, const SolverConfig& cfg,
    const NoiseStream& stream) {
  if (psi0_low.size() != cfg.J || psi0_high.size() != cfg.J)
    throw std::invalid_argument("simulate_pair_shared_noise: size != J");
  if ((psi0_low > psi0_high).any())
    throw std::invalid_argument("simulate_pair_shared_noise: initial data not ordered");
  detail::validate_snapshot_times(cfg);

  Stepper st_low(cfg), st_high(cfg);
  const double dt = st_low.dt();
  const long long n_steps = static_cast<long long>(std::ceil(cfg.t_end / dt - 1e-9));

  Trajectory lo, hi;
  lo.dt = hi.dt = dt;
  lo.seed = hi.seed = stream.seed();
  lo.stream = hi.stream = stream.stream();
  lo.rng = hi.rng = rng_identity();

  Field ul = psi0_low, uh = psi0_high;
  Field slab(cfg.J);
  std::size_t sp = 0;
  detail::record(lo, 0.0, ul);
  detail::record(hi, 0.0, uh);
  while (sp < cfg.snapshot_times.size() && cfg.snapshot_times[sp] <= 1e-12) {
    lo.snapshots.emplace_back(0.0, ul);
    hi.snapshots.emplace_back(0.0, uh);
    ++sp;
  }
  for (long long n = 0; n < n_steps; ++n) {
    stream.fill_slab(static_cast<std::uint64_t>(n), slab);
    st_low.advance(ul, slab, n);
    st_high.advance(uh, slab, n);
    const double t = (n + 1) * dt;
    detail::record(lo, t, ul);
    detail::record(hi, t, uh);
    while (sp < cfg.snapshot_times.size() && cfg.snapshot_times[sp] <= t + 1e-12) {
      lo.snapshots.emplace_back(t, ul);
      hi.snapshots.emplace_back(t, uh);
      ++sp;
    }
  }
  while (sp < cfg.snapshot_times.size()) {
    lo.snapshots.emplace_back(lo.times.back(), ul);
    hi.snapshots.emplace_back(hi.times.back(), uh);
    ++sp;
  }
  return {std::move(lo), std::move(hi)};
}

struct LyapunovEstimate {
  double slope = 0.0;
  double slope_se = 0.0;
  bool hit_zero = false;
  double hit_time = 0.0;
};

// Least-squares slope of log U_t over [t0, t1]. An exact zero of U anywhere
// in the trajectory short-circuits to slope = -inf with the first hit time.
inline LyapunovEstimate estimate_lyapunov(const Trajectory& tr, double t0, double t1) {
  if (!(t1 > t0)) throw std::invalid_argument("estimate_lyapunov: need t1 > t0");
  if (tr.times.empty() || t0 < tr.times.front() - 1e-12 || t1 > tr.times.back() + 1e-12)
    throw std::invalid_argument("estimate_lyapunov: window outside trajectory");
  LyapunovEstimate out;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (tr.max_series[i] == 0.0) {
      out.hit_zero = true;
      out.hit_time = tr.times[i];
      out.slope = -std::numeric_limits<double>::infinity();
      return out;
    }
  }
  std::vector<double> ts, ls;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (tr.times[i] >= t0 - 1e-12 && tr.times[i] <= t1 + 1e-12) {
      ts.push_back(tr.times[i]);
      ls.push_back(std::log(tr.max_series[i]));
    }
  }
  if (ts.size() < 3) throw std::invalid_argument("estimate_lyapunov: window too thin");
  const LineFit fit = fit_line(ts, ls);
  out.slope = fit.slope;
  out.slope_se = fit.slope_se;
  return out;
}

struct MomentEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  int replicas = 0;
};

// Ensemble-and-space average of |psi(t,x)|^k. Replicas are reduced in index
// order, so the result does not depend on how the ensemble was produced.
inline MomentEstimate moment_estimator(const std::vector<Trajectory>& ensemble, double k,
                                       double t) {
  if (k < 2.0) throw std::domain_error("moment_estimator: k >= 2");
  if (ensemble.size() < 30)
    throw std::invalid_argument("moment_estimator: need >= 30 replicas");
  MeanVar mv;
  for (const Trajectory& tr : ensemble) {
    const Field* f = nullptr;
    for (const auto& [ts, field] : tr.snapshots) {
      if (std::abs(ts - t) <= 1e-6 * std::max(1.0, std::abs(t))) {
        f = &field;
        break;
      }
    }
    if (!f) throw std::invalid_argument("moment_estimator: time not snapshotted");
    mv.add(f->abs().pow(k).sum() / static_cast<double>(f->size()));
  }
  MomentEstimate out;
  out.value = mv.mean;
  out.standard_error = mv.standard_error();
  out.replicas = static_cast<int>(mv.n);
  return out;
}

}  // namespace rdlab
