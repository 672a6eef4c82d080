#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdlab/noise.hpp"
#include "rdlab/solver.hpp"
#include "rdlab/stats.hpp"

namespace rdlab {

// Dyadic level machine: X_n = log2 of the current level. Below the top level
// M-1 the walk moves +-1 (up with probability p_up in the idealized mode, by
// stage outcome in the embedded mode); any step taken AT the top returns to
// M-2, because doubling past 2^{M-1} resets the level and halving lands on
// the same value.
struct ChainConfig {
  int M = -2;  // top level is 2^{M-1}; requires M <= -1
  double p_up = 2.0 / 3.0;
  SolverConfig stage;  // embedded mode field solver
  int max_stages = 100000;
  double stage_timeout = 1e3;
};

inline void validate(const ChainConfig& cfg) {
  if (cfg.M > -1) throw std::invalid_argument("ChainConfig: M <= -1");
  if (!(cfg.p_up > 0.5) || cfg.p_up > 1.0)
    throw std::invalid_argument("ChainConfig: p_up in (1/2, 1]");
}

enum class StageOutcome { up, down, blowout };

inline const char* stage_outcome_name(StageOutcome o) {
  switch (o) {
    case StageOutcome::up: return "up";
    case StageOutcome::down: return "down";
    case StageOutcome::blowout: return "blowout";
  }
  throw std::logic_error("stage_outcome_name: bad outcome");
}

struct ChainRecord {
  int M = -2;
  std::vector<int> X;  // X[0] = M-2
  std::vector<StageOutcome> outcomes;
  std::vector<double> durations;  // embedded mode only
  // visit times of the top level M-1 on the step clock, and the lengths of
  // the climbs M-2 -> M-1 that precede them (the post-visit return step is
  // excluded from beta, so sum(beta[0..n-1]) + (n-1) = alpha[n-1])
  std::vector<long long> alpha;
  std::vector<long long> beta;
  std::map<int, long long> occupation;  // level -> count over X[1..]
};

namespace detail {

// Shared bookkeeping for both modes: push the next value of X given the
// outcome of one step/stage, maintaining reflection, visits, and climbs.
class ChainAccumulator {
 public:
  explicit ChainAccumulator(int M) : M_(M) {
    rec_.M = M;
    rec_.X.push_back(M - 2);
  }

  void step(StageOutcome out) {
    const int x = rec_.X.back();
    ++steps_since_top_;
    int next;
    if (x >= M_ - 1) {
      next = M_ - 2;  // reset: both the doubling cap and the halving land here
      steps_since_top_ = 0;
    } else {
      next = out == StageOutcome::up ? x + 1 : x - 1;
    }
    if (next == M_ - 1) {
      rec_.alpha.push_back(static_cast<long long>(rec_.X.size()));
      rec_.beta.push_back(steps_since_top_);
    }
    rec_.outcomes.push_back(out);
    rec_.X.push_back(next);
    ++rec_.occupation[next];
  }

  int current() const { return rec_.X.back(); }

  ChainRecord take() { return std::move(rec_); }

 private:
  int M_;
  long long steps_since_top_ = 0;
  ChainRecord rec_;
};

}  // namespace detail

inline ChainRecord run_ideal_chain(const ChainConfig& cfg, long long steps,
                                   const NoiseStream& stream) {
  validate(cfg);
  if (steps < 1) throw std::invalid_argument("run_ideal_chain: steps >= 1");
  detail::ChainAccumulator acc(cfg.M);
  for (long long n = 0; n < steps; ++n)
    acc.step(stream.bernoulli_at(static_cast<std::uint64_t>(n), 0, cfg.p_up)
                 ? StageOutcome::up
                 : StageOutcome::down);
  return acc.take();
}

// Fraction of recorded states at or below level -k (initial state excluded).
inline double occupation_fraction(const ChainRecord& rec, int k) {
  const std::size_t n = rec.X.size() - 1;
  if (n < 1000) throw std::invalid_argument("occupation_fraction: record too short");
  long long hits = 0;
  for (std::size_t j = 1; j < rec.X.size(); ++j)
    if (rec.X[j] <= -k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct ExcursionRow {
  int k = 0;
  double bound = 0.0;     // sqrt(4pq)/(1-sqrt(4pq)) * (q/p)^{k/2}
  double mc_mean = 0.0;   // MC estimate of E[#{n >= 1: S_n <= -k}]
  double mc_se = 0.0;
};

// Expected time spent at or below -k by the free p-biased walk from 0,
// against the closed-form envelope. Walks stop once 40 above the start
// (return probability (q/p)^40) or after 20000 steps.
inline std::vector<ExcursionRow> excursion_bound_check(double p,
                                                       const std::vector<int>& k_grid,
                                                       int samples,
                                                       const NoiseStream& stream) {
  if (!(p > 0.5) || p > 1.0)
    throw std::invalid_argument("excursion_bound_check: p in (1/2, 1]");
  if (samples < 1) throw std::invalid_argument("excursion_bound_check: samples >= 1");
  for (int k : k_grid)
    if (k < 0) throw std::invalid_argument("excursion_bound_check: k >= 0");

  const double q = 1.0 - p;
  std::vector<MeanVar> acc(k_grid.size());
  for (int w = 0; w < samples; ++w) {
    std::vector<long long> counts(k_grid.size(), 0);
    long long s = 0;
    for (long long n = 1; n <= 20000 && s < 40; ++n) {
      s += stream.bernoulli_at(static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(n), p)
               ? 1
               : -1;
      for (std::size_t i = 0; i < k_grid.size(); ++i)
        if (s <= -static_cast<long long>(k_grid[i])) ++counts[i];
    }
    for (std::size_t i = 0; i < k_grid.size(); ++i)
      acc[i].add(static_cast<double>(counts[i]));
  }

  std::vector<ExcursionRow> out;
  const double root = std::sqrt(4.0 * p * q);
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    ExcursionRow row;
    row.k = k_grid[i];
    row.bound = p < 1.0 ? root / (1.0 - root) * std::pow(q / p, 0.5 * row.k) : 0.0;
    row.mc_mean = acc[i].mean;
    row.mc_se = acc[i].standard_error();
    out.push_back(row);
  }
  return out;
}

struct StageResult {
  StageOutcome outcome = StageOutcome::up;
  double duration = 0.0;
};

struct StageTimeoutError : std::runtime_error {
  double elapsed;
  double final_inf;
  double final_sup;
  StageTimeoutError(double t, double lo, double hi)
      : std::runtime_error("stage hit no boundary before timeout (t=" +
                           std::to_string(t) + ", inf=" + std::to_string(lo) +
                           ", sup=" + std::to_string(hi) + ")"),
        elapsed(t),
        final_inf(lo),
        final_sup(hi) {}
};

// One level stage: start from the constant profile L, evolve with constant
// drift L/2 plus the multiplicative noise of cfg.stage, stop at the first
// grid time where inf >= 2L (up), inf <= L/2 (down), or sup >= 4L (blowout),
// checked in that order. A constant drift commutes exactly with the implicit
// heat solve, so it is applied after the stepper's update.
inline StageResult run_embedded_stage(double L, const ChainConfig& cfg,
                                      const NoiseStream& stream) {
  validate(cfg);
  if (!(L > 0.0) || L > std::ldexp(1.0, cfg.M - 1))
    throw std::invalid_argument("run_embedded_stage: L in (0, 2^{M-1}]");

  SolverConfig scfg = cfg.stage;
  scfg.potential = PotentialSpec::drift_off();
  Stepper st(scfg);
  Field w = Field::Constant(scfg.J, L);
  Field slab(scfg.J);
  const double kick = st.dt() * 0.5 * L;
  double t = 0.0;
  for (long long n = 0; t < cfg.stage_timeout; ++n) {
    stream.fill_slab(static_cast<std::uint64_t>(n), slab);
    st.advance(w, slab, n);
    w += kick;
    t = static_cast<double>(n + 1) * st.dt();
    const double lo = w.minCoeff(), hi = w.maxCoeff();
    if (lo >= 2.0 * L) return {StageOutcome::up, t};
    if (lo <= 0.5 * L) return {StageOutcome::down, t};
    if (hi >= 4.0 * L) return {StageOutcome::blowout, t};
  }
  throw StageTimeoutError(t, w.minCoeff(), w.maxCoeff());
}

// Chain of stages with dyadic level updates: up doubles the level unless it
// is already at the top 2^{M-1} (reset to 2^{M-2}); down/blowout halve it.
// Stage n of replica r draws from stream id r*max_stages + n so stages and
// replicas never share counters.
inline ChainRecord run_embedded_chain(const ChainConfig& cfg, int stages,
                                      std::uint64_t seed, std::uint32_t replica = 0) {
  validate(cfg);
  if (stages < 1 || stages > cfg.max_stages)
    throw std::invalid_argument("run_embedded_chain: stages in [1, max_stages]");
  detail::ChainAccumulator acc(cfg.M);
  std::vector<double> durations;
  for (int n = 0; n < stages; ++n) {
    if (acc.current() < -900)
      throw std::runtime_error(
          "run_embedded_chain: level underflow, the walk is in an all-down regime");
    const NoiseStream stream(
        seed, replica * static_cast<std::uint32_t>(cfg.max_stages) + n);
    const auto res = run_embedded_stage(std::ldexp(1.0, acc.current()), cfg, stream);
    durations.push_back(res.duration);
    acc.step(res.outcome);
  }
  ChainRecord rec = acc.take();
  rec.durations = std::move(durations);
  return rec;
}

}  // namespace rdlab
