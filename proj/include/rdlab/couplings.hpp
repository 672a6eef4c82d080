#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rdlab/noise.hpp"
#include "rdlab/solver.hpp"
#include "rdlab/stats.hpp"
#include "rdlab/torus.hpp"

namespace rdlab {

enum class CouplingKind { natural, independent, pm, am };

inline int coupling_arity(CouplingKind k) {
  switch (k) {
    case CouplingKind::natural: return 1;
    case CouplingKind::independent: return 2;
    case CouplingKind::pm: return 2;
    case CouplingKind::am: return 3;
  }
  throw std::logic_error("coupling_arity: bad kind");
}

inline const char* coupling_name(CouplingKind k) {
  switch (k) {
    case CouplingKind::natural: return "natural";
    case CouplingKind::independent: return "independent";
    case CouplingKind::pm: return "pm";
    case CouplingKind::am: return "am";
  }
  throw std::logic_error("coupling_name: bad kind");
}

struct CouplingState {
  CouplingKind kind = CouplingKind::natural;
  Field psi1, psi2;
  std::optional<Field> anchor;  // am only
  bool merged = false;
  std::optional<double> tau;
  double time = 0.0;
  long long step_index = 0;
  std::vector<double> times;
  std::vector<double> mass_series;  // X(t) = integral of psi1 - psi2
};

inline CouplingState make_coupled(Field psi1, Field psi2, CouplingKind kind) {
  if (psi1.size() != psi2.size())
    throw std::invalid_argument("make_coupled: field sizes differ");
  CouplingState s;
  s.kind = kind;
  s.psi1 = std::move(psi1);
  s.psi2 = std::move(psi2);
  if (kind == CouplingKind::am) s.anchor = s.psi1.max(s.psi2);
  const TorusGrid g(static_cast<int>(s.psi1.size()));
  s.times.push_back(0.0);
  s.mass_series.push_back(haar_integral(g, s.psi1 - s.psi2));
  return s;
}

namespace detail {

inline Field mixed_partner_slab(const Field& shared, const Field& fresh, const Field& gap) {
  const Eigen::Index n = gap.size();
  Field gw(n), fw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gw[i] = mixing_g(gap[i]);
    fw[i] = mixing_f(gap[i]);
  }
  return mix_slabs(shared, fresh, gw, fw);
}

}  // namespace detail

// One coupled update. Weights are evaluated at the pre-step fields.  After a
// merge the pair degenerates to shared stepping: psi1 advances by its
// marginal rule and psi2 is a bit-copy, which keeps the pair identical
// forever by construction.
inline void couple_step(CouplingState& s, const std::vector<const NoiseStream*>& streams,
                        Stepper& st) {
  if (static_cast<int>(streams.size()) != coupling_arity(s.kind))
    throw std::invalid_argument("couple_step: stream arity mismatch");
  if (s.kind == CouplingKind::am && !s.anchor)
    throw std::invalid_argument("couple_step: anchored kind without anchor");
  const int J = static_cast<int>(s.psi1.size());
  const auto n = static_cast<std::uint64_t>(s.step_index);
  const Field slab0 = streams[0]->slab(n, J);

  if (s.merged) {
    if (s.kind == CouplingKind::am) {
      const Field slab1 = streams[1]->slab(n, J);
      const Field mixed = detail::mixed_partner_slab(slab0, slab1, *s.anchor - s.psi1);
      st.advance(*s.anchor, slab0, s.step_index);
      st.advance(s.psi1, mixed, s.step_index);
    } else {
      st.advance(s.psi1, slab0, s.step_index);
    }
    s.psi2 = s.psi1;
  } else {
    switch (s.kind) {
      case CouplingKind::natural:
        st.advance(s.psi1, slab0, s.step_index);
        st.advance(s.psi2, slab0, s.step_index);
        break;
      case CouplingKind::independent: {
        const Field slab1 = streams[1]->slab(n, J);
        st.advance(s.psi1, slab0, s.step_index);
        st.advance(s.psi2, slab1, s.step_index);
        break;
      }
      case CouplingKind::pm: {
        const Field slab1 = streams[1]->slab(n, J);
        const Field mixed = detail::mixed_partner_slab(slab0, slab1, s.psi1 - s.psi2);
        st.advance(s.psi1, slab0, s.step_index);
        st.advance(s.psi2, mixed, s.step_index);
        break;
      }
      case CouplingKind::am: {
        const Field slab1 = streams[1]->slab(n, J);
        const Field slab2 = streams[2]->slab(n, J);
        const Field mixed1 = detail::mixed_partner_slab(slab0, slab1, *s.anchor - s.psi1);
        const Field mixed2 = detail::mixed_partner_slab(slab0, slab2, *s.anchor - s.psi2);
        st.advance(*s.anchor, slab0, s.step_index);
        st.advance(s.psi1, mixed1, s.step_index);
        st.advance(s.psi2, mixed2, s.step_index);
        break;
      }
    }
  }
  ++s.step_index;
  s.time = static_cast<double>(s.step_index) * st.dt();
  const TorusGrid g(J);
  s.times.push_back(s.time);
  s.mass_series.push_back(haar_integral(g, s.psi1 - s.psi2));
}

inline void detect_merge(CouplingState& s, double merge_tol) {
  if (merge_tol < 0.0) throw std::invalid_argument("detect_merge: merge_tol >= 0");
  if (s.merged) return;
  if (sup_distance(s.psi1, s.psi2) <= merge_tol) {
    s.psi2 = s.psi1;
    s.merged = true;
    s.tau = s.time;
  }
}

// Default snap tolerance: the exact-equality hitting time of the continuum
// construction is approached, never attained, by the scheme, so the pair is
// snapped once the gap is far below every other scale in the run.
inline double default_merge_tol(const CouplingState& s, double factor = 1e-10) {
  return factor * std::max(s.psi1.maxCoeff(), s.psi2.maxCoeff());
}

// The smallest gap the blended-noise update can hold: the fresh-noise kick on
// a cell with gap d has size lambda*Lip*sqrt(dt/dx)*sqrt(d), and balancing
// kick against gap leaves d ~ (lambda*Lip)^2 * dt/dx. Success experiments
// that stand in for the continuum merge event use a few multiples of this
// floor; the bit-exact default above is unreachable in finite time.
inline double coupling_noise_floor(const SolverConfig& cfg) {
  const double a = cfg.lambda * cfg.diffusion.lip;
  return a * a * resolve_dt(cfg) / (2.0 / cfg.J);
}

inline CouplingState run_coupled(const Field& psi10, const Field& psi20, CouplingKind kind,
                                 const SolverConfig& cfg, std::uint64_t seed,
                                 std::uint32_t replica, double merge_tol_factor = 1e-10,
                                 std::optional<double> merge_tol_abs = {}) {
  const int arity = coupling_arity(kind);
  std::vector<NoiseStream> owned;
  owned.reserve(arity);
  for (int slot = 0; slot < arity; ++slot)
    owned.emplace_back(seed, replica * static_cast<std::uint32_t>(arity) + slot);
  std::vector<const NoiseStream*> streams;
  for (const auto& st : owned) streams.push_back(&st);

  Stepper stepper(cfg);
  CouplingState state = make_coupled(psi10, psi20, kind);
  const auto tol = [&] {
    return merge_tol_abs ? *merge_tol_abs : default_merge_tol(state, merge_tol_factor);
  };
  detect_merge(state, tol());
  const long long n_steps =
      static_cast<long long>(std::ceil(cfg.t_end / stepper.dt() - 1e-9));
  for (long long n = 0; n < n_steps; ++n) {
    couple_step(state, streams, stepper);
    if (!state.merged) detect_merge(state, tol());
  }
  return state;
}

struct MassAuditReport {
  double min_mass = 0.0;           // most negative X(t) seen anywhere
  double worst_violation_z = 0.0;  // largest upward move of mean Y in SE units
  bool monotone_within_2se = true;
};

// Checks that Y(t) = exp(-t) X(t) has a non-increasing ensemble mean, and
// that the pairwise-ordered mass X never goes meaningfully negative.
// Adjacent comparisons are paired across replicas, which is what makes the
// 2-SE band tight enough to be informative.
inline MassAuditReport mass_supermartingale_audit(const std::vector<CouplingState>& ensemble,
                                                  int max_points = 40) {
  if (ensemble.empty())
    throw std::invalid_argument("mass_supermartingale_audit: empty ensemble");
  for (const auto& s : ensemble)
    if (s.kind != CouplingKind::pm)
      throw std::invalid_argument("mass_supermartingale_audit: pairwise-ordered kind only");
  const std::size_t L = ensemble.front().mass_series.size();
  for (const auto& s : ensemble)
    if (s.mass_series.size() != L)
      throw std::invalid_argument("mass_supermartingale_audit: ragged ensemble");

  MassAuditReport rep;
  rep.min_mass = ensemble.front().mass_series.front();
  for (const auto& s : ensemble)
    for (double x : s.mass_series) rep.min_mass = std::min(rep.min_mass, x);

  const int points = static_cast<int>(std::min<std::size_t>(max_points, L));
  if (points < 2) return rep;
  std::vector<std::size_t> idx(points);
  for (int k = 0; k < points; ++k) idx[k] = k * (L - 1) / (points - 1);

  for (int k = 0; k + 1 < points; ++k) {
    const std::size_t i = idx[k], j = idx[k + 1];
    MeanVar diff;
    for (const auto& s : ensemble) {
      const double yi = std::exp(-s.times[i]) * s.mass_series[i];
      const double yj = std::exp(-s.times[j]) * s.mass_series[j];
      diff.add(yi - yj);
    }
    const double se = diff.standard_error();
    if (se > 0.0) {
      const double z = -diff.mean / se;
      rep.worst_violation_z = std::max(rep.worst_violation_z, z);
      if (z > 2.0) rep.monotone_within_2se = false;
    } else if (diff.mean < -1e-12) {
      rep.worst_violation_z = std::numeric_limits<double>::infinity();
      rep.monotone_within_2se = false;
    }
  }
  return rep;
}

struct SuccessRow {
  double delta = 0.0;
  int replicas = 0;
  int merged_count = 0;
  double p_hat = 0.0;
  double ci_halfwidth = 0.0;
  double mean_tau = 0.0;  // among merged replicas; 0 if none
};

struct SuccessTable {
  std::vector<SuccessRow> rows;
  bool monotone_within_ci = true;
};

// Merge-probability curve over initial L1 distances. Initial data are the
// constant profiles psi2 = base, psi1 = base + delta/2 (L1 distance on the
// length-2 circle is then exactly delta). Success means the pair snapped at
// the given tolerance before t_end.
inline SuccessTable coupling_success_experiment(const std::vector<double>& delta_grid,
                                                CouplingKind kind, const SolverConfig& cfg,
                                                int replicas, std::uint64_t seed,
                                                double base_level,
                                                std::optional<double> merge_tol_abs = {}) {
  if (kind != CouplingKind::pm && kind != CouplingKind::am)
    throw std::invalid_argument("coupling_success_experiment: pm or am only");
  if (replicas < 1) throw std::invalid_argument("coupling_success_experiment: replicas >= 1");
  for (std::size_t i = 0; i < delta_grid.size(); ++i) {
    if (delta_grid[i] < 0.0)
      throw std::invalid_argument("coupling_success_experiment: deltas must be >= 0");
    if (i > 0 && delta_grid[i] >= delta_grid[i - 1])
      throw std::invalid_argument("coupling_success_experiment: deltas must decrease");
  }

  SuccessTable table;
  for (std::size_t d = 0; d < delta_grid.size(); ++d) {
    SuccessRow row;
    row.delta = delta_grid[d];
    row.replicas = replicas;
    double tau_sum = 0.0;
    const Field psi2 = Field::Constant(cfg.J, base_level);
    const Field psi1 = Field::Constant(cfg.J, base_level + 0.5 * row.delta);
    for (int r = 0; r < replicas; ++r) {
      const auto rep_id = static_cast<std::uint32_t>(d) * replicas + r;
      const auto state =
          run_coupled(psi1, psi2, kind, cfg, seed, rep_id, 1e-10, merge_tol_abs);
      if (state.merged) {
        ++row.merged_count;
        tau_sum += *state.tau;
      }
    }
    row.p_hat = static_cast<double>(row.merged_count) / replicas;
    row.ci_halfwidth =
        1.96 * std::sqrt(row.p_hat * (1.0 - row.p_hat) / replicas) + 0.5 / replicas;
    row.mean_tau = row.merged_count > 0 ? tau_sum / row.merged_count : 0.0;
    table.rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
    const auto& a = table.rows[i];
    const auto& b = table.rows[i + 1];
    if (b.p_hat < a.p_hat - (a.ci_halfwidth + b.ci_halfwidth))
      table.monotone_within_ci = false;
  }
  return table;
}

struct MarginalSummary {
  MeanVar stats;                  // sup-norm samples
  std::vector<double> sample;     // raw U_t values, one per replica
};

// Sample the law of psi2's sup norm at a fixed time under a coupling kind.
inline MarginalSummary marginal_law_sample(CouplingKind kind, const Field& psi10,
                                           const Field& psi20, const SolverConfig& cfg,
                                           int replicas, std::uint64_t seed) {
  MarginalSummary out;
  for (int r = 0; r < replicas; ++r) {
    // tol factor 0: snap only on exact equality, where it is a bitwise no-op,
    // so the sampled marginal law is untouched.
    const auto state =
        run_coupled(psi10, psi20, kind, cfg, seed, static_cast<std::uint32_t>(r), 0.0);
    out.sample.push_back(state.psi2.maxCoeff());
    out.stats.add(out.sample.back());
  }
  return out;
}

// Largest z-score across mean, variance, and quartiles of two samples.
inline double compare_marginals(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 30 || b.size() < 30)
    throw std::invalid_argument("compare_marginals: need >= 30 per sample");
  MeanVar ma, mb;
  for (double x : a) ma.add(x);
  for (double x : b) mb.add(x);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double worst =
      std::abs(ma.mean - mb.mean) /
      std::sqrt(ma.variance() / na + mb.variance() / nb + 1e-300);
  // normal-theory SE for the variance
  const double var_se =
      std::sqrt(2.0 * ma.variance() * ma.variance() / (na - 1) +
                2.0 * mb.variance() * mb.variance() / (nb - 1) + 1e-300);
  worst = std::max(worst, std::abs(ma.variance() - mb.variance()) / var_se);
  for (double q : {0.25, 0.5, 0.75}) {
    const double qa = quantile(a, q), qb = quantile(b, q);
    // density near the quantile from a pooled finite difference
    std::vector<double> pooled = a;
    pooled.insert(pooled.end(), b.begin(), b.end());
    const double h = 0.1;
    const double width = quantile(pooled, std::min(q + h, 1.0)) -
                         quantile(pooled, std::max(q - h, 0.0));
    const double dens = width > 1e-300 ? (2.0 * h) / width : 0.0;
    if (dens <= 0.0) continue;
    const double se = std::sqrt(q * (1.0 - q)) / dens * std::sqrt(1.0 / na + 1.0 / nb);
    worst = std::max(worst, std::abs(qa - qb) / (se + 1e-300));
  }
  return worst;
}

}  // namespace rdlab
