#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>

#include "rdlab/torus.hpp"

namespace rdlab {

inline const char* rng_identity() { return "philox4x32-10+box-muller53"; }

// Philox 4x32, 10 rounds. Counter-mode: every output block is a pure
// function of (counter, key), so any draw in the simulation is addressable
// without generator state.
struct Philox4x32 {
  static constexpr std::uint32_t M0 = 0xD2511F53u;
  static constexpr std::uint32_t M1 = 0xCD9E8D57u;
  static constexpr std::uint32_t W0 = 0x9E3779B9u;
  static constexpr std::uint32_t W1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> c,
                                            std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += W0;
      k[1] += W1;
    }
    return c;
  }
};

// Addressed Gaussian/uniform source. Stream ids partition the counter space:
// a coupled pair at replica r uses streams r*arity + slot.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint32_t stream) : seed_(seed), stream_(stream) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  }

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream() const { return stream_; }

  // N(0,1) at (step, cell). Cells 2b and 2b+1 come from counter block b.
  double normal_at(std::uint64_t step, std::uint64_t cell) const {
    const auto v = raw(step, cell >> 1, 0);
    const double u1 = to_unit(v[0], v[1]);
    const double u2 = to_unit(v[2], v[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    return (cell & 1u) ? r * std::sin(a) : r * std::cos(a);
  }

  void fill_slab(std::uint64_t step, Field& out) const {
    const Eigen::Index n = out.size();
    for (Eigen::Index b = 0; 2 * b < n; ++b) {
      const auto v = raw(step, static_cast<std::uint64_t>(b), 0);
      const double u1 = to_unit(v[0], v[1]);
      const double u2 = to_unit(v[2], v[3]);
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double a = 6.283185307179586476925286766559 * u2;
      out[2 * b] = r * std::cos(a);
      if (2 * b + 1 < n) out[2 * b + 1] = r * std::sin(a);
    }
  }

  Field slab(std::uint64_t step, int J) const {
    Field out(J);
    fill_slab(step, out);
    return out;
  }

  // Uniform in (0,1). Tagged so it never aliases a normal_at draw at the
  // same (step, cell).
  double uniform_at(std::uint64_t step, std::uint64_t cell) const {
    const auto v = raw(step, cell, 1);
    return to_unit(v[0], v[1]);
  }

  bool bernoulli_at(std::uint64_t step, std::uint64_t cell, double p) const {
    return uniform_at(step, cell) < p;
  }

 private:
  std::array<std::uint32_t, 4> raw(std::uint64_t step, std::uint64_t cell_block,
                                   std::uint32_t tag) const {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(step),
        static_cast<std::uint32_t>(step >> 32) | (tag << 31),
        static_cast<std::uint32_t>(cell_block), stream_};
    return Philox4x32::block(ctr, key_);
  }

  // 53-bit uniform strictly inside (0,1)
  static double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t m =
        (static_cast<std::uint64_t>(a >> 5) << 26) | static_cast<std::uint64_t>(b >> 6);
    return (static_cast<double>(m) + 0.5) * (1.0 / 9007199254740992.0);
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t seed_;
  std::uint32_t stream_;
};

// Interpolation weights used to blend two noise slabs as a function of the
// pointwise gap between coupled fields: full reuse at gap 0, fully fresh
// noise once the gap reaches 1. Both are 1/2-Holder with constant 1 and
// satisfy f^2 + g^2 = 1.
inline double mixing_f(double y) { return std::sqrt(std::min(std::abs(y), 1.0)); }
inline double mixing_g(double y) { return std::sqrt(1.0 - std::min(std::abs(y), 1.0)); }

// Blend xi_keep and xi_fresh with pointwise weights (gw, fw). Requires the
// weights to sit on the unit circle so the blend is again a standard slab.
inline Field mix_slabs(const Field& xi_keep, const Field& xi_fresh, const Field& gw,
                       const Field& fw) {
  if (xi_keep.size() != xi_fresh.size() || gw.size() != xi_keep.size() ||
      fw.size() != xi_keep.size())
    throw std::invalid_argument("mix_slabs: size mismatch");
  const double defect = ((gw * gw + fw * fw) - 1.0).abs().maxCoeff();
  if (defect > 1e-12) throw std::invalid_argument("mix_slabs: weights off the unit circle");
  return gw * xi_keep + fw * xi_fresh;
}

struct WhitenessReport {
  long long n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double lag1_corr = 0.0;
  bool pass(double mean_tol, double var_tol, double corr_tol) const {
    return std::abs(mean) <= mean_tol && std::abs(variance - 1.0) <= var_tol &&
           std::abs(lag1_corr) <= corr_tol;
  }
};

// First two moments and lag-1 autocorrelation of a sampled sequence. A slab
// accidentally reused across steps shows up as lag1_corr == 1 when the
// sequence walks the same cell through time.
inline WhitenessReport whiteness_test(const std::function<double(long long)>& sample,
                                      long long n) {
  if (n < 2) throw std::invalid_argument("whiteness_test: n >= 2");
  double s = 0.0, s2 = 0.0, cross = 0.0;
  double prev = sample(0);
  s = prev;
  s2 = prev * prev;
  for (long long i = 1; i < n; ++i) {
    const double x = sample(i);
    s += x;
    s2 += x * x;
    cross += prev * x;
    prev = x;
  }
  WhitenessReport r;
  r.n = n;
  r.mean = s / n;
  r.variance = s2 / n - r.mean * r.mean;
  const double denom = r.variance > 1e-300 ? r.variance : 1.0;
  r.lag1_corr = r.variance > 1e-300
                    ? (cross / (n - 1) - r.mean * r.mean) / denom
                    : 1.0;
  return r;
}

}  // namespace rdlab
