#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rdlab/torus.hpp"

namespace rdlab {

// Heat kernel p_t(x,y) for d/dt = d^2/dx^2 on the circle of length 2, mass
// normalized so that the integral over the circle is 1 for every t.
struct KernelEvalConfig {
  int image_terms = 10;    // minimum half-width of the Gaussian image sum
  int fourier_modes = 128; // minimum truncation of the cosine series
  double crossover_time = 0.2;
};

namespace detail {

// Gaussian images decay like exp(-k^2/t): half-width 3 + 10*sqrt(t) puts the
// first dropped term below machine epsilon for all t.
inline int image_halfwidth(double t, const KernelEvalConfig& cfg) {
  return std::max(cfg.image_terms, 3 + static_cast<int>(std::ceil(10.0 * std::sqrt(t))));
}

// Cosine modes decay like exp(-pi^2 k^2 t): k beyond 6.3/sqrt(t) is below
// machine epsilon. The config value acts as a floor, never a ceiling, so the
// representation-agreement invariant holds for every t.
inline int fourier_halfwidth(double t, const KernelEvalConfig& cfg) {
  const int need = 2 + static_cast<int>(std::ceil(6.3 / std::sqrt(t)));
  return std::max(cfg.fourier_modes, need);
}

}  // namespace detail

inline double kernel_image_sum(double t, double x, double y,
                               const KernelEvalConfig& cfg = {}) {
  if (t <= 0.0) throw std::domain_error("kernel_image_sum: t must be positive");
  const double d = x - y;
  const int K = detail::image_halfwidth(t, cfg);
  double s = 0.0;
  for (int k = -K; k <= K; ++k) {
    const double z = d + 2.0 * k;
    s += std::exp(-z * z / (4.0 * t));
  }
  return s / std::sqrt(4.0 * std::numbers::pi * t);
}

inline double kernel_fourier(double t, double x, double y,
                             const KernelEvalConfig& cfg = {}) {
  if (t <= 0.0) throw std::domain_error("kernel_fourier: t must be positive");
  const double d = x - y;
  const int K = detail::fourier_halfwidth(t, cfg);
  double s = 0.5;
  for (int k = 1; k <= K; ++k) {
    const double pk = std::numbers::pi * k;
    s += std::exp(-pk * pk * t) * std::cos(pk * d);
  }
  return s;
}

// Image sum for small t, cosine series for large t; each converges
// geometrically in its regime.
inline double kernel_value(double t, double x, double y, const KernelEvalConfig& cfg = {}) {
  return t < cfg.crossover_time ? kernel_image_sum(t, x, y, cfg)
                                : kernel_fourier(t, x, y, cfg);
}

// Applies the heat semigroup on the grid as the Fourier multiplier
// exp(-(pi k)^2 t) acting on DFT modes; exact for band-limited fields.
inline Field apply_semigroup(const TorusGrid& grid, const Field& f, double t) {
  if (t < 0.0) throw std::domain_error("apply_semigroup: t must be nonnegative");
  if (f.size() != grid.J) throw std::invalid_argument("apply_semigroup: size mismatch");
  if (t == 0.0) return f;
  Eigen::FFT<double> fft;
  std::vector<double> in(f.data(), f.data() + f.size());
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, in);  // full-length spectrum, modes j and J-j conjugate
  const int J = grid.J;
  for (int j = 0; j < J; ++j) {
    const int k = j <= J / 2 ? j : J - j;
    const double pk = std::numbers::pi * k;
    spec[j] *= std::exp(-pk * pk * t);
  }
  std::vector<double> out;
  fft.inv(out, spec);
  return Eigen::Map<const Field>(out.data(), J);
}

// Integral over s in (0, t_max] of the squared L2(circle) distance between
// p_s(x,.) and p_s(z,.), by the exact mode-wise series:
//   sum_k (1 - exp(-2 pi^2 k^2 t)) (1 - cos(pi k (x-z))) / (pi^2 k^2).
inline double kernel_l2_difference(double x, double z, double t_max,
                                   const KernelEvalConfig& cfg = {}) {
  if (t_max <= 0.0) throw std::domain_error("kernel_l2_difference: t_max must be positive");
  if (torus_distance(x, z) == 0.0) return 0.0;
  const double d = std::abs(wrap_point(x) - wrap_point(z));  // in [0,2)
  // Split the series sum_k (1 - e^{-2 pi^2 k^2 t})(1 - cos(pi k d))/(pi k)^2:
  // the t-free part sums in closed form to d/2 - d^2/4 (Fourier series of the
  // triangle wave), and the remainder decays like a Gaussian in k.
  double s = d / 2.0 - d * d / 4.0;
  const int K = 3 + static_cast<int>(std::ceil(2.0 / std::sqrt(t_max)));
  for (int k = 1; k <= K; ++k) {
    const double pk = std::numbers::pi * k;
    s -= std::exp(-2.0 * pk * pk * t_max) * (1.0 - std::cos(pk * d)) / (pk * pk);
  }
  return s;
}

// Same integrand with |.| in place of (.)^2, via nested quadrature. The
// substitution s = t_max u^2 regularizes the 1/sqrt(s) blow-up at s=0; the
// inner integral uses the periodic rectangle rule (spectrally accurate).
inline double kernel_l1_difference(double x, double z, double t_max,
                                   const KernelEvalConfig& cfg = {}, int time_nodes = 160,
                                   int space_nodes = 512) {
  if (t_max <= 0.0) throw std::domain_error("kernel_l1_difference: t_max must be positive");
  if (torus_distance(x, z) == 0.0) return 0.0;
  const double dy = 2.0 / space_nodes;
  double total = 0.0;
  for (int m = 0; m < time_nodes; ++m) {
    const double u = (m + 0.5) / time_nodes;
    const double s = t_max * u * u;
    double inner = 0.0;
    for (int i = 0; i < space_nodes; ++i) {
      const double yy = -1.0 + i * dy;
      inner += std::abs(kernel_value(s, x, yy, cfg) - kernel_value(s, z, yy, cfg));
    }
    inner *= dy;
    total += inner * 2.0 * t_max * u / time_nodes;
  }
  return total;
}

// max_x | int p_t(x,y) p_s(y,z) dy - p_{t+s}(x,z) | on a coarse x-lattice,
// with the y-integral on a J-point periodic rectangle rule.
inline double chapman_kolmogorov_residual(double t, double s, double z, int J = 512,
                                          int x_probes = 16,
                                          const KernelEvalConfig& cfg = {}) {
  const double dy = 2.0 / J;
  double worst = 0.0;
  for (int ix = 0; ix < x_probes; ++ix) {
    const double x = -1.0 + 2.0 * ix / x_probes;
    double conv = 0.0;
    for (int i = 0; i < J; ++i) {
      const double y = -1.0 + i * dy;
      conv += kernel_value(t, x, y, cfg) * kernel_value(s, y, z, cfg);
    }
    conv *= dy;
    worst = std::max(worst, std::abs(conv - kernel_value(t + s, x, z, cfg)));
  }
  return worst;
}

}  // namespace rdlab
