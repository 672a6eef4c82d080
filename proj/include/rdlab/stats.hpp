#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace rdlab {

// Streaming mean/variance accumulator (Welford). Numerically stable for the
// long replica loops used by the Monte Carlo experiments.
struct MeanVar {
  long long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double stddev() const { return std::sqrt(variance()); }
  double standard_error() const {
    return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

// Ordinary least squares y = a + b x with the usual residual-based slope
// standard error. Requires >= 3 points for a finite slope_se.
inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_line: need matching vectors of size >= 2");
  const std::size_t n = xs.size();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - (out.intercept + out.slope * xs[i]);
      rss += r * r;
    }
    out.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return out;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(|Z| < c) for standard normal Z.
inline double normal_abs_cdf(double c) {
  if (c <= 0.0) return 0.0;
  return std::erf(c / std::sqrt(2.0));
}

// q-th empirical quantile (linear interpolation) of an unsorted sample.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  q = std::clamp(q, 0.0, 1.0);
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

// Two-sided Kolmogorov-Smirnov statistic of a sample against a reference CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// Standard error of the mean of an autocorrelated series via batch means.
inline double batch_means_se(const std::vector<double>& series, int batches = 30) {
  if (batches < 2) throw std::invalid_argument("batch_means_se: need >= 2 batches");
  if (series.size() < static_cast<std::size_t>(2 * batches)) batches = std::max<int>(2, static_cast<int>(series.size() / 2));
  const std::size_t len = series.size() / batches;
  MeanVar mv;
  for (int b = 0; b < batches; ++b) {
    double s = 0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += series[i];
    mv.add(s / static_cast<double>(len));
  }
  return mv.standard_error();
}

}  // namespace rdlab
