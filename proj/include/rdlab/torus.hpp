#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rdlab {

template <class Scalar>
using FieldT = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
using Field = FieldT<double>;

// Uniform periodic grid on the circle [-1,1) of total length 2.
// Cell i is [x_i, x_i + dx) with x_i = -1 + i*dx; index arithmetic is mod J.
struct TorusGrid {
  int J;
  double dx;

  explicit TorusGrid(int points) : J(points), dx(2.0 / points) {
    if (points < 4 || points % 2 != 0)
      throw std::invalid_argument("TorusGrid: J must be even and >= 4");
  }
  int wrap_index(long long i) const {
    long long m = i % J;
    if (m < 0) m += J;
    return static_cast<int>(m);
  }
  double coord(long long i) const { return -1.0 + wrap_index(i) * dx; }
  Field coordinates() const {
    Field x(J);
    for (int i = 0; i < J; ++i) x[i] = -1.0 + i * dx;
    return x;
  }
};

// Representative of x in [-1,1).
inline double wrap_point(double x) {
  double y = std::fmod(x + 1.0, 2.0);
  if (y < 0) y += 2.0;
  return y - 1.0;
}

// Shortest arc distance between two circle points.
inline double torus_distance(double x, double y) {
  const double d = std::abs(wrap_point(x) - wrap_point(y));
  return std::min(d, 2.0 - d);
}

template <class D>
double infimum(const Eigen::ArrayBase<D>& f) {
  if (f.size() == 0) throw std::invalid_argument("infimum: empty field");
  return f.minCoeff();
}

template <class D>
double supremum(const Eigen::ArrayBase<D>& f) {
  if (f.size() == 0) throw std::invalid_argument("supremum: empty field");
  return f.maxCoeff();
}

// Left-endpoint quadrature: exact for constants, spectrally accurate for
// smooth periodic integrands.
template <class D>
double haar_integral(const TorusGrid& grid, const Eigen::ArrayBase<D>& f) {
  if (f.size() != grid.J) throw std::invalid_argument("haar_integral: size mismatch");
  return f.sum() * grid.dx;
}

template <class D1, class D2>
double l1_distance(const TorusGrid& grid, const Eigen::ArrayBase<D1>& f,
                   const Eigen::ArrayBase<D2>& g) {
  if (f.size() != g.size() || f.size() != grid.J)
    throw std::invalid_argument("l1_distance: size mismatch");
  return (f.derived() - g.derived()).abs().sum() * grid.dx;
}

template <class D1, class D2>
double sup_distance(const Eigen::ArrayBase<D1>& f, const Eigen::ArrayBase<D2>& g) {
  if (f.size() != g.size()) throw std::invalid_argument("sup_distance: size mismatch");
  return (f.derived() - g.derived()).abs().maxCoeff();
}

// max over lags h and positions i of |f(i+h)-f(i)| / d(h)^alpha where d(h) is
// the shortest arc length of the lag. Wrap pairs are included, so a profile
// with a seam jump is dominated by the jump increment.
template <class D>
double holder_seminorm(const TorusGrid& grid, const Eigen::ArrayBase<D>& f, double alpha,
                       const std::vector<int>& lags) {
  if (lags.empty()) throw std::invalid_argument("holder_seminorm: empty lag set");
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("holder_seminorm: alpha in (0,1]");
  if (f.size() != grid.J) throw std::invalid_argument("holder_seminorm: size mismatch");
  double best = 0.0;
  for (int h : lags) {
    if (h < 1 || h > grid.J / 2) throw std::invalid_argument("holder_seminorm: lag out of range");
    const double dist = std::min(h * grid.dx, 2.0 - h * grid.dx);
    const double scale = std::pow(dist, -alpha);
    for (int i = 0; i < grid.J; ++i) {
      const double inc = std::abs(f[grid.wrap_index(i + h)] - f[i]);
      best = std::max(best, inc * scale);
    }
  }
  return best;
}

// max over ordered snapshot pairs of ||f(t+s)-f(t)||_sup / s^theta.
inline double temporal_increment_stat(const std::vector<std::pair<double, Field>>& series,
                                      double theta) {
  if (series.size() < 2) throw std::invalid_argument("temporal_increment_stat: need >= 2 snapshots");
  for (std::size_t i = 1; i < series.size(); ++i)
    if (series[i].first <= series[i - 1].first)
      throw std::invalid_argument("temporal_increment_stat: times must increase");
  double best = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (std::size_t j = i + 1; j < series.size(); ++j) {
      const double s = series[j].first - series[i].first;
      const double inc = (series[j].second - series[i].second).abs().maxCoeff();
      best = std::max(best, inc / std::pow(s, theta));
    }
  }
  return best;
}

}  // namespace rdlab
