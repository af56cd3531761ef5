#pragma once

#include "error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace flexcode {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

//! `cells + 1` equally spaced points covering [lo, hi].
inline VectorXd
uniform_grid(std::size_t cells, double lo = 0.0, double hi = 1.0)
{
  if (cells < 1)
    throw ConfigError("grid needs at least one cell");
  VectorXd g(static_cast<Index>(cells + 1));
  for (std::size_t i = 0; i <= cells; ++i)
    g(static_cast<Index>(i)) =
      lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cells);
  g(static_cast<Index>(cells)) = hi;
  return g;
}

//! Trapezoid rule on a uniform grid of `values.size()` points over an
//! interval of length `width`. Divides by the cell count last so that a
//! constant 1 on [0, 1] integrates to exactly 1.
template<typename Vec>
double
trapezoid_uniform(const Vec& values, double width = 1.0)
{
  const Index n = static_cast<Index>(values.size());
  if (n < 2)
    return 0.0;
  double s = 0.5 * (values[0] + values[n - 1]);
  for (Index i = 1; i < n - 1; ++i)
    s += values[i];
  return s * width / static_cast<double>(n - 1);
}

//! Trapezoid weights on a uniform grid; they sum to `width`.
inline VectorXd
trapezoid_weights(Index points, double width = 1.0)
{
  VectorXd w = VectorXd::Constant(points, width / static_cast<double>(points - 1));
  w(0) *= 0.5;
  w(points - 1) *= 0.5;
  return w;
}

//! Trapezoid rule on an arbitrary ascending grid.
inline double
trapezoid(std::span<const double> x, std::span<const double> y)
{
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

//! Linear-interpolation quantile (type 7): h = (n - 1) p.
inline double
quantile(std::vector<double> v, double p)
{
  if (v.empty())
    throw SizeError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double
median(std::vector<double> v)
{
  return quantile(std::move(v), 0.5);
}

inline double
mean(std::span<const double> v)
{
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

//! Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double
sample_sd(std::span<const double> v)
{
  if (v.size() < 2)
    return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v)
    ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline void
require_finite(const MatrixXd& m, const std::string& what)
{
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j)))
        throw NumericError(what + ": non-finite entry at (" + std::to_string(i) +
                           ", " + std::to_string(j) + ")");
}

inline std::vector<double>
to_std(const VectorXd& v)
{
  return { v.data(), v.data() + v.size() };
}

inline VectorXd
to_eigen(std::span<const double> v)
{
  VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out(static_cast<Index>(i)) = v[i];
  return out;
}

//! Rows of `m` at `idx`, in order.
inline MatrixXd
select_rows(const MatrixXd& m, std::span<const Index> idx)
{
  MatrixXd out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(static_cast<Index>(r)) = m.row(idx[r]);
  return out;
}

inline VectorXd
select(const VectorXd& v, std::span<const Index> idx)
{
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    out(static_cast<Index>(r)) = v(idx[r]);
  return out;
}

inline MatrixXd
select_block(const MatrixXd& m, std::span<const Index> rows, std::span<const Index> cols)
{
  MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < rows.size(); ++r)
      out(static_cast<Index>(r), static_cast<Index>(c)) = m(rows[r], cols[c]);
  return out;
}

} // namespace flexcode
