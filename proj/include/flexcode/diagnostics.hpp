#pragma once

#include "datasets.hpp"
#include "error.hpp"
#include "numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace flexcode {

//! Highest-density region on a uniform grid. Cells are the intervals
//! between consecutive grid points, each with the trapezoid mass
//! width * (f_a + f_b) / 2.
struct HPDRegion
{
  double level = 0.0;
  double threshold = 0.0;
  double achieved_mass = 0.0;
  std::vector<std::pair<double, double>> segments;
  std::vector<char> cells;

  bool contains(double z) const
  {
    for (const auto& [lo, hi] : segments)
      if (z >= lo && z <= hi)
        return true;
    return false;
  }
  std::size_t cell_count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }
};

inline HPDRegion
hpd_region(const VectorXd& density, const VectorXd& grid, double alpha)
{
  const Index g = grid.size();
  if (g < 2 || density.size() != g)
    throw ShapeError("density and grid must have the same length >= 2");
  const double width = grid(g - 1) - grid(0);
  for (Index i = 0; i < g; ++i)
    if (!(density(i) >= 0.0))
      throw DataError("density is negative or not finite at grid point " + std::to_string(i));
  const double total = trapezoid_uniform(density, width);
  if (std::abs(total - 1.0) > 1e-3)
    throw DataError("density is not normalized (integral " + std::to_string(total) + ")");

  const Index cells = g - 1;
  const double h = width / static_cast<double>(cells);
  std::vector<double> cd(static_cast<std::size_t>(cells));
  for (Index c = 0; c < cells; ++c)
    cd[static_cast<std::size_t>(c)] = 0.5 * (density(c) + density(c + 1));

  HPDRegion r;
  r.level = alpha;
  r.cells.assign(static_cast<std::size_t>(cells), 0);
  if (alpha <= 0.0) {
    r.threshold = std::numeric_limits<double>::infinity();
    return r;
  }
  if (alpha >= 1.0) {
    r.threshold = *std::min_element(cd.begin(), cd.end());
  } else {
    std::vector<std::size_t> order(cd.size());
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
    double acc = 0.0;
    r.threshold = cd[order.back()];
    for (std::size_t c : order) {
      acc += cd[c] * h;
      if (acc >= alpha) {
        r.threshold = cd[c];
        break;
      }
    }
  }
  for (std::size_t c = 0; c < cd.size(); ++c)
    if (cd[c] >= r.threshold) {
      r.cells[c] = 1;
      r.achieved_mass += cd[c] * h;
    }
  for (Index c = 0; c < cells;) {
    if (!r.cells[static_cast<std::size_t>(c)]) {
      ++c;
      continue;
    }
    Index e = c;
    while (e + 1 < cells && r.cells[static_cast<std::size_t>(e + 1)])
      ++e;
    r.segments.emplace_back(grid(c), grid(e + 1));
    c = e + 1;
  }
  return r;
}

struct CoverageCurve
{
  std::vector<double> levels;
  std::vector<double> alpha_hat;
  std::vector<double> half_width;
};

//! Empirical HPD coverage: densities (one row per test point, on `grid`)
//! against the observed responses.
inline CoverageCurve
coverage_curve(const MatrixXd& densities, const VectorXd& grid, std::span<const double> z,
               std::span<const double> levels)
{
  if (z.empty())
    throw SizeError("coverage needs a nonempty test set");
  if (static_cast<Index>(z.size()) != densities.rows())
    throw ShapeError("densities and responses differ in length");
  CoverageCurve c;
  std::vector<double> sorted(levels.begin(), levels.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> hits(sorted.size(), 0);
  for (Index r = 0; r < densities.rows(); ++r) {
    const VectorXd f = densities.row(r).transpose();
    for (std::size_t l = 0; l < sorted.size(); ++l)
      hits[l] += hpd_region(f, grid, sorted[l]).contains(z[static_cast<std::size_t>(r)]);
  }
  const auto n = static_cast<double>(z.size());
  for (std::size_t l = 0; l < sorted.size(); ++l) {
    const double a = static_cast<double>(hits[l]) / n;
    c.levels.push_back(sorted[l]);
    c.alpha_hat.push_back(a);
    c.half_width.push_back(1.96 * std::sqrt(a * (1.0 - a) / n));
  }
  return c;
}

//! Per level: |alpha_hat - alpha| <= 1.96 sqrt(alpha (1 - alpha) / n).
inline std::vector<bool>
within_band(const CoverageCurve& c, std::size_t n)
{
  std::vector<bool> out;
  for (std::size_t l = 0; l < c.levels.size(); ++l) {
    const double a = c.levels[l];
    const double band = 1.96 * std::sqrt(a * (1.0 - a) / static_cast<double>(n));
    out.push_back(std::abs(c.alpha_hat[l] - a) <= band);
  }
  return out;
}

struct PointSummary
{
  double mean = 0.0;
  double mode = 0.0;
};

inline PointSummary
point_summaries(const VectorXd& density, const VectorXd& grid)
{
  if (density.size() != grid.size() || grid.size() < 2)
    throw ShapeError("density and grid must have the same length >= 2");
  const double width = grid(grid.size() - 1) - grid(0);
  PointSummary s;
  const VectorXd zf = grid.cwiseProduct(density);
  s.mean = trapezoid_uniform(zf, width);
  Index best = 0;
  for (Index i = 1; i < density.size(); ++i)
    if (density(i) > density(best))
      best = i;
  s.mode = grid(best);
  return s;
}

struct PointPredictionMetrics
{
  double mean_error = 0.0;
  double median_error = 0.0;
  double scatter68 = 0.0;
};

//! Fractional errors (predicted - observed) / observed.
inline PointPredictionMetrics
fractional_errors(std::span<const double> predicted, std::span<const double> observed)
{
  if (predicted.size() != observed.size())
    throw ShapeError("predicted and observed differ in length");
  if (predicted.empty())
    throw SizeError("no predictions to score");
  std::vector<double> eps(predicted.size()), abs_eps(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (observed[i] == 0.0)
      throw DataError("observed value at index " + std::to_string(i) + " is zero");
    eps[i] = (predicted[i] - observed[i]) / observed[i];
    abs_eps[i] = std::abs(eps[i]);
  }
  PointPredictionMetrics m;
  m.mean_error = mean(eps);
  m.median_error = median(eps);
  m.scatter68 = quantile(abs_eps, 0.68);
  return m;
}

inline void
write_coverage_csv(std::ostream& os, const CoverageCurve& c)
{
  os << "level,alpha_hat,half_width\n";
  for (std::size_t l = 0; l < c.levels.size(); ++l)
    os << format_double(c.levels[l]) << ',' << format_double(c.alpha_hat[l]) << ','
       << format_double(c.half_width[l]) << '\n';
}

struct HPDRow
{
  std::size_t query_id = 0;
  HPDRegion region;
};

inline void
write_hpd_csv(std::ostream& os, std::span<const HPDRow> rows)
{
  os << "query_id,level,seg_lo,seg_hi\n";
  for (const auto& r : rows)
    for (const auto& [lo, hi] : r.region.segments)
      os << r.query_id << ',' << format_double(r.region.level) << ',' << format_double(lo) << ','
         << format_double(hi) << '\n';
}

} // namespace flexcode
