#pragma once

#include "basis.hpp"
#include "covariates.hpp"
#include "error.hpp"
#include "loss.hpp"
#include "numeric.hpp"
#include "regress.hpp"
#include "split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flexcode {

enum class BaselineKind
{
  kde_ratio,  // joint / marginal Gaussian KDE, one bandwidth for standardized (x, z)
  knn_cde,    // Gaussian KDE of the responses of the k nearest neighbors
  kernel_cde  // Gaussian weights on covariate distance times a response kernel
};

inline std::string_view
to_string(BaselineKind k)
{
  switch (k) {
    case BaselineKind::kde_ratio:
      return "kde";
    case BaselineKind::knn_cde:
      return "knn-cde";
    case BaselineKind::kernel_cde:
      return "kernel-cde";
  }
  return "?";
}

//! Covariate bandwidths multiply the median training distance; response
//! bandwidths are on the unit response scale. The KDE ratio uses one
//! bandwidth from `kde_bandwidths` for standardized covariates and the
//! standardized response alike.
struct BaselineConfig
{
  BaselineKind kind = BaselineKind::kernel_cde;
  std::vector<double> x_bandwidths{ 0.05, 0.1, 0.2, 0.3, 0.5, 0.8 };
  std::vector<double> z_bandwidths{ 0.01, 0.02, 0.04, 0.07, 0.1, 0.15 };
  std::vector<int> neighbors{ 5, 10, 20, 40, 80 };
  std::vector<double> kde_bandwidths{ 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0 };
  std::size_t grid_cells = 1000;
  std::size_t tuning_cells = 200;
};

struct FittedBaseline
{
  BaselineKind kind = BaselineKind::kernel_cde;
  ResponseScaler scaler;
  std::shared_ptr<const Reference> reference;
  VectorXd u_train;
  double x_bandwidth = 0.0;
  double z_bandwidth = 0.0;
  int neighbors = 0;
  std::size_t grid_cells = 1000;

  //! Covariate weights (m x n_train), rows summing to 1.
  MatrixXd weights(const MatrixXd& dist) const
  {
    const Index n = dist.cols();
    MatrixXd w = MatrixXd::Zero(dist.rows(), n);
    for (Index r = 0; r < dist.rows(); ++r) {
      if (kind == BaselineKind::knn_cde) {
        for (Index j : detail::nearest(dist, r, neighbors))
          w(r, j) = 1.0;
      } else {
        for (Index j = 0; j < n; ++j)
          w(r, j) = std::exp(-dist(r, j) * dist(r, j) / (2.0 * x_bandwidth * x_bandwidth));
      }
      const double s = w.row(r).sum();
      if (s > 0.0)
        w.row(r) /= s;
      else
        w.row(r).setConstant(1.0 / static_cast<double>(n));
    }
    return w;
  }

  //! Densities on the uniform unit grid (m x (cells + 1)), renormalized on [0, 1].
  MatrixXd unit_density(const Covariates& x, std::size_t cells = 0) const
  {
    if (cells == 0)
      cells = grid_cells;
    const VectorXd grid = uniform_grid(cells);
    return unit_density_from(weights(reference->distances(x)), grid);
  }

  MatrixXd unit_density_from(const MatrixXd& w, const VectorXd& grid) const
  {
    return unit_density_from(w, response_kernel(grid));
  }

  //! Gaussian response kernel, training points x grid points.
  MatrixXd response_kernel(const VectorXd& grid) const
  {
    MatrixXd kz(u_train.size(), grid.size());
    const double c = 1.0 / (z_bandwidth * std::sqrt(2.0 * std::numbers::pi));
    for (Index g = 0; g < grid.size(); ++g)
      for (Index j = 0; j < u_train.size(); ++j) {
        const double t = (grid(g) - u_train(j)) / z_bandwidth;
        kz(j, g) = c * std::exp(-0.5 * t * t);
      }
    return kz;
  }

  static MatrixXd unit_density_from(const MatrixXd& w, const MatrixXd& kz)
  {
    MatrixXd f = w * kz;
    for (Index r = 0; r < f.rows(); ++r) {
      const double mass = trapezoid_uniform(f.row(r));
      if (mass > 0.0)
        f.row(r) /= mass;
      else
        f.row(r).setOnes();
    }
    return f;
  }

  //! Densities on the (cells + 1)-point grid over the training response range.
  MatrixXd predict_density(const Covariates& x, std::size_t cells = 0) const
  {
    return unit_density(x, cells) / scaler.width();
  }
};

//! Fits on split.train and tunes bandwidths (and k) by the validation loss
//! on a coarse grid; ties go to the first grid value.
inline FittedBaseline
fit_baseline(const BaselineConfig& config, const Covariates& x, std::span<const double> z, const DataSplit& split)
{
  const auto n = static_cast<std::size_t>(x.rows());
  if (z.size() != n)
    throw ShapeError("response and covariates differ in length");
  split.validate(n);
  if (config.x_bandwidths.empty() || config.z_bandwidths.empty() || config.neighbors.empty())
    throw ConfigError("empty baseline tuning grid");
  FittedBaseline m;
  m.kind = config.kind;
  m.grid_cells = config.grid_cells;
  std::vector<double> zt;
  for (Index i : split.train)
    zt.push_back(z[static_cast<std::size_t>(i)]);
  m.scaler = ResponseScaler::fit(zt);
  m.u_train.resize(static_cast<Index>(zt.size()));
  for (std::size_t i = 0; i < zt.size(); ++i)
    m.u_train(static_cast<Index>(i)) = m.scaler.to_unit(zt[i]);
  const Covariates xt = x.subset(split.train);
  m.reference = Reference::build(xt);
  const MatrixXd dist = m.reference->distances(x.subset(split.validation, split.train));
  const double unit = median_positive_offdiag(self_distances(*m.reference, xt));
  std::vector<double> uv;
  for (Index i : split.validation)
    uv.push_back(std::clamp(m.scaler.to_unit(z[static_cast<std::size_t>(i)]), 0.0, 1.0));
  const VectorXd grid = uniform_grid(config.tuning_cells);

  double best = std::numeric_limits<double>::infinity();
  std::map<std::pair<double, int>, MatrixXd> w_cache;
  std::map<double, MatrixXd> kz_cache;
  auto consider = [&](double hx, double hz, int k) {
    FittedBaseline c = m;
    c.x_bandwidth = hx;
    c.z_bandwidth = hz;
    c.neighbors = k;
    auto w = w_cache.find({ hx, k });
    if (w == w_cache.end())
      w = w_cache.emplace(std::pair{ hx, k }, c.weights(dist)).first;
    auto kz = kz_cache.find(hz);
    if (kz == kz_cache.end())
      kz = kz_cache.emplace(hz, c.response_kernel(grid)).first;
    const double l = grid_loss(FittedBaseline::unit_density_from(w->second, kz->second), uv).loss;
    if (l < best) {
      best = l;
      m.x_bandwidth = hx;
      m.z_bandwidth = hz;
      m.neighbors = k;
    }
  };
  switch (config.kind) {
    case BaselineKind::kde_ratio: {
      const double sd_u = std::sqrt((m.u_train.array() - m.u_train.mean()).square().mean());
      for (double h : config.kde_bandwidths)
        consider(h, h * sd_u, 0);
      break;
    }
    case BaselineKind::knn_cde:
      for (int k : config.neighbors)
        for (double hz : config.z_bandwidths)
          consider(0.0, hz, k);
      break;
    case BaselineKind::kernel_cde:
      for (double hx : config.x_bandwidths)
        for (double hz : config.z_bandwidths)
          consider(hx * unit, hz, 0);
      break;
  }
  return m;
}

} // namespace flexcode
