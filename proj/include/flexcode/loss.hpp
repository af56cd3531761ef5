#pragma once

#include "basis.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "numeric.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flexcode {

enum class LossPath
{
  coefficients,
  grid
};

inline std::string_view
to_string(LossPath p)
{
  return p == LossPath::coefficients ? "coefficients" : "grid";
}

//! Empirical CDE loss on the unit response scale, up to the constant
//! integral of f^2.
struct LossReport
{
  double loss = 0.0;
  double se = 0.0;
  std::size_t n_eval = 0;
  std::size_t clamped = 0;
  LossPath path = LossPath::grid;
};

//! Loss from per-point terms: the integral of f-hat^2 (or sum of squared
//! coefficients) and f-hat at the observed response.
inline LossReport
loss_from_terms(std::span<const double> sq_norm, std::span<const double> f_at_z, LossPath path = LossPath::grid)
{
  if (sq_norm.size() != f_at_z.size())
    throw ShapeError("loss terms differ in length");
  if (sq_norm.empty())
    throw SizeError("empty evaluation set");
  std::vector<double> c(sq_norm.size());
  for (std::size_t k = 0; k < c.size(); ++k)
    c[k] = sq_norm[k] - 2.0 * f_at_z[k];
  LossReport r;
  r.n_eval = c.size();
  r.loss = mean(c);
  r.se = sample_sd(c) / std::sqrt(static_cast<double>(c.size()));
  r.path = path;
  return r;
}

//! Loss of a series model on (x, z) using its post-processed densities.
inline LossReport
empirical_cde_loss(const FittedCDE& m, const Covariates& x, std::span<const double> z)
{
  if (z.empty())
    throw SizeError("empty evaluation set");
  if (static_cast<Index>(z.size()) != x.rows())
    throw ShapeError("evaluation responses and covariates differ in length");
  std::size_t clamped = 0;
  const auto u = detail::to_unit_clamped(m.scaler, z, &clamped);
  const MatrixXd coef = m.coefficients(x);
  const MatrixXd at = eval_basis(m.config.basis, u, m.cutoff);
  const auto dens = m.unit_densities(coef, m.config.grid_cells);
  std::vector<double> sq(z.size()), f(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const auto& d = dens[k];
    const VectorXd s = d.values.array().square();
    sq[k] = trapezoid_uniform(s);
    f[k] = d.at(u[k], at.row(static_cast<Index>(k)).dot(coef.row(static_cast<Index>(k))));
  }
  auto r = loss_from_terms(sq, f, LossPath::grid);
  r.clamped = clamped;
  return r;
}

//! Loss of the raw truncated series, first term from the coefficients.
inline LossReport
coefficient_loss(const FittedCDE& m, const Covariates& x, std::span<const double> z)
{
  if (z.empty())
    throw SizeError("empty evaluation set");
  if (static_cast<Index>(z.size()) != x.rows())
    throw ShapeError("evaluation responses and covariates differ in length");
  std::size_t clamped = 0;
  const auto u = detail::to_unit_clamped(m.scaler, z, &clamped);
  const MatrixXd coef = m.coefficients(x);
  const MatrixXd at = eval_basis(m.config.basis, u, m.cutoff);
  std::vector<double> sq(z.size()), f(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    sq[k] = coef.row(static_cast<Index>(k)).squaredNorm();
    f[k] = at.row(static_cast<Index>(k)).dot(coef.row(static_cast<Index>(k)));
  }
  auto r = loss_from_terms(sq, f, LossPath::coefficients);
  r.clamped = clamped;
  return r;
}

//! Loss of densities given on the uniform unit grid (one row per point);
//! f at the response by linear interpolation.
inline LossReport
grid_loss(const MatrixXd& unit_density, std::span<const double> u)
{
  if (u.empty())
    throw SizeError("empty evaluation set");
  if (static_cast<Index>(u.size()) != unit_density.rows())
    throw ShapeError("evaluation responses and densities differ in length");
  const Index cells = unit_density.cols() - 1;
  std::vector<double> sq(u.size()), f(u.size());
  std::size_t clamped = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const auto row = static_cast<Index>(k);
    const VectorXd s = unit_density.row(row).array().square();
    sq[k] = trapezoid_uniform(s);
    const double v = std::clamp(u[k], 0.0, 1.0);
    if (v != u[k])
      ++clamped;
    const double pos = v * static_cast<double>(cells);
    const Index j = std::min<Index>(static_cast<Index>(std::floor(pos)), cells - 1);
    const double t = pos - static_cast<double>(j);
    f[k] = (1.0 - t) * unit_density(row, j) + t * unit_density(row, j + 1);
  }
  auto r = loss_from_terms(sq, f, LossPath::grid);
  r.clamped = clamped;
  return r;
}

//! A conditional density on the original scale: (z, evaluation row) -> f.
using DensityFn = std::function<double(double, Index)>;

//! Loss of a known density restricted to the scaler's range and expressed
//! on the unit scale, so it is comparable with fitted models.
inline LossReport
oracle_loss(const DensityFn& truth, const ResponseScaler& scaler, std::span<const double> z, std::size_t cells = 1000)
{
  if (z.empty())
    throw SizeError("empty evaluation set");
  const VectorXd grid = uniform_grid(cells, scaler.z_min, scaler.z_max);
  std::vector<double> sq(z.size()), f(z.size());
  std::size_t clamped = 0;
  const auto u = detail::to_unit_clamped(scaler, z, &clamped);
  VectorXd s(grid.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const auto row = static_cast<Index>(k);
    for (Index g = 0; g < grid.size(); ++g) {
      const double v = scaler.density_to_unit(truth(grid(g), row));
      s(g) = v * v;
    }
    sq[k] = trapezoid_uniform(s);
    f[k] = scaler.density_to_unit(truth(scaler.from_unit(u[k]), row));
  }
  auto r = loss_from_terms(sq, f, LossPath::grid);
  r.clamped = clamped;
  return r;
}

} // namespace flexcode
