#pragma once

#include "basis.hpp"
#include "covariates.hpp"
#include "density.hpp"
#include "error.hpp"
#include "numeric.hpp"
#include "regress.hpp"
#include "split.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace flexcode {

struct FlexCodeConfig
{
  BasisSpec basis;
  RegressorConfig regressor = RegressorConfig::defaults(RegressorKind::knn);
  std::size_t max_cutoff = 31;
  double train_frac = 0.7;
  double valid_frac = 0.15;
  std::uint64_t seed = 0;
  PostProcess post;
  std::size_t grid_cells = 1000;
  // Share of the training rows held out to tune regression hyperparameters.
  double tune_frac = 0.3;

  double test_frac() const
  {
    const double t = 1.0 - train_frac - valid_frac;
    return t > 1e-12 ? t : 0.0;
  }

  void validate() const
  {
    basis.validate();
    regressor.validate();
    post.validate();
    if (max_cutoff < 1 || max_cutoff > basis.effective_terms())
      throw ConfigError("max_cutoff must lie in [1, " + std::to_string(basis.effective_terms()) + "]");
    if (!(train_frac > 0.0 && train_frac < 1.0) || !(valid_frac > 0.0 && valid_frac < 1.0))
      throw ConfigError("train and validation fractions must lie in (0, 1)");
    if (train_frac + valid_frac > 1.0 + 1e-12)
      throw ConfigError("train and validation fractions sum to more than 1");
    if (grid_cells < 2)
      throw ConfigError("density grid needs at least 2 cells");
    if (!(tune_frac > 0.0 && tune_frac < 1.0))
      throw ConfigError("tuning fraction must lie in (0, 1)");
  }
};

//! Validation loss for every candidate cutoff I = 1..I0 (index I - 1).
struct CutoffTrace
{
  std::vector<double> loss;
  std::vector<double> se;
  std::vector<double> coef_loss;
};

namespace detail {

inline std::uint64_t
tuning_seed(std::uint64_t seed)
{
  return seed ^ 0x9e3779b97f4a7c15ULL;
}

inline void
check_response(std::span<const double> z)
{
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!std::isfinite(z[i]))
      throw DataError("response value at row " + std::to_string(i) + " is not finite");
}

//! Scaled responses, clamped into [0, 1]; counts clamped points.
inline std::vector<double>
to_unit_clamped(const ResponseScaler& s, std::span<const double> z, std::size_t* clamped)
{
  std::vector<double> u(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = s.to_unit(z[i]);
    u[i] = std::clamp(v, 0.0, 1.0);
    if (clamped && u[i] != v)
      ++*clamped;
  }
  return u;
}

//! True when `z` is the uniform grid of `z.size() - 1` cells over [lo, hi].
inline bool
spans_uniformly(const VectorXd& z, double lo, double hi)
{
  if (z.size() < 3 || z(0) != lo || z(z.size() - 1) != hi)
    return false;
  const VectorXd g = uniform_grid(static_cast<std::size_t>(z.size() - 1), lo, hi);
  const double tol = 1e-9 * (hi - lo);
  for (Index i = 0; i < z.size(); ++i)
    if (std::abs(g(i) - z(i)) > tol)
      return false;
  return true;
}

} // namespace detail

//! The truncated series f(z|x) = sum_{i <= I} beta_i(x) phi_i(z) on the
//! scaled response. beta_1 is the constant 1; `regressors` hold beta_2..beta_I.
struct FittedCDE
{
  FlexCodeConfig config;
  std::size_t cutoff = 1;
  ResponseScaler scaler;
  DataSplit split;
  std::vector<FittedRegressor> regressors;
  CutoffTrace trace;

  //! Covariate rows for prediction taken from the table used in fit
  //! (precomputed distances are restricted to the training columns).
  Covariates query_rows(const Covariates& all, std::span<const Index> rows) const
  {
    return all.subset(rows, split.train);
  }

  //! Coefficients beta_1..beta_I at each query row (m x I).
  MatrixXd coefficients(const Covariates& x) const
  {
    MatrixXd b(x.rows(), static_cast<Index>(cutoff));
    b.col(0).setOnes();
    if (cutoff > 1)
      b.rightCols(static_cast<Index>(cutoff - 1)) = predict_all(regressors, x);
    return b;
  }

  //! Post-processed densities on the uniform unit grid of `cells` cells.
  std::vector<NormalizedDensity> unit_densities(const MatrixXd& coef, std::size_t cells) const
  {
    const VectorXd grid = uniform_grid(cells);
    const MatrixXd phi = eval_basis(config.basis, grid, cutoff);
    const MatrixXd raw = phi * coef.transpose();
    std::vector<NormalizedDensity> out;
    out.reserve(static_cast<std::size_t>(coef.rows()));
    for (Index r = 0; r < coef.rows(); ++r)
      out.push_back(normalize_density(raw.col(r), config.post.bump_delta, config.post.nonneg_clip));
    return out;
  }

  //! Densities on the original response scale (m x grid). The grid must be
  //! ascending within the training response range.
  MatrixXd predict_density(const Covariates& x, const VectorXd& z_grid, std::vector<char>* flagged = nullptr) const
  {
    if (z_grid.size() < 1)
      throw SizeError("empty response grid");
    for (Index i = 0; i < z_grid.size(); ++i) {
      if (!(z_grid(i) >= scaler.z_min && z_grid(i) <= scaler.z_max))
        throw DomainError("response grid point " + std::to_string(i) + " (" + std::to_string(z_grid(i)) +
                          ") outside the training range [" + std::to_string(scaler.z_min) + ", " +
                          std::to_string(scaler.z_max) + "]");
      if (i > 0 && z_grid(i) < z_grid(i - 1))
        throw DataError("response grid is not sorted at point " + std::to_string(i));
    }
    const MatrixXd coef = coefficients(x);
    MatrixXd out(x.rows(), z_grid.size());
    if (flagged)
      flagged->assign(static_cast<std::size_t>(x.rows()), 0);

    if (detail::spans_uniformly(z_grid, scaler.z_min, scaler.z_max)) {
      const auto dens = unit_densities(coef, static_cast<std::size_t>(z_grid.size() - 1));
      for (Index r = 0; r < x.rows(); ++r) {
        const auto& d = dens[static_cast<std::size_t>(r)];
        out.row(r) = d.values.transpose() / scaler.width();
        if (flagged)
          (*flagged)[static_cast<std::size_t>(r)] = d.fallback;
      }
      return out;
    }

    std::vector<double> u(static_cast<std::size_t>(z_grid.size()));
    for (Index i = 0; i < z_grid.size(); ++i)
      u[static_cast<std::size_t>(i)] = std::clamp(scaler.to_unit(z_grid(i)), 0.0, 1.0);
    const MatrixXd raw = eval_basis(config.basis, u, cutoff) * coef.transpose();
    const auto dens = unit_densities(coef, config.grid_cells);
    for (Index r = 0; r < x.rows(); ++r) {
      const auto& d = dens[static_cast<std::size_t>(r)];
      for (Index i = 0; i < z_grid.size(); ++i)
        out(r, i) = d.at(u[static_cast<std::size_t>(i)], raw(i, r)) / scaler.width();
      if (flagged)
        (*flagged)[static_cast<std::size_t>(r)] = d.fallback;
    }
    return out;
  }

  //! Density on the default grid over the training response range.
  MatrixXd predict_density(const Covariates& x, std::vector<char>* flagged = nullptr) const
  {
    return predict_density(x, uniform_grid(config.grid_cells, scaler.z_min, scaler.z_max), flagged);
  }
};

namespace detail {

//! Per-point validation loss contributions for every cutoff 1..I0:
//! post-processed (grid) and raw series (coefficient) forms.
struct CutoffLosses
{
  MatrixXd grid; // n_eval x I0
  MatrixXd coef;
};

inline CutoffLosses
cutoff_losses(const FlexCodeConfig& config, const MatrixXd& coef, std::span<const double> u)
{
  const Index n = coef.rows();
  const Index terms = coef.cols();
  const VectorXd grid = uniform_grid(config.grid_cells);
  const MatrixXd phi_grid = eval_basis(config.basis, grid, static_cast<std::size_t>(terms));
  const MatrixXd phi_eval = eval_basis(config.basis, u, static_cast<std::size_t>(terms));

  CutoffLosses out{ MatrixXd(n, terms), MatrixXd(n, terms) };
  VectorXd raw(grid.size());
  for (Index k = 0; k < n; ++k) {
    raw.setZero();
    double sq = 0.0, at = 0.0;
    for (Index i = 0; i < terms; ++i) {
      const double b = coef(k, i);
      raw += b * phi_grid.col(i);
      sq += b * b;
      at += b * phi_eval(k, i);
      out.coef(k, i) = sq - 2.0 * at;
      const auto d = normalize_density(raw, config.post.bump_delta, config.post.nonneg_clip);
      const VectorXd sq_vals = d.values.array().square();
      out.grid(k, i) = trapezoid_uniform(sq_vals) - 2.0 * d.at(u[static_cast<std::size_t>(k)], at);
    }
  }
  return out;
}

} // namespace detail

//! Fits the series estimator on a given outer split: coefficient
//! regressions on the training part, cutoff chosen by validation loss
//! (smallest I on ties).
inline FittedCDE
fit(const FlexCodeConfig& config, const Covariates& x, std::span<const double> z, const DataSplit& split)
{
  config.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (z.size() != n)
    throw ShapeError("response has " + std::to_string(z.size()) + " values, covariates " + std::to_string(n) +
                     " rows");
  if (n < 20)
    throw SizeError("fit needs at least 20 rows, got " + std::to_string(n));
  detail::check_response(z);
  split.validate(n);
  if (split.train.size() < 4 || split.validation.empty())
    throw SizeError("n = " + std::to_string(n) + " too small for the requested split");

  FittedCDE m;
  m.config = config;
  m.split = split;
  std::vector<double> z_train;
  z_train.reserve(split.train.size());
  for (Index i : split.train)
    z_train.push_back(z[static_cast<std::size_t>(i)]);
  m.scaler = ResponseScaler::fit(z_train);

  const auto i0 = config.max_cutoff;
  const Covariates x_train = x.subset(split.train);
  std::vector<FittedRegressor> regs;
  if (i0 > 1) {
    const auto u_train = detail::to_unit_clamped(m.scaler, z_train, nullptr);
    const MatrixXd w = eval_basis(config.basis, u_train, i0);
    const auto inner = make_tuning_split(split.train.size(), config.tune_frac, detail::tuning_seed(config.seed));
    regs = fit_regressors(config.regressor, x_train, w.rightCols(static_cast<Index>(i0 - 1)), inner);
  }

  std::vector<double> z_valid;
  for (Index i : split.validation)
    z_valid.push_back(z[static_cast<std::size_t>(i)]);
  const auto u_valid = detail::to_unit_clamped(m.scaler, z_valid, nullptr);
  MatrixXd coef(static_cast<Index>(split.validation.size()), static_cast<Index>(i0));
  coef.col(0).setOnes();
  if (i0 > 1)
    coef.rightCols(static_cast<Index>(i0 - 1)) = predict_all(regs, x.subset(split.validation, split.train));

  const auto losses = detail::cutoff_losses(config, coef, u_valid);
  const auto nv = static_cast<double>(coef.rows());
  std::size_t best = 0;
  for (std::size_t i = 0; i < i0; ++i) {
    const auto col = static_cast<Index>(i);
    const std::vector<double> contrib = to_std(losses.grid.col(col));
    m.trace.loss.push_back(losses.grid.col(col).sum() / nv);
    m.trace.se.push_back(sample_sd(contrib) / std::sqrt(nv));
    m.trace.coef_loss.push_back(losses.coef.col(col).sum() / nv);
    if (m.trace.loss[i] < m.trace.loss[best])
      best = i;
  }
  m.cutoff = best + 1;
  regs.resize(best);
  m.regressors = std::move(regs);
  return m;
}

//! Fits with the configured seeded train/validation/test split.
inline FittedCDE
fit(const FlexCodeConfig& config, const Covariates& x, std::span<const double> z)
{
  config.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 20)
    throw SizeError("fit needs at least 20 rows, got " + std::to_string(n));
  return fit(config, x, z, make_split(n, config.train_frac, config.valid_frac, config.test_frac(), config.seed));
}

struct FlexCodeConfig2D
{
  TensorBasisSpec basis{ BasisSpec(BasisFamily::fourier, 15), BasisSpec(BasisFamily::fourier, 15) };
  RegressorConfig regressor = RegressorConfig::defaults(RegressorKind::knn);
  std::size_t max_cutoff_first = 15;
  std::size_t max_cutoff_second = 15;
  double train_frac = 0.7;
  double valid_frac = 0.15;
  std::uint64_t seed = 0;
  bool nonneg_clip = true;
  std::size_t grid_cells = 100;
  double tune_frac = 0.3;

  void validate() const
  {
    basis.first.validate();
    basis.second.validate();
    regressor.validate();
    if (max_cutoff_first < 1 || max_cutoff_first > basis.terms_first() || max_cutoff_second < 1 ||
        max_cutoff_second > basis.terms_second())
      throw ConfigError("cutoff maxima must lie within the factor bases");
    if (!(train_frac > 0.0 && train_frac < 1.0) || !(valid_frac > 0.0 && valid_frac < 1.0) ||
        train_frac + valid_frac > 1.0 + 1e-12)
      throw ConfigError("train and validation fractions must lie in (0, 1) and sum to at most 1");
    if (grid_cells < 2)
      throw ConfigError("density grid needs at least 2 cells");
    if (!(tune_frac > 0.0 && tune_frac < 1.0))
      throw ConfigError("tuning fraction must lie in (0, 1)");
  }
};

//! Tensor-product series for a bivariate response. Coefficient (i, j),
//! zero-based, sits at column i * cutoff_second + j; (0, 0) is the constant.
struct FittedCDE2D
{
  FlexCodeConfig2D config;
  std::size_t cutoff_first = 1;
  std::size_t cutoff_second = 1;
  ResponseScaler scaler_first;
  ResponseScaler scaler_second;
  DataSplit split;
  std::vector<FittedRegressor> regressors;
  MatrixXd trace; // validation loss per candidate (I1, I2), zero-based

  Covariates query_rows(const Covariates& all, std::span<const Index> rows) const
  {
    return all.subset(rows, split.train);
  }

  MatrixXd coefficients(const Covariates& x) const
  {
    const auto terms = static_cast<Index>(cutoff_first * cutoff_second);
    MatrixXd b(x.rows(), terms);
    b.col(0).setOnes();
    if (terms > 1)
      b.rightCols(terms - 1) = predict_all(regressors, x);
    return b;
  }

  //! Densities on the (cells + 1)^2 product grid over the training response
  //! rectangle, original scale; entry (a, b) is at (z1_a, z2_b).
  std::vector<MatrixXd> predict_density(const Covariates& x, std::size_t cells = 0, std::vector<char>* flagged = nullptr) const
  {
    if (cells == 0)
      cells = config.grid_cells;
    const VectorXd g = uniform_grid(cells);
    const MatrixXd p1 = eval_basis(config.basis.first, g, cutoff_first);
    const MatrixXd p2 = eval_basis(config.basis.second, g, cutoff_second);
    const VectorXd w = trapezoid_weights(g.size());
    const MatrixXd coef = coefficients(x);
    if (flagged)
      flagged->assign(static_cast<std::size_t>(x.rows()), 0);
    std::vector<MatrixXd> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    const double area = scaler_first.width() * scaler_second.width();
    for (Index r = 0; r < x.rows(); ++r) {
      MatrixXd c(static_cast<Index>(cutoff_first), static_cast<Index>(cutoff_second));
      for (Index i = 0; i < c.rows(); ++i)
        for (Index j = 0; j < c.cols(); ++j)
          c(i, j) = coef(r, i * c.cols() + j);
      MatrixXd f = p1 * c * p2.transpose();
      if (config.nonneg_clip)
        f = f.cwiseMax(0.0);
      const double mass = w.dot(f * w);
      if (!(mass > 0.0) || (f.array() <= 0.0).all()) {
        f.setOnes();
        if (flagged)
          (*flagged)[static_cast<std::size_t>(r)] = 1;
      } else {
        f /= mass;
      }
      out.push_back(f / area);
    }
    return out;
  }
};

//! Bivariate fit. Regressions for every (i, j) up to the configured maxima;
//! the cutoff pair minimizes the tensor validation loss over the full
//! rectangle (smallest I1, then I2, on ties).
inline FittedCDE2D
fit_2d(const FlexCodeConfig2D& config, const Covariates& x, std::span<const double> z1, std::span<const double> z2)
{
  config.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (z1.size() != n || z2.size() != n)
    throw ShapeError("response length does not match covariate rows");
  if (n < 20)
    throw SizeError("fit needs at least 20 rows, got " + std::to_string(n));
  detail::check_response(z1);
  detail::check_response(z2);
  const double test = std::max(0.0, 1.0 - config.train_frac - config.valid_frac);
  const auto split =
    make_split(n, config.train_frac, config.valid_frac, test > 1e-12 ? test : 0.0, config.seed);

  FittedCDE2D m;
  m.config = config;
  m.split = split;
  auto gather = [](std::span<const double> v, const std::vector<Index>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (Index i : idx)
      out.push_back(v[static_cast<std::size_t>(i)]);
    return out;
  };
  m.scaler_first = ResponseScaler::fit(gather(z1, split.train));
  m.scaler_second = ResponseScaler::fit(gather(z2, split.train));

  const auto n1 = config.max_cutoff_first;
  const auto n2 = config.max_cutoff_second;
  const TensorBasisSpec& tb = config.basis;
  auto tensor_targets = [&](const std::vector<Index>& idx) {
    const auto u1 = detail::to_unit_clamped(m.scaler_first, gather(z1, idx), nullptr);
    const auto u2 = detail::to_unit_clamped(m.scaler_second, gather(z2, idx), nullptr);
    const MatrixXd b1 = eval_basis(tb.first, u1, n1);
    const MatrixXd b2 = eval_basis(tb.second, u2, n2);
    MatrixXd t(static_cast<Index>(idx.size()), static_cast<Index>(n1 * n2));
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j < n2; ++j)
        t.col(static_cast<Index>(i * n2 + j)) =
          b1.col(static_cast<Index>(i)).cwiseProduct(b2.col(static_cast<Index>(j)));
    return t;
  };

  const auto total = static_cast<Index>(n1 * n2);
  std::vector<FittedRegressor> regs;
  if (total > 1) {
    const MatrixXd w = tensor_targets(split.train);
    const auto inner = make_tuning_split(split.train.size(), config.tune_frac, detail::tuning_seed(config.seed));
    regs = fit_regressors(config.regressor, x.subset(split.train), w.rightCols(total - 1), inner);
  }
  MatrixXd coef(static_cast<Index>(split.validation.size()), total);
  coef.col(0).setOnes();
  if (total > 1)
    coef.rightCols(total - 1) = predict_all(regs, x.subset(split.validation, split.train));
  const MatrixXd phi = tensor_targets(split.validation);

  // Per-coefficient mean of beta^2 - 2 beta phi, then 2-D prefix sums.
  const auto nv = static_cast<double>(coef.rows());
  const VectorXd term = ((coef.array().square() - 2.0 * coef.array() * phi.array()).colwise().sum() / nv).transpose();
  m.trace = MatrixXd::Zero(static_cast<Index>(n1), static_cast<Index>(n2));
  for (Index i = 0; i < static_cast<Index>(n1); ++i)
    for (Index j = 0; j < static_cast<Index>(n2); ++j) {
      double v = term(i * static_cast<Index>(n2) + j);
      if (i > 0)
        v += m.trace(i - 1, j);
      if (j > 0)
        v += m.trace(i, j - 1);
      if (i > 0 && j > 0)
        v -= m.trace(i - 1, j - 1);
      m.trace(i, j) = v;
    }
  Index bi = 0, bj = 0;
  for (Index i = 0; i < m.trace.rows(); ++i)
    for (Index j = 0; j < m.trace.cols(); ++j)
      if (m.trace(i, j) < m.trace(bi, bj)) {
        bi = i;
        bj = j;
      }
  m.cutoff_first = static_cast<std::size_t>(bi + 1);
  m.cutoff_second = static_cast<std::size_t>(bj + 1);
  for (Index i = 0; i <= bi; ++i)
    for (Index j = 0; j <= bj; ++j)
      if (i != 0 || j != 0)
        m.regressors.push_back(regs[static_cast<std::size_t>(i * static_cast<Index>(n2) + j - 1)]);
  return m;
}

} // namespace flexcode
