#pragma once

#include "covariates.hpp"
#include "error.hpp"
#include "numeric.hpp"
#include "split.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace flexcode {

enum class RegressorKind
{
  knn,
  nadaraya_watson,
  spectral,
  lasso
};

inline std::string_view
to_string(RegressorKind k)
{
  switch (k) {
    case RegressorKind::knn:
      return "knn";
    case RegressorKind::nadaraya_watson:
      return "nw";
    case RegressorKind::spectral:
      return "spectral";
    case RegressorKind::lasso:
      return "lasso";
  }
  return "?";
}

inline RegressorKind
regressor_kind_from_string(std::string_view s)
{
  if (s == "knn")
    return RegressorKind::knn;
  if (s == "nw")
    return RegressorKind::nadaraya_watson;
  if (s == "spectral")
    return RegressorKind::spectral;
  if (s == "lasso")
    return RegressorKind::lasso;
  throw ConfigError("unknown regressor '" + std::string(s) + "'");
}

//! Hyperparameter grids, one per regressor kind. With `relative_scale`,
//! Nadaraya-Watson bandwidths multiply the median training distance and
//! spectral kernel bandwidths multiply the median squared distance.
struct RegressorConfig
{
  RegressorKind kind = RegressorKind::knn;
  std::vector<int> neighbors;
  std::vector<double> bandwidths;
  std::vector<double> kernel_bandwidths;
  std::vector<int> eigen_counts;
  std::vector<double> penalties;
  bool relative_scale = true;

  static RegressorConfig defaults(RegressorKind kind)
  {
    RegressorConfig c;
    c.kind = kind;
    c.neighbors = { 1, 2, 3, 5, 7, 10, 15, 20, 30, 40, 50, 75, 100, 150, 200 };
    c.bandwidths = { 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0 };
    c.kernel_bandwidths = { 0.005, 0.02, 0.08, 0.3 };
    c.eigen_counts = { 1, 2, 3, 5, 8, 12, 16, 20, 25, 30, 40, 50, 60, 80, 100, 150, 200 };
    for (int i = 0; i < 25; ++i)
      c.penalties.push_back(std::pow(10.0, -4.0 * i / 24.0));
    return c;
  }

  void validate() const
  {
    auto positive = [](const auto& v, const char* name) {
      if (v.empty())
        throw ConfigError(std::string("empty hyperparameter grid: ") + name);
      for (auto x : v)
        if (!(x > 0))
          throw ConfigError(std::string("non-positive value in grid: ") + name);
    };
    switch (kind) {
      case RegressorKind::knn:
        positive(neighbors, "neighbors");
        break;
      case RegressorKind::nadaraya_watson:
        positive(bandwidths, "bandwidths");
        break;
      case RegressorKind::spectral:
        positive(kernel_bandwidths, "kernel_bandwidths");
        positive(eigen_counts, "eigen_counts");
        break;
      case RegressorKind::lasso:
        positive(penalties, "penalties");
        break;
    }
  }
};

//! Top eigenpairs, values descending, vectors orthonormal (one per column).
struct Eigenpairs
{
  VectorXd values;
  MatrixXd vectors;
};

//! Gaussian Gram matrix exp(-d^2 / (4 bandwidth)).
inline MatrixXd
gaussian_gram(const MatrixXd& dist, double kernel_bandwidth)
{
  MatrixXd k(dist.rows(), dist.cols());
  for (Index j = 0; j < dist.cols(); ++j)
    for (Index i = 0; i < dist.rows(); ++i) {
      const double v = std::exp(-dist(i, j) * dist(i, j) / (4.0 * kernel_bandwidth));
      if (!std::isfinite(v))
        throw NumericError("non-finite kernel entry for rows (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
      k(i, j) = v;
    }
  return k;
}

//! Top-J eigenpairs of a symmetric matrix.
inline Eigenpairs
top_eigenpairs(const MatrixXd& gram, Index count)
{
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed");
  const Index n = gram.rows();
  count = std::min(count, n);
  Eigenpairs out;
  out.values.resize(count);
  out.vectors.resize(n, count);
  for (Index j = 0; j < count; ++j) {
    out.values(j) = es.eigenvalues()(n - 1 - j);
    out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
  }
  return out;
}

//! Spectral basis of the covariates: eigenpairs of the Gaussian Gram
//! matrix over training rows. New points extend by the Nystrom formula
//! psi_j(x) = (1 / lambda_j) sum_k K(x, x_k) v_jk.
inline Eigenpairs
spectral_embed(double kernel_bandwidth, const Covariates& x, Index count)
{
  if (!(kernel_bandwidth > 0))
    throw ConfigError("kernel bandwidth must be positive");
  if (count < 1 || count > x.rows())
    throw ConfigError("eigenvector count must lie in [1, n]");
  const auto ref = Reference::build(x);
  return top_eigenpairs(gaussian_gram(self_distances(*ref, x), kernel_bandwidth), count);
}

struct SpectralState
{
  double kernel_bandwidth = 0.0;
  VectorXd values;
  MatrixXd vectors;

  //! Nystrom extension of the basis to query rows (m x J).
  MatrixXd extend(const MatrixXd& dist) const
  {
    MatrixXd psi = gaussian_gram(dist, kernel_bandwidth) * vectors;
    for (Index j = 0; j < psi.cols(); ++j)
      psi.col(j) /= values(j);
    return psi;
  }
};

//! Per-coordinate features {u, u^2, u^3} of standardized covariates,
//! each column standardized on the training rows. Two-valued columns
//! (indicators) contribute u only.
struct LassoFeatures
{
  std::vector<int> powers;
  VectorXd center;
  VectorXd scale;

  static MatrixXd raw(const MatrixXd& u, const std::vector<int>& powers)
  {
    Index p = 0;
    for (int k : powers)
      p += k;
    MatrixXd f(u.rows(), p);
    Index col = 0;
    for (Index j = 0; j < u.cols(); ++j)
      for (int k = 1; k <= powers[static_cast<std::size_t>(j)]; ++k)
        f.col(col++) = u.col(j).array().pow(k);
    return f;
  }

  static std::shared_ptr<const LassoFeatures> build(const MatrixXd& u)
  {
    auto lf = std::make_shared<LassoFeatures>();
    for (Index j = 0; j < u.cols(); ++j) {
      std::vector<double> vals(u.col(j).data(), u.col(j).data() + u.rows());
      std::sort(vals.begin(), vals.end());
      const auto distinct = std::unique(vals.begin(), vals.end()) - vals.begin();
      lf->powers.push_back(distinct <= 2 ? 1 : 3);
    }
    const MatrixXd f = raw(u, lf->powers);
    const auto n = static_cast<double>(f.rows());
    lf->center = f.colwise().mean().transpose();
    lf->scale.resize(f.cols());
    for (Index j = 0; j < f.cols(); ++j) {
      const double var = (f.col(j).array() - lf->center(j)).square().sum() / n;
      lf->scale(j) = var > 0.0 ? std::sqrt(var) : 0.0;
    }
    return lf;
  }

  MatrixXd expand(const MatrixXd& u) const
  {
    MatrixXd f = raw(u, powers);
    for (Index j = 0; j < f.cols(); ++j) {
      if (scale(j) > 0.0)
        f.col(j) = (f.col(j).array() - center(j)) / scale(j);
      else
        f.col(j).setZero();
    }
    return f;
  }
};

struct LassoTrace
{
  std::vector<double> objective;
  int sweeps = 0;
};

//! Coordinate descent for (1/2) mean((y - F b)^2) + lambda |b|_1 in
//! covariance form: gram = F'F / n, corr = F'y / n, y_sq = mean(y^2),
//! with y and F centered. Warm-starts from `beta`. Stops when the largest
//! coefficient change in a sweep is below `tol`.
inline void
lasso_coordinate_descent(const MatrixXd& gram,
                         const VectorXd& corr,
                         double y_sq,
                         double lambda,
                         VectorXd& beta,
                         LassoTrace* trace = nullptr,
                         double tol = 1e-8,
                         int max_sweeps = 100000)
{
  const Index p = gram.rows();
  VectorXd g = gram * beta;
  auto objective = [&] {
    return 0.5 * (y_sq - 2.0 * beta.dot(corr) + beta.dot(g)) + lambda * beta.lpNorm<1>();
  };
  if (trace)
    trace->objective.push_back(objective());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0)
        continue;
      const double rho = corr(j) - g(j) + gjj * beta(j);
      double next = 0.0;
      if (rho > lambda)
        next = (rho - lambda) / gjj;
      else if (rho < -lambda)
        next = (rho + lambda) / gjj;
      const double delta = next - beta(j);
      if (delta != 0.0) {
        g += gram.col(j) * delta;
        beta(j) = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (trace) {
      trace->objective.push_back(objective());
      trace->sweeps = sweep + 1;
    }
    if (max_change < tol)
      return;
  }
}

//! A fitted estimator of one regression function E[W | x]. Immutable;
//! training state shared between regressors fitted on the same rows.
struct FittedRegressor
{
  RegressorKind kind = RegressorKind::knn;
  std::shared_ptr<const Reference> reference;
  double target_mean = 0.0;
  bool degenerate = false;
  double validation_mse = std::numeric_limits<double>::quiet_NaN();

  int neighbors = 0;
  double bandwidth = 0.0;
  int eigen_count = 0;
  double penalty = 0.0;

  VectorXd targets;
  std::shared_ptr<const SpectralState> spectral;
  VectorXd spectral_coef;
  std::shared_ptr<const LassoFeatures> lasso_features;
  VectorXd coef;
  double intercept = 0.0;

  VectorXd predict(const Covariates& x) const;
};

namespace detail {

//! Reference indices ordered by (distance, index), first `k` only.
inline std::vector<Index>
nearest(const MatrixXd& dist, Index row, Index k)
{
  const Index n = dist.cols();
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{ 0 });
  k = std::min(k, n);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](Index a, Index b) {
    const double da = dist(row, a), db = dist(row, b);
    return da < db || (da == db && a < b);
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

//! Kernel-weighted averages of the target columns; rows whose weights
//! all vanish fall back to `fallback`.
inline MatrixXd
nadaraya_watson(const MatrixXd& dist, const MatrixXd& targets, double h, const VectorXd& fallback)
{
  MatrixXd w = (-dist.array().square() / (2.0 * h * h)).exp().matrix();
  MatrixXd pred = w * targets;
  const VectorXd sums = w.rowwise().sum();
  for (Index i = 0; i < pred.rows(); ++i) {
    if (sums(i) > std::numeric_limits<double>::min())
      pred.row(i) /= sums(i);
    else
      pred.row(i) = fallback.transpose();
  }
  return pred;
}

inline bool
all_rows_identical(const Covariates& x)
{
  const MatrixXd& d = x.data();
  if (x.kind() == DistanceKind::precomputed)
    return (d.array() == 0.0).all();
  for (Index j = 0; j < d.cols(); ++j)
    if (d.col(j).maxCoeff() != d.col(j).minCoeff())
      return false;
  return true;
}

inline void
check_query(const FittedRegressor& m, const Covariates& x)
{
  if (!m.reference)
    throw ConfigError("regressor has not been fitted");
  if (x.kind() != m.reference->kind)
    throw ShapeError("query covariate kind does not match training");
  if (x.kind() == DistanceKind::euclidean && x.cols() != m.reference->center.size())
    throw ShapeError("query has " + std::to_string(x.cols()) + " covariates, model expects " +
                     std::to_string(m.reference->center.size()));
  if (x.kind() == DistanceKind::precomputed && x.cols() != m.reference->size)
    throw ShapeError("query distance rows have " + std::to_string(x.cols()) +
                     " columns, model expects " + std::to_string(m.reference->size));
}

} // namespace detail

//! Predictions of several regressors on the same query rows (m x models).
//! Distances, neighbor orders, spectral extensions and lasso features are
//! computed once per shared training state.
inline MatrixXd
predict_all(std::span<const FittedRegressor> models, const Covariates& x)
{
  MatrixXd out(x.rows(), static_cast<Index>(models.size()));
  std::map<const Reference*, MatrixXd> dist_cache;
  std::map<const Reference*, std::vector<std::vector<Index>>> order_cache;
  std::map<const SpectralState*, MatrixXd> psi_cache;
  std::map<const LassoFeatures*, MatrixXd> feature_cache;
  std::map<const Reference*, MatrixXd> standardized_cache;

  std::map<const Reference*, Index> max_k;
  for (const auto& m : models)
    if (m.kind == RegressorKind::knn && !m.degenerate)
      max_k[m.reference.get()] = std::max<Index>(max_k[m.reference.get()], m.neighbors);

  auto distances = [&](const FittedRegressor& m) -> const MatrixXd& {
    auto it = dist_cache.find(m.reference.get());
    if (it == dist_cache.end())
      it = dist_cache.emplace(m.reference.get(), m.reference->distances(x)).first;
    return it->second;
  };

  for (std::size_t c = 0; c < models.size(); ++c) {
    const auto& m = models[c];
    detail::check_query(m, x);
    const auto col = static_cast<Index>(c);
    if (m.degenerate) {
      out.col(col).setConstant(m.target_mean);
      continue;
    }
    switch (m.kind) {
      case RegressorKind::knn: {
        const Reference* key = m.reference.get();
        auto it = order_cache.find(key);
        if (it == order_cache.end()) {
          const MatrixXd& d = distances(m);
          std::vector<std::vector<Index>> orders;
          orders.reserve(static_cast<std::size_t>(x.rows()));
          for (Index r = 0; r < x.rows(); ++r)
            orders.push_back(detail::nearest(d, r, max_k[key]));
          it = order_cache.emplace(key, std::move(orders)).first;
        }
        const Index k = std::min<Index>(m.neighbors, m.reference->size);
        for (Index r = 0; r < x.rows(); ++r) {
          double s = 0.0;
          for (Index j = 0; j < k; ++j)
            s += m.targets(it->second[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]);
          out(r, col) = s / static_cast<double>(k);
        }
        break;
      }
      case RegressorKind::nadaraya_watson: {
        const VectorXd fb = VectorXd::Constant(1, m.target_mean);
        out.col(col) = detail::nadaraya_watson(distances(m), m.targets, m.bandwidth, fb).col(0);
        break;
      }
      case RegressorKind::spectral: {
        auto it = psi_cache.find(m.spectral.get());
        if (it == psi_cache.end())
          it = psi_cache.emplace(m.spectral.get(), m.spectral->extend(distances(m))).first;
        out.col(col) = it->second.leftCols(m.eigen_count) * m.spectral_coef;
        break;
      }
      case RegressorKind::lasso: {
        auto it = feature_cache.find(m.lasso_features.get());
        if (it == feature_cache.end()) {
          auto st = standardized_cache.find(m.reference.get());
          if (st == standardized_cache.end())
            st = standardized_cache.emplace(m.reference.get(), m.reference->standardize(x.data())).first;
          it = feature_cache.emplace(m.lasso_features.get(), m.lasso_features->expand(st->second)).first;
        }
        out.col(col) = (it->second * m.coef).array() + m.intercept;
        break;
      }
    }
  }
  return out;
}

inline VectorXd
FittedRegressor::predict(const Covariates& x) const
{
  return predict_all(std::span<const FittedRegressor>(this, 1), x).col(0);
}

namespace detail {

//! Validation MSE per (grid value, target column).
using MseTable = MatrixXd;

inline MseTable
knn_tuning(const MatrixXd& dist, const MatrixXd& w_fit, const MatrixXd& w_tune, const std::vector<int>& grid)
{
  const Index n_fit = dist.cols();
  const Index c = w_fit.cols();
  Index kmax = 0;
  for (int k : grid)
    kmax = std::max<Index>(kmax, std::min<Index>(k, n_fit));
  MseTable mse = MatrixXd::Zero(static_cast<Index>(grid.size()), c);
  VectorXd acc(c);
  for (Index r = 0; r < dist.rows(); ++r) {
    const auto order = nearest(dist, r, kmax);
    acc.setZero();
    std::vector<VectorXd> at_k(static_cast<std::size_t>(kmax + 1));
    for (Index j = 0; j < kmax; ++j) {
      acc += w_fit.row(order[static_cast<std::size_t>(j)]).transpose();
      at_k[static_cast<std::size_t>(j + 1)] = acc;
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Index k = std::min<Index>(grid[g], n_fit);
      const VectorXd pred = at_k[static_cast<std::size_t>(k)] / static_cast<double>(k);
      mse.row(static_cast<Index>(g)) += (pred - w_tune.row(r).transpose()).array().square().matrix().transpose();
    }
  }
  return mse / static_cast<double>(dist.rows());
}

//! Index of the smallest entry of column `c`; among exact ties the entry
//! ranked first by `prefer` wins.
template<typename Prefer>
Index
argmin_with_ties(const MseTable& mse, Index c, Prefer prefer)
{
  Index best = 0;
  for (Index g = 1; g < mse.rows(); ++g) {
    const double a = mse(g, c), b = mse(best, c);
    if (a < b || (a == b && prefer(g, best)))
      best = g;
  }
  return best;
}

} // namespace detail

//! Fits one regressor per column of `targets`, tuning each column's
//! hyperparameters independently by validation MSE on `split`
//! (train -> fit, validation -> score), then refits every column on all
//! rows with its chosen hyperparameters. Exact ties go to the smallest
//! k or J and the largest bandwidth or penalty.
inline std::vector<FittedRegressor>
fit_regressors(const RegressorConfig& config,
               const Covariates& x,
               const MatrixXd& targets,
               const DataSplit& split)
{
  config.validate();
  const Index n = x.rows();
  const Index cols = targets.cols();
  if (targets.rows() != n)
    throw ShapeError("targets have " + std::to_string(targets.rows()) + " rows, covariates " +
                     std::to_string(n));
  if (n < 4)
    throw SizeError("regression needs at least 4 rows");
  if (x.kind() == DistanceKind::precomputed && x.rows() != x.cols())
    throw ShapeError("training distances must be square");
  if (!split.test.empty())
    throw ConfigError("regressor tuning split takes train and validation parts only");
  split.validate(static_cast<std::size_t>(n));
  if (split.train.empty() || split.validation.empty())
    throw SizeError("tuning split needs nonempty train and validation parts");
  if (config.kind == RegressorKind::lasso && x.kind() == DistanceKind::precomputed)
    throw ConfigError("the penalized linear regressor needs feature covariates");
  require_finite(targets, "regression targets");

  const auto ref_all = Reference::build(x);
  const VectorXd mean_all = targets.colwise().mean().transpose();

  std::vector<FittedRegressor> out(static_cast<std::size_t>(cols));
  for (Index c = 0; c < cols; ++c) {
    auto& m = out[static_cast<std::size_t>(c)];
    m.kind = config.kind;
    m.reference = ref_all;
    m.target_mean = mean_all(c);
  }

  if (detail::all_rows_identical(x)) {
    for (auto& m : out) {
      m.degenerate = true;
      m.neighbors = config.neighbors.empty() ? 0 : config.neighbors.front();
      m.bandwidth = config.bandwidths.empty() ? 0.0 : config.bandwidths.front();
      m.penalty = config.penalties.empty() ? 0.0 : config.penalties.front();
    }
    return out;
  }

  const Covariates fit_x = x.subset(split.train);
  const Covariates tune_x = x.subset(split.validation, split.train);
  const MatrixXd w_fit = select_rows(targets, split.train);
  const MatrixXd w_tune = select_rows(targets, split.validation);
  const auto ref_fit = Reference::build(fit_x, ref_all.get());

  switch (config.kind) {
    case RegressorKind::knn: {
      const MatrixXd dist = ref_fit->distances(tune_x);
      const auto mse = detail::knn_tuning(dist, w_fit, w_tune, config.neighbors);
      for (Index c = 0; c < cols; ++c) {
        auto& m = out[static_cast<std::size_t>(c)];
        const Index g = detail::argmin_with_ties(mse, c, [&](Index a, Index b) {
          return config.neighbors[static_cast<std::size_t>(a)] < config.neighbors[static_cast<std::size_t>(b)];
        });
        m.neighbors = config.neighbors[static_cast<std::size_t>(g)];
        m.validation_mse = mse(g, c);
        m.targets = targets.col(c);
      }
      break;
    }
    case RegressorKind::nadaraya_watson: {
      const MatrixXd dist = ref_fit->distances(tune_x);
      const double unit = config.relative_scale
                            ? median_positive_offdiag(self_distances(*ref_fit, fit_x))
                            : 1.0;
      const VectorXd fallback = w_fit.colwise().mean().transpose();
      detail::MseTable mse(static_cast<Index>(config.bandwidths.size()), cols);
      for (std::size_t g = 0; g < config.bandwidths.size(); ++g) {
        const MatrixXd pred = detail::nadaraya_watson(dist, w_fit, config.bandwidths[g] * unit, fallback);
        mse.row(static_cast<Index>(g)) = (pred - w_tune).array().square().colwise().mean();
      }
      for (Index c = 0; c < cols; ++c) {
        auto& m = out[static_cast<std::size_t>(c)];
        const Index g = detail::argmin_with_ties(mse, c, [&](Index a, Index b) {
          return config.bandwidths[static_cast<std::size_t>(a)] > config.bandwidths[static_cast<std::size_t>(b)];
        });
        m.bandwidth = config.bandwidths[static_cast<std::size_t>(g)] * unit;
        m.validation_mse = mse(g, c);
        m.targets = targets.col(c);
      }
      break;
    }
    case RegressorKind::spectral: {
      const MatrixXd fit_dist = self_distances(*ref_fit, fit_x);
      const MatrixXd tune_dist = ref_fit->distances(tune_x);
      const double unit = config.relative_scale ? median_positive_offdiag(fit_dist, true) : 1.0;
      const Index n_fit = fit_x.rows();
      Index jmax = 0;
      for (int j : config.eigen_counts)
        jmax = std::max<Index>(jmax, std::min<Index>(j, n_fit));

      // Candidate (bandwidth, J) pairs flattened bandwidth-major.
      const auto nb = config.kernel_bandwidths.size();
      const auto nj = config.eigen_counts.size();
      detail::MseTable mse(static_cast<Index>(nb * nj), cols);
      for (std::size_t b = 0; b < nb; ++b) {
        const double eps = config.kernel_bandwidths[b] * unit;
        auto eig = top_eigenpairs(gaussian_gram(fit_dist, eps), jmax);
        Index usable = 0;
        while (usable < eig.values.size() && eig.values(usable) > 1e-12 * eig.values(0))
          ++usable;
        SpectralState st{ eps, eig.values.head(usable), eig.vectors.leftCols(usable) };
        const MatrixXd psi = st.extend(tune_dist);
        const MatrixXd coef = st.vectors.transpose() * w_fit;
        // Cumulative prediction over J.
        std::vector<MatrixXd> pred_at(static_cast<std::size_t>(usable + 1));
        MatrixXd pred = MatrixXd::Zero(tune_dist.rows(), cols);
        pred_at[0] = pred;
        for (Index j = 0; j < usable; ++j) {
          pred += psi.col(j) * coef.row(j);
          pred_at[static_cast<std::size_t>(j + 1)] = pred;
        }
        for (std::size_t jj = 0; jj < nj; ++jj) {
          const Index J = std::max<Index>(1, std::min<Index>(config.eigen_counts[jj], usable));
          mse.row(static_cast<Index>(b * nj + jj)) =
            (pred_at[static_cast<std::size_t>(J)] - w_tune).array().square().colwise().mean();
        }
      }
      std::vector<std::size_t> chosen(static_cast<std::size_t>(cols));
      for (Index c = 0; c < cols; ++c) {
        const Index g = detail::argmin_with_ties(mse, c, [&](Index a, Index bb) {
          const int ja = config.eigen_counts[static_cast<std::size_t>(a) % nj];
          const int jb = config.eigen_counts[static_cast<std::size_t>(bb) % nj];
          if (ja != jb)
            return ja < jb;
          return config.kernel_bandwidths[static_cast<std::size_t>(a) / nj] >
                 config.kernel_bandwidths[static_cast<std::size_t>(bb) / nj];
        });
        chosen[static_cast<std::size_t>(c)] = static_cast<std::size_t>(g);
        out[static_cast<std::size_t>(c)].validation_mse = mse(g, c);
      }
      // Refit on all rows: one eigendecomposition per chosen bandwidth.
      const MatrixXd all_dist = self_distances(*ref_all, x);
      std::map<std::size_t, Index> need_j;
      for (std::size_t g : chosen) {
        const Index J = std::min<Index>(config.eigen_counts[g % nj], n);
        need_j[g / nj] = std::max(need_j[g / nj], J);
      }
      std::map<std::size_t, std::shared_ptr<const SpectralState>> states;
      for (auto [b, J] : need_j) {
        const double eps = config.kernel_bandwidths[b] * unit;
        auto eig = top_eigenpairs(gaussian_gram(all_dist, eps), J);
        Index usable = 0;
        while (usable < eig.values.size() && eig.values(usable) > 1e-12 * eig.values(0))
          ++usable;
        states[b] = std::make_shared<const SpectralState>(
          SpectralState{ eps, eig.values.head(usable), eig.vectors.leftCols(usable) });
      }
      for (Index c = 0; c < cols; ++c) {
        auto& m = out[static_cast<std::size_t>(c)];
        const std::size_t g = chosen[static_cast<std::size_t>(c)];
        m.spectral = states[g / nj];
        m.eigen_count = static_cast<int>(std::max<Index>(
          1, std::min<Index>(config.eigen_counts[g % nj], m.spectral->values.size())));
        m.bandwidth = m.spectral->kernel_bandwidth;
        m.spectral_coef = m.spectral->vectors.leftCols(m.eigen_count).transpose() * targets.col(c);
      }
      break;
    }
    case RegressorKind::lasso: {
      std::vector<std::size_t> order(config.penalties.size());
      std::iota(order.begin(), order.end(), std::size_t{ 0 });
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return config.penalties[a] > config.penalties[b];
      });
      auto path_fit = [&](const MatrixXd& f, const MatrixXd& w, auto&& on_step) {
        const auto nr = static_cast<double>(f.rows());
        const MatrixXd gram = f.transpose() * f / nr;
        for (Index c = 0; c < w.cols(); ++c) {
          const double mu = w.col(c).mean();
          const VectorXd y = w.col(c).array() - mu;
          const VectorXd corr = f.transpose() * y / nr;
          const double y_sq = y.squaredNorm() / nr;
          VectorXd beta = VectorXd::Zero(f.cols());
          for (std::size_t s : order) {
            lasso_coordinate_descent(gram, corr, y_sq, config.penalties[s], beta);
            if (!on_step(c, s, mu, beta))
              break;
          }
        }
      };
      const auto feat_fit = LassoFeatures::build(ref_fit->standardized);
      const MatrixXd f_fit = feat_fit->expand(ref_fit->standardized);
      const MatrixXd f_tune = feat_fit->expand(ref_fit->standardize(tune_x.data()));
      detail::MseTable mse(static_cast<Index>(config.penalties.size()), cols);
      path_fit(f_fit, w_fit, [&](Index c, std::size_t s, double mu, const VectorXd& beta) {
        const VectorXd pred = (f_tune * beta).array() + mu;
        mse(static_cast<Index>(s), c) = (pred - w_tune.col(c)).squaredNorm() / static_cast<double>(pred.size());
        return true;
      });
      std::vector<std::size_t> chosen(static_cast<std::size_t>(cols));
      for (Index c = 0; c < cols; ++c) {
        const Index g = detail::argmin_with_ties(mse, c, [&](Index a, Index b) {
          return config.penalties[static_cast<std::size_t>(a)] > config.penalties[static_cast<std::size_t>(b)];
        });
        chosen[static_cast<std::size_t>(c)] = static_cast<std::size_t>(g);
        out[static_cast<std::size_t>(c)].validation_mse = mse(g, c);
        out[static_cast<std::size_t>(c)].penalty = config.penalties[static_cast<std::size_t>(g)];
      }
      const auto feat_all = LassoFeatures::build(ref_all->standardized);
      const MatrixXd f_all = feat_all->expand(ref_all->standardized);
      path_fit(f_all, targets, [&](Index c, std::size_t s, double mu, const VectorXd& beta) {
        if (s != chosen[static_cast<std::size_t>(c)])
          return true;
        auto& m = out[static_cast<std::size_t>(c)];
        m.lasso_features = feat_all;
        m.coef = beta;
        m.intercept = mu;
        return false;
      });
      break;
    }
  }
  return out;
}

//! Single-target convenience wrapper.
inline FittedRegressor
fit_regressor(const RegressorConfig& config, const Covariates& x, const VectorXd& w, const DataSplit& split)
{
  MatrixXd t(w.size(), 1);
  t.col(0) = w;
  return fit_regressors(config, x, t, split).front();
}

} // namespace flexcode
