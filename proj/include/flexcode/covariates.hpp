#pragma once

#include "error.hpp"
#include "numeric.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace flexcode {

enum class DistanceKind
{
  euclidean,
  precomputed
};

//! Covariates seen by a regressor: either feature rows (Euclidean distance
//! on standardized columns) or rows of precomputed distances to a
//! reference set. A training block of precomputed distances is square.
class Covariates
{
public:
  Covariates() = default;

  //! `raw_columns` marks columns used as given rather than standardized
  //! (e.g. scaled one-hot indicators).
  static Covariates features(MatrixXd x, std::vector<char> raw_columns = {})
  {
    require_finite(x, "covariates");
    if (!raw_columns.empty() && static_cast<Index>(raw_columns.size()) != x.cols())
      throw ShapeError("raw column mask has " + std::to_string(raw_columns.size()) + " entries for " +
                       std::to_string(x.cols()) + " columns");
    Covariates c;
    c.kind_ = DistanceKind::euclidean;
    c.data_ = std::move(x);
    c.raw_columns_ = std::move(raw_columns);
    return c;
  }

  //! Square distance matrix among all items. Symmetric within 1e-9,
  //! zero diagonal, nonnegative.
  static Covariates precomputed(MatrixXd d)
  {
    if (d.rows() != d.cols())
      throw ShapeError("precomputed distance matrix must be square");
    require_finite(d, "distance matrix");
    for (Index i = 0; i < d.rows(); ++i) {
      if (d(i, i) != 0.0)
        throw DataError("distance matrix diagonal is nonzero at " + std::to_string(i));
      for (Index j = 0; j < i; ++j) {
        if (std::abs(d(i, j) - d(j, i)) > 1e-9)
          throw DataError("distance matrix not symmetric at (" + std::to_string(i) + ", " +
                          std::to_string(j) + ")");
        if (d(i, j) < 0.0)
          throw DataError("negative distance at (" + std::to_string(i) + ", " +
                          std::to_string(j) + ")");
      }
    }
    Covariates c;
    c.kind_ = DistanceKind::precomputed;
    c.data_ = std::move(d);
    return c;
  }

  //! Query rows: distances from new items to every reference item.
  static Covariates distance_rows(MatrixXd d)
  {
    require_finite(d, "distance rows");
    if ((d.array() < 0.0).any())
      throw DataError("negative distance in query rows");
    Covariates c;
    c.kind_ = DistanceKind::precomputed;
    c.data_ = std::move(d);
    return c;
  }

  DistanceKind kind() const { return kind_; }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }
  const MatrixXd& data() const { return data_; }
  const std::vector<char>& raw_columns() const { return raw_columns_; }
  bool raw_column(Index j) const { return !raw_columns_.empty() && raw_columns_[static_cast<std::size_t>(j)]; }

  //! Rows `rows`; for precomputed distances the columns are restricted to
  //! the reference items `ref`.
  Covariates subset(std::span<const Index> rows, std::span<const Index> ref) const
  {
    Covariates c;
    c.kind_ = kind_;
    c.data_ = kind_ == DistanceKind::euclidean ? select_rows(data_, rows)
                                               : select_block(data_, rows, ref);
    c.raw_columns_ = raw_columns_;
    return c;
  }

  Covariates subset(std::span<const Index> rows) const { return subset(rows, rows); }

private:
  DistanceKind kind_ = DistanceKind::euclidean;
  MatrixXd data_;
  std::vector<char> raw_columns_;
};

//! Training-side covariate state kept by fitted regressors.
struct Reference
{
  DistanceKind kind = DistanceKind::euclidean;
  Index size = 0;
  // Euclidean only: standardized training rows and the column statistics.
  MatrixXd standardized;
  VectorXd center;
  VectorXd scale;

  //! With `parent`, reuses its column statistics instead of learning new ones.
  static std::shared_ptr<const Reference> build(const Covariates& train, const Reference* parent = nullptr)
  {
    auto r = std::make_shared<Reference>();
    r->kind = train.kind();
    r->size = train.rows();
    if (train.kind() == DistanceKind::precomputed) {
      if (train.rows() != train.cols())
        throw ShapeError("training distances must be square");
      return r;
    }
    if (parent) {
      r->center = parent->center;
      r->scale = parent->scale;
      r->standardized = r->standardize(train.data());
      return r;
    }
    const MatrixXd& x = train.data();
    const auto n = static_cast<double>(x.rows());
    r->center = x.colwise().mean().transpose();
    r->scale.resize(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      if (train.raw_column(j)) {
        r->center(j) = 0.0;
        r->scale(j) = 1.0;
        continue;
      }
      const double var = (x.col(j).array() - r->center(j)).square().sum() / n;
      r->scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    r->standardized = r->standardize(x);
    return r;
  }

  MatrixXd standardize(const MatrixXd& x) const
  {
    if (x.cols() != center.size())
      throw ShapeError("covariate arity " + std::to_string(x.cols()) + " does not match " +
                       std::to_string(center.size()) + " training columns");
    return (x.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
  }

  //! Distances from each query row to each reference row (m x size).
  MatrixXd distances(const Covariates& query) const
  {
    if (query.kind() != kind)
      throw ShapeError("query covariate kind does not match the training kind");
    if (kind == DistanceKind::precomputed) {
      if (query.cols() != size)
        throw ShapeError("query distance rows have " + std::to_string(query.cols()) +
                         " columns, expected " + std::to_string(size));
      return query.data();
    }
    return euclidean(standardize(query.data()), standardized);
  }

  static MatrixXd euclidean(const MatrixXd& a, const MatrixXd& b)
  {
    MatrixXd d(a.rows(), b.rows());
    const Index p = a.cols();
    for (Index j = 0; j < b.rows(); ++j)
      for (Index i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (Index c = 0; c < p; ++c) {
          const double t = a(i, c) - b(j, c);
          s += t * t;
        }
        d(i, j) = std::sqrt(s);
      }
    return d;
  }
};

//! Pairwise distances among training rows (standardized for Euclidean).
inline MatrixXd
self_distances(const Reference& ref, const Covariates& train)
{
  if (ref.kind == DistanceKind::precomputed)
    return train.data();
  return Reference::euclidean(ref.standardized, ref.standardized);
}

//! Median of the strictly positive upper-triangle entries; 1 if none.
inline double
median_positive_offdiag(const MatrixXd& d, bool squared = false)
{
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(d.rows() * (d.rows() - 1) / 2));
  for (Index j = 0; j < d.cols(); ++j)
    for (Index i = 0; i < j; ++i)
      if (d(i, j) > 0.0)
        v.push_back(squared ? d(i, j) * d(i, j) : d(i, j));
  if (v.empty())
    return 1.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

} // namespace flexcode
