#pragma once

#include "covariates.hpp"
#include "datasets.hpp"
#include "error.hpp"
#include "numeric.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace flexcode {

//! One sample set: rows are observations in R^d.
struct SampleSet
{
  MatrixXd points;
  std::string id;

  Index size() const { return points.rows(); }
  Index dims() const { return points.cols(); }
};

struct KLConfig
{
  int k = 2;
  double sigma2 = 1.0;

  void validate() const
  {
    if (k < 1)
      throw ConfigError("KL neighbor order k must be >= 1");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
      throw ConfigError("kernel sigma2 must be positive");
  }
};

struct KLEstimate
{
  double value = 0.0;
  std::size_t floored = 0;
  bool warning = false;
};

namespace detail {

constexpr double kl_floor = 1e-12;

inline void
check_sample_set(const SampleSet& s, Index min_size, const char* role)
{
  if (s.size() < min_size)
    throw SizeError(std::string(role) + " set '" + s.id + "' has " + std::to_string(s.size()) +
                    " points, needs at least " + std::to_string(min_size));
  require_finite(s.points, std::string("sample set '") + s.id + "'");
}

//! k-th smallest |v - x| over sorted `s`, skipping position `skip` (or none).
inline double
kth_gap_sorted(const std::vector<double>& s, double x, int k, std::ptrdiff_t skip = -1)
{
  const auto n = static_cast<std::ptrdiff_t>(s.size());
  std::ptrdiff_t right = std::lower_bound(s.begin(), s.end(), x) - s.begin();
  std::ptrdiff_t left = right - 1;
  if (skip >= 0) {
    left = skip - 1;
    right = skip + 1;
  }
  double d = 0.0;
  for (int taken = 0; taken < k; ++taken) {
    const double dl = left >= 0 ? x - s[static_cast<std::size_t>(left)] : INFINITY;
    const double dr = right < n ? s[static_cast<std::size_t>(right)] - x : INFINITY;
    if (dl <= dr) {
      d = dl;
      --left;
    } else {
      d = dr;
      ++right;
    }
  }
  return d;
}

//! k-th nearest-neighbor distance from each row of `a` to `pool`
//! (excluding the same row when `self`).
inline VectorXd
kth_distances(const MatrixXd& a, const MatrixXd& pool, int k, bool self)
{
  VectorXd out(a.rows());
  if (a.cols() == 1) {
    std::vector<double> s(pool.col(0).data(), pool.col(0).data() + pool.rows());
    std::sort(s.begin(), s.end());
    for (Index i = 0; i < a.rows(); ++i) {
      const double x = a(i, 0);
      std::ptrdiff_t skip = -1;
      if (self)
        skip = std::lower_bound(s.begin(), s.end(), x) - s.begin();
      out(i) = kth_gap_sorted(s, x, k, skip);
    }
    return out;
  }
  std::vector<double> d(static_cast<std::size_t>(pool.rows()));
  for (Index i = 0; i < a.rows(); ++i) {
    std::size_t c = 0;
    for (Index j = 0; j < pool.rows(); ++j) {
      if (self && j == i)
        continue;
      d[c++] = (a.row(i) - pool.row(j)).norm();
    }
    std::nth_element(d.begin(), d.begin() + (k - 1), d.begin() + static_cast<std::ptrdiff_t>(c));
    out(i) = d[static_cast<std::size_t>(k - 1)];
  }
  return out;
}

} // namespace detail

//! Per-set part of the estimator: log of each point's k-th within-set
//! neighbor distance. Reusable across every divergence from that set.
struct SelfNeighbors
{
  VectorXd log_rho;
  std::vector<char> floored;
};

inline SelfNeighbors
self_neighbors(const SampleSet& a, int k)
{
  detail::check_sample_set(a, k + 1, "source");
  const VectorXd rho = detail::kth_distances(a.points, a.points, k, true);
  SelfNeighbors s{ VectorXd(rho.size()), std::vector<char>(static_cast<std::size_t>(rho.size()), 0) };
  for (Index i = 0; i < rho.size(); ++i) {
    s.floored[static_cast<std::size_t>(i)] = rho(i) < detail::kl_floor;
    s.log_rho(i) = std::log(std::max(rho(i), detail::kl_floor));
  }
  return s;
}

inline KLEstimate
kl_divergence(const SampleSet& a, const SelfNeighbors& self, const SampleSet& b, int k)
{
  detail::check_sample_set(b, k, "target");
  if (a.dims() != b.dims())
    throw ShapeError("sample sets '" + a.id + "' and '" + b.id + "' differ in dimension");
  const VectorXd nu = detail::kth_distances(a.points, b.points, k, false);
  const auto n = static_cast<double>(a.size());
  const auto m = static_cast<double>(b.size());
  KLEstimate out;
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const bool fl = nu(i) < detail::kl_floor;
    if (fl || self.floored[static_cast<std::size_t>(i)])
      ++out.floored;
    s += std::log(std::max(nu(i), detail::kl_floor)) - self.log_rho(i);
  }
  out.value = static_cast<double>(a.dims()) / n * s + std::log(m / (n - 1.0));
  out.warning = static_cast<double>(out.floored) > 0.1 * n;
  return out;
}

//! k-nearest-neighbor estimate of KL(p_A || p_B).
inline KLEstimate
kl_divergence(const SampleSet& a, const SampleSet& b, int k = 2)
{
  if (k < 1)
    throw ConfigError("KL neighbor order k must be >= 1");
  return kl_divergence(a, self_neighbors(a, k), b, k);
}

struct PsdProjection
{
  MatrixXd matrix;
  double shift = 0.0;
};

//! Frobenius-nearest positive semidefinite matrix: clip negative
//! eigenvalues of the symmetrized input.
inline PsdProjection
nearest_psd(const MatrixXd& m)
{
  if (m.rows() != m.cols())
    throw ShapeError("nearest_psd needs a square matrix");
  require_finite(m, "matrix to project");
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed in PSD projection");
  const VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  PsdProjection out;
  out.matrix = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  out.shift = (out.matrix - sym).norm();
  return out;
}

struct DivergenceMatrix
{
  MatrixXd raw;
  MatrixXd kernel;
  double projection_shift = 0.0;
  std::size_t warnings = 0;
};

//! Pairwise divergence estimates raw(i, j) = KL(set_i || set_j); zero
//! diagonal is not forced.
inline MatrixXd
kl_raw_matrix(const std::vector<SampleSet>& sets, int k, std::size_t* warnings = nullptr)
{
  if (k < 1)
    throw ConfigError("KL neighbor order k must be >= 1");
  const auto n = static_cast<Index>(sets.size());
  MatrixXd raw(n, n);
  std::size_t warn = 0;
  for (Index i = 0; i < n; ++i) {
    const auto& a = sets[static_cast<std::size_t>(i)];
    SelfNeighbors self;
    try {
      self = self_neighbors(a, k);
    } catch (const Error& e) {
      throw DataError("divergence from set '" + a.id + "': " + e.what());
    }
    for (Index j = 0; j < n; ++j) {
      const auto& b = sets[static_cast<std::size_t>(j)];
      try {
        const auto est = kl_divergence(a, self, b, k);
        raw(i, j) = est.value;
        warn += est.warning;
      } catch (const Error& e) {
        throw DataError("divergence for pair ('" + a.id + "', '" + b.id + "'): " + e.what());
      }
    }
  }
  if (warnings)
    *warnings = warn;
  return raw;
}

//! Kernel exp(-(raw_ij + raw_ji) / (2 sigma2)), projected onto the PSD cone.
inline DivergenceMatrix
kl_kernel_from_raw(const MatrixXd& raw, double sigma2)
{
  if (!(sigma2 > 0.0))
    throw ConfigError("kernel sigma2 must be positive");
  DivergenceMatrix d;
  d.raw = raw;
  const MatrixXd pre = (-(raw + raw.transpose()) / (2.0 * sigma2)).array().exp();
  auto proj = nearest_psd(pre);
  d.kernel = std::move(proj.matrix);
  d.projection_shift = proj.shift;
  return d;
}

inline DivergenceMatrix
kl_kernel_matrix(const std::vector<SampleSet>& sets, const KLConfig& config)
{
  config.validate();
  std::size_t warnings = 0;
  const MatrixXd raw = kl_raw_matrix(sets, config.k, &warnings);
  auto d = kl_kernel_from_raw(raw, config.sigma2);
  d.warnings = warnings;
  return d;
}

//! Distance induced by a PSD kernel: sqrt(K_aa + K_bb - 2 K_ab).
inline MatrixXd
kernel_distance(const MatrixXd& kernel)
{
  const Index n = kernel.rows();
  MatrixXd d(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      d(i, j) = i == j ? 0.0 : std::sqrt(std::max(0.0, kernel(i, i) + kernel(j, j) - kernel(i, j) - kernel(j, i)));
  return d;
}

//! Median of the off-diagonal raw divergences (symmetrized).
inline double
median_offdiag_divergence(const MatrixXd& raw)
{
  std::vector<double> v;
  for (Index j = 0; j < raw.cols(); ++j)
    for (Index i = 0; i < j; ++i)
      v.push_back(0.5 * (raw(i, j) + raw(j, i)));
  if (v.empty())
    return 1.0;
  const double m = median(v);
  return m > 0.0 ? m : 1.0;
}

//! Sample sets on disk: `index.csv` with columns id,z and one CSV per set
//! named `<id>.csv` (one observation per row, optional header).
struct SampleSetCollection
{
  std::vector<SampleSet> sets;
  std::vector<double> z;
};

inline SampleSetCollection
read_sample_sets(const std::filesystem::path& dir)
{
  const auto index_path = dir / "index.csv";
  std::ifstream idx(index_path);
  if (!idx)
    throw IoError("cannot open '" + index_path.string() + "'");
  std::vector<std::pair<std::string, double>> entries;
  {
    std::string line;
    std::size_t line_no = 0;
    std::size_t id_col = 0, z_col = 0, width = 0;
    bool have_header = false;
    while (std::getline(idx, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.empty() || line[0] == '#')
        continue;
      const auto fields = detail::split_csv_line(line);
      if (!have_header) {
        const auto id_it = std::find(fields.begin(), fields.end(), "id");
        const auto z_it = std::find(fields.begin(), fields.end(), "z");
        if (id_it == fields.end() || z_it == fields.end())
          throw DataError(index_path.string() + ": header must name columns id and z");
        id_col = static_cast<std::size_t>(id_it - fields.begin());
        z_col = static_cast<std::size_t>(z_it - fields.begin());
        width = fields.size();
        have_header = true;
        continue;
      }
      if (fields.size() != width)
        throw DataError(index_path.string() + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " + std::to_string(width));
      double z = 0.0;
      if (fields[id_col].empty() || !detail::parse_double(fields[z_col], z))
        throw DataError(index_path.string() + ": missing or non-numeric value at line " + std::to_string(line_no));
      entries.emplace_back(fields[id_col], z);
    }
    if (entries.empty())
      throw DataError(index_path.string() + ": no sample sets listed");
  }
  SampleSetCollection out;
  for (const auto& [id, z] : entries) {
    SampleSet s;
    s.id = id;
    const auto path = dir / (s.id + ".csv");
    std::ifstream is(path);
    if (!is)
      throw IoError("cannot open sample set '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.empty() || line[0] == '#')
        continue;
      const bool header_allowed = std::exchange(first, false);
      const auto fields = detail::split_csv_line(line);
      std::vector<double> vals(fields.size());
      bool ok = true;
      for (std::size_t c = 0; c < fields.size() && ok; ++c)
        ok = detail::parse_double(fields[c], vals[c]);
      if (!ok) {
        if (header_allowed)
          continue;
        throw DataError(path.string() + ": non-numeric or missing value at line " + std::to_string(line_no));
      }
      if (!rows.empty() && vals.size() != rows.front().size())
        throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(vals.size()) + " fields, expected " + std::to_string(rows.front().size()));
      rows.push_back(std::move(vals));
    }
    if (rows.empty())
      throw DataError(path.string() + ": no observations");
    s.points.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < rows[i].size(); ++c)
        s.points(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
    out.sets.push_back(std::move(s));
    out.z.push_back(z);
  }
  return out;
}

inline void
write_sample_sets(const std::filesystem::path& dir, const SampleSetCollection& c, const std::string& header_line = {})
{
  std::filesystem::create_directories(dir);
  std::ofstream idx(dir / "index.csv");
  if (!idx)
    throw IoError("cannot write '" + (dir / "index.csv").string() + "'");
  if (!header_line.empty())
    idx << header_line << '\n';
  idx << "id,z\n";
  for (std::size_t i = 0; i < c.sets.size(); ++i) {
    const auto& s = c.sets[i];
    idx << s.id << ',' << format_double(c.z[i]) << '\n';
    std::ofstream os(dir / (s.id + ".csv"));
    if (!os)
      throw IoError("cannot write sample set '" + s.id + "'");
    if (!header_line.empty())
      os << header_line << '\n';
    for (Index r = 0; r < s.points.rows(); ++r) {
      for (Index col = 0; col < s.points.cols(); ++col)
        os << (col ? "," : "") << format_double(s.points(r, col));
      os << '\n';
    }
  }
}

} // namespace flexcode
