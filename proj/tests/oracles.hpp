// Independent reference computations used by the tests. Nothing here
// calls into the library's numerical routines.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

//! Cyclic Jacobi eigenvalue iteration for a small symmetric matrix.
//! Returns (values descending, vectors as columns in matching order).
inline std::pair<std::vector<double>, Matrix>
jacobi_eigen(Matrix a, int max_sweeps = 100)
{
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    v[i][i] = 1.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        off += a[p][q] * a[p][q];
    if (off < 1e-26)
      break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300)
          continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return a[x][x] > a[y][y]; });
  std::vector<double> vals(n);
  Matrix vecs(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    vals[j] = a[idx[j]][idx[j]];
    for (std::size_t i = 0; i < n; ++i)
      vecs[i][j] = v[i][idx[j]];
  }
  return { vals, vecs };
}

inline double
min_eigenvalue(const Matrix& a)
{
  return jacobi_eigen(a).first.back();
}

//! k-th smallest value of |x - y| over y in `pool`, skipping position
//! `skip` when it is a valid index (nested loops, no sorting shortcuts).
inline double
kth_distance(const std::vector<std::vector<double>>& pool,
             const std::vector<double>& x,
             int k,
             std::ptrdiff_t skip = -1)
{
  std::vector<double> d;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (static_cast<std::ptrdiff_t>(j) == skip)
      continue;
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c)
      s += (x[c] - pool[j][c]) * (x[c] - pool[j][c]);
    d.push_back(std::sqrt(s));
  }
  std::sort(d.begin(), d.end());
  return d[static_cast<std::size_t>(k - 1)];
}

//! Brute-force k-NN KL divergence estimate from sample A to sample B.
inline double
kl_brute_force(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b, int k)
{
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  const double d = static_cast<double>(a.front().size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double nu = std::max(kth_distance(b, a[i], k), 1e-12);
    const double rho = std::max(kth_distance(a, a[i], k, static_cast<std::ptrdiff_t>(i)), 1e-12);
    s += std::log(nu / rho);
  }
  return d / n * s + std::log(m / (n - 1.0));
}

inline double
normal_pdf(double z, double mu, double sd)
{
  const double t = (z - mu) / sd;
  return std::exp(-0.5 * t * t) / (sd * std::sqrt(2.0 * 3.14159265358979323846));
}

} // namespace oracle
