#pragma once

#include "error.hpp"
#include "numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace flexcode {

//! Disjoint, covering partition of row indices. Each part is sorted.
struct DataSplit
{
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
  std::uint64_t seed = 0;

  std::size_t size() const { return train.size() + validation.size() + test.size(); }

  //! Throws unless the parts are disjoint and cover 0..n-1.
  void validate(std::size_t n) const
  {
    if (size() != n)
      throw DataError("split does not cover all " + std::to_string(n) + " rows");
    std::vector<char> seen(n, 0);
    for (const auto* part : { &train, &validation, &test })
      for (Index i : *part) {
        if (i < 0 || static_cast<std::size_t>(i) >= n)
          throw DataError("split index " + std::to_string(i) + " out of range");
        if (seen[static_cast<std::size_t>(i)]++)
          throw DataError("split index " + std::to_string(i) + " appears twice");
      }
  }

  friend bool operator==(const DataSplit&, const DataSplit&) = default;
};

//! Seeded uniform random partition. Fractions are normalized by their sum;
//! train and validation sizes are rounded and the test part takes the rest.
inline DataSplit
make_split(std::size_t n, double train_frac, double valid_frac, double test_frac, std::uint64_t seed)
{
  if (n < 3)
    throw SizeError("make_split needs n >= 3, got " + std::to_string(n));
  if (!(train_frac > 0) || !(valid_frac > 0) || test_frac < 0)
    throw ConfigError("split fractions must be positive");
  const double total = train_frac + valid_frac + test_frac;
  if (total > 1.0 + 1e-12)
    throw ConfigError("split fractions sum to more than 1");
  const double nd = static_cast<double>(n);
  const auto n_train = static_cast<std::size_t>(std::llround(nd * train_frac / total));
  auto n_valid = static_cast<std::size_t>(std::llround(nd * valid_frac / total));
  if (test_frac == 0 && n_train < n)
    n_valid = n - n_train;
  if (n_train < 1 || n_valid < 1 || n_train + n_valid > n ||
      (test_frac > 0 && n_train + n_valid >= n))
    throw SizeError("n = " + std::to_string(n) + " too small for the requested split");

  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{ 0 });
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  DataSplit s;
  s.seed = seed;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                      perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

//! Two-way split of `rows` (positions 0..rows-1) used for hyperparameter tuning.
inline DataSplit
make_tuning_split(std::size_t rows, double tune_frac, std::uint64_t seed)
{
  if (rows < 4)
    throw SizeError("regression needs at least 4 rows, got " + std::to_string(rows));
  return make_split(rows, 1.0 - tune_frac, tune_frac, 0.0, seed);
}

} // namespace flexcode
