#pragma once

#include "error.hpp"
#include "numeric.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flexcode {

enum class BasisFamily
{
  fourier,
  cosine,
  haar
};

inline std::string_view
to_string(BasisFamily f)
{
  switch (f) {
    case BasisFamily::fourier:
      return "fourier";
    case BasisFamily::cosine:
      return "cosine";
    case BasisFamily::haar:
      return "haar";
  }
  return "?";
}

inline BasisFamily
basis_family_from_string(std::string_view s)
{
  if (s == "fourier")
    return BasisFamily::fourier;
  if (s == "cosine")
    return BasisFamily::cosine;
  if (s == "haar")
    return BasisFamily::haar;
  throw ConfigError("unknown basis family '" + std::string(s) + "'");
}

//! An orthonormal system on [0, 1]. The first function is always the
//! constant 1; Fourier terms follow as cos/sin pairs of increasing frequency.
struct BasisSpec
{
  BasisFamily family = BasisFamily::fourier;
  std::size_t max_terms = 31;

  BasisSpec() = default;
  BasisSpec(BasisFamily f, std::size_t terms)
    : family(f)
    , max_terms(terms)
  {
    validate();
  }

  void validate() const
  {
    if (max_terms < 1)
      throw ConfigError("basis max_terms must be >= 1");
  }

  //! Haar rounds up to a complete resolution level.
  std::size_t effective_terms() const
  {
    if (family != BasisFamily::haar)
      return max_terms;
    std::size_t p = 1;
    while (p < max_terms)
      p *= 2;
    return p;
  }

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

namespace detail {

// Mother wavelet k >= 1 sits at level j with shift k - 2^j and is
// right-continuous; z = 1 belongs to the last dyadic cell.
inline double
haar_value(std::size_t k, double z)
{
  if (k == 0)
    return 1.0;
  std::size_t level = 0;
  while ((std::size_t{ 2 } << level) <= k)
    ++level;
  const std::size_t shift = k - (std::size_t{ 1 } << level);
  const std::size_t halves = std::size_t{ 2 } << level;
  auto q = static_cast<std::size_t>(std::floor(z * static_cast<double>(halves)));
  if (q >= halves)
    q = halves - 1;
  if (q / 2 != shift)
    return 0.0;
  const double amp = std::sqrt(std::ldexp(1.0, static_cast<int>(level)));
  return q % 2 == 0 ? amp : -amp;
}

} // namespace detail

//! Fills `out[0..terms)` with the basis functions at a single point.
//! No range check; callers validate.
inline void
eval_basis_point(const BasisSpec& spec, double z, std::size_t terms, double* out)
{
  constexpr double rt2 = std::numbers::sqrt2;
  constexpr double pi = std::numbers::pi;
  switch (spec.family) {
    case BasisFamily::fourier:
      out[0] = 1.0;
      for (std::size_t k = 1; k < terms; ++k) {
        const double freq = static_cast<double>((k + 1) / 2);
        out[k] = (k % 2 == 1) ? rt2 * std::cos(2.0 * pi * freq * z)
                              : rt2 * std::sin(2.0 * pi * freq * z);
      }
      break;
    case BasisFamily::cosine:
      out[0] = 1.0;
      for (std::size_t k = 1; k < terms; ++k)
        out[k] = rt2 * std::cos(pi * static_cast<double>(k) * z);
      break;
    case BasisFamily::haar:
      for (std::size_t k = 0; k < terms; ++k)
        out[k] = detail::haar_value(k, z);
      break;
  }
}

inline void
check_unit_interval(std::span<const double> z, const char* what = "basis grid")
{
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!(z[i] >= 0.0 && z[i] <= 1.0))
      throw DomainError(std::string(what) + ": point " + std::to_string(i) + " (" +
                        std::to_string(z[i]) + ") outside [0, 1]");
}

//! Basis matrix, one row per grid point and one column per term.
inline MatrixXd
eval_basis(const BasisSpec& spec, std::span<const double> z_grid, std::size_t terms = 0)
{
  spec.validate();
  check_unit_interval(z_grid);
  if (terms == 0)
    terms = spec.effective_terms();
  MatrixXd out(static_cast<Index>(z_grid.size()), static_cast<Index>(terms));
  std::vector<double> row(terms);
  for (std::size_t r = 0; r < z_grid.size(); ++r) {
    eval_basis_point(spec, z_grid[r], terms, row.data());
    for (std::size_t k = 0; k < terms; ++k)
      out(static_cast<Index>(r), static_cast<Index>(k)) = row[k];
  }
  return out;
}

inline MatrixXd
eval_basis(const BasisSpec& spec, const VectorXd& z_grid, std::size_t terms = 0)
{
  return eval_basis(spec, std::span<const double>(z_grid.data(), static_cast<std::size_t>(z_grid.size())), terms);
}

//! Affine map of the observed response range onto [0, 1].
struct ResponseScaler
{
  double z_min = 0.0;
  double z_max = 1.0;

  ResponseScaler() = default;
  ResponseScaler(double lo, double hi)
    : z_min(lo)
    , z_max(hi)
  {
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw DataError("degenerate response range: z_max must exceed z_min");
  }

  static ResponseScaler fit(std::span<const double> z)
  {
    if (z.empty())
      throw SizeError("cannot scale an empty response vector");
    auto [lo, hi] = std::minmax_element(z.begin(), z.end());
    if (!(*hi > *lo))
      throw DataError("degenerate response: all values equal");
    return { *lo, *hi };
  }

  double width() const { return z_max - z_min; }
  double to_unit(double z) const { return (z - z_min) / width(); }
  double from_unit(double u) const { return z_min + u * width(); }
  //! Density on [0, 1] to density on the original scale.
  double density_to_original(double f) const { return f / width(); }
  double density_to_unit(double f) const { return f * width(); }

  friend bool operator==(const ResponseScaler&, const ResponseScaler&) = default;
};

//! Tensor-product system phi_{i,j}(z) = phi_i(z1) phi_j(z2) on the unit square.
struct TensorBasisSpec
{
  BasisSpec first;
  BasisSpec second;

  std::size_t terms_first() const { return first.effective_terms(); }
  std::size_t terms_second() const { return second.effective_terms(); }
  std::size_t effective_terms() const { return terms_first() * terms_second(); }
  //! Row-major column index of the pair (i, j), both zero-based.
  std::size_t column(std::size_t i, std::size_t j) const { return i * terms_second() + j; }
};

inline MatrixXd
eval_tensor_basis(const TensorBasisSpec& spec, std::span<const std::pair<double, double>> grid)
{
  const std::size_t n1 = spec.terms_first();
  const std::size_t n2 = spec.terms_second();
  std::vector<double> z1(grid.size()), z2(grid.size());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    z1[r] = grid[r].first;
    z2[r] = grid[r].second;
  }
  const MatrixXd b1 = eval_basis(spec.first, z1, n1);
  const MatrixXd b2 = eval_basis(spec.second, z2, n2);
  MatrixXd out(static_cast<Index>(grid.size()), static_cast<Index>(n1 * n2));
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      out.col(static_cast<Index>(spec.column(i, j))) =
        b1.col(static_cast<Index>(i)).cwiseProduct(b2.col(static_cast<Index>(j)));
  return out;
}

} // namespace flexcode
