#pragma once

#include "error.hpp"
#include "numeric.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace flexcode {

struct PostProcess
{
  bool nonneg_clip = true;
  double bump_delta = 0.0;

  void validate() const
  {
    if (!(bump_delta >= 0.0) || !std::isfinite(bump_delta))
      throw ConfigError("bump removal delta must be a finite nonnegative number");
  }

  friend bool operator==(const PostProcess&, const PostProcess&) = default;
};

//! A density post-processed on a uniform grid over [0, 1]: clipped, with
//! low-mass bumps removed, rescaled to unit trapezoid mass.
struct NormalizedDensity
{
  VectorXd values;
  double scale = 1.0;
  std::vector<char> removed;
  bool clipped = true;
  bool fallback = false;

  //! Density at an arbitrary u in [0, 1] given the raw series value there.
  //! Agrees with `values` at grid nodes.
  double at(double u, double raw) const
  {
    if (fallback)
      return 1.0;
    const Index cells = values.size() - 1;
    auto j = static_cast<Index>(std::floor(u * static_cast<double>(cells)));
    j = std::clamp<Index>(j, 0, cells - 1);
    if (removed[static_cast<std::size_t>(j)] || removed[static_cast<std::size_t>(j + 1)])
      return 0.0;
    return (clipped ? std::max(raw, 0.0) : raw) * scale;
  }
};

//! Clip negatives, drop positive runs whose share of the clipped mass is
//! below `delta` (the heaviest run always survives), renormalize by the
//! trapezoid rule. A density with no positive value becomes uniform and
//! is flagged.
inline NormalizedDensity
normalize_density(const VectorXd& raw, double delta = 0.0, bool clip = true)
{
  const Index n = raw.size();
  if (n < 2)
    throw SizeError("density grid needs at least two points");
  if (!(delta >= 0.0))
    throw ConfigError("bump removal delta must be nonnegative");
  for (Index i = 0; i < n; ++i)
    if (!std::isfinite(raw(i)))
      throw NumericError("non-finite density value at grid point " + std::to_string(i));

  NormalizedDensity out;
  out.clipped = clip;
  out.removed.assign(static_cast<std::size_t>(n), 0);
  if ((raw.array() <= 0.0).all()) {
    out.values = VectorXd::Ones(n);
    out.fallback = true;
    return out;
  }
  VectorXd v = clip ? VectorXd(raw.cwiseMax(0.0)) : raw;

  if (clip && delta > 0.0) {
    const VectorXd w = trapezoid_weights(n);
    struct Run
    {
      Index lo, hi;
      double mass;
    };
    std::vector<Run> runs;
    double total = 0.0;
    for (Index i = 0; i < n;) {
      if (v(i) <= 0.0) {
        ++i;
        continue;
      }
      Run r{ i, i, 0.0 };
      while (r.hi + 1 < n && v(r.hi + 1) > 0.0)
        ++r.hi;
      for (Index k = r.lo; k <= r.hi; ++k)
        r.mass += w(k) * v(k);
      total += r.mass;
      runs.push_back(r);
      i = r.hi + 1;
    }
    std::size_t heaviest = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
      if (runs[r].mass > runs[heaviest].mass)
        heaviest = r;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (r == heaviest || runs[r].mass >= delta * total)
        continue;
      for (Index k = runs[r].lo; k <= runs[r].hi; ++k) {
        v(k) = 0.0;
        out.removed[static_cast<std::size_t>(k)] = 1;
      }
    }
  }

  const double mass = trapezoid_uniform(v);
  if (!(mass > 0.0)) {
    out.values = VectorXd::Ones(n);
    out.fallback = true;
    return out;
  }
  out.scale = 1.0 / mass;
  out.values = v * out.scale;
  return out;
}

} // namespace flexcode
