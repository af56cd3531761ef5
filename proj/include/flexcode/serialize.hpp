#pragma once

#include "basis.hpp"
#include "covariates.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "regress.hpp"

#include <json.hpp>

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>

namespace flexcode {

using json = nlohmann::json;

inline constexpr int model_format_version = 1;

namespace detail {

inline json
number_to_json(double v)
{
  return std::isfinite(v) ? json(v) : json(nullptr);
}

inline double
number_from_json(const json& j)
{
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json
matrix_to_json(const MatrixXd& m)
{
  json data = json::array();
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      data.push_back(m(i, j));
  return { { "rows", m.rows() }, { "cols", m.cols() }, { "data", std::move(data) } };
}

inline MatrixXd
matrix_from_json(const json& j)
{
  const auto r = j.at("rows").get<Index>();
  const auto c = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != r * c)
    throw DataError("model file: matrix data length does not match its shape");
  MatrixXd m(r, c);
  std::size_t k = 0;
  for (Index jj = 0; jj < c; ++jj)
    for (Index i = 0; i < r; ++i)
      m(i, jj) = data[k++].get<double>();
  return m;
}

inline json
vector_to_json(const VectorXd& v)
{
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i)
    a.push_back(v(i));
  return a;
}

inline VectorXd
vector_from_json(const json& j)
{
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

inline json
regressor_config_to_json(const RegressorConfig& c)
{
  return { { "kind", to_string(c.kind) },           { "neighbors", c.neighbors },
           { "bandwidths", c.bandwidths },           { "kernel_bandwidths", c.kernel_bandwidths },
           { "eigen_counts", c.eigen_counts },       { "penalties", c.penalties },
           { "relative_scale", c.relative_scale } };
}

inline RegressorConfig
regressor_config_from_json(const json& j)
{
  RegressorConfig c;
  c.kind = regressor_kind_from_string(j.at("kind").get<std::string>());
  c.neighbors = j.at("neighbors").get<std::vector<int>>();
  c.bandwidths = j.at("bandwidths").get<std::vector<double>>();
  c.kernel_bandwidths = j.at("kernel_bandwidths").get<std::vector<double>>();
  c.eigen_counts = j.at("eigen_counts").get<std::vector<int>>();
  c.penalties = j.at("penalties").get<std::vector<double>>();
  c.relative_scale = j.at("relative_scale").get<bool>();
  return c;
}

inline json
config_to_json(const FlexCodeConfig& c)
{
  return { { "basis", { { "family", to_string(c.basis.family) }, { "max_terms", c.basis.max_terms } } },
           { "regressor", regressor_config_to_json(c.regressor) },
           { "max_cutoff", c.max_cutoff },
           { "train_frac", c.train_frac },
           { "valid_frac", c.valid_frac },
           { "seed", c.seed },
           { "post", { { "nonneg_clip", c.post.nonneg_clip }, { "bump_delta", c.post.bump_delta } } },
           { "grid_cells", c.grid_cells },
           { "tune_frac", c.tune_frac } };
}

inline FlexCodeConfig
config_from_json(const json& j)
{
  FlexCodeConfig c;
  const auto& b = j.at("basis");
  c.basis = BasisSpec(basis_family_from_string(b.at("family").get<std::string>()), b.at("max_terms").get<std::size_t>());
  c.regressor = regressor_config_from_json(j.at("regressor"));
  c.max_cutoff = j.at("max_cutoff").get<std::size_t>();
  c.train_frac = j.at("train_frac").get<double>();
  c.valid_frac = j.at("valid_frac").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.post.nonneg_clip = j.at("post").at("nonneg_clip").get<bool>();
  c.post.bump_delta = j.at("post").at("bump_delta").get<double>();
  c.grid_cells = j.at("grid_cells").get<std::size_t>();
  c.tune_frac = j.at("tune_frac").get<double>();
  return c;
}

} // namespace detail

//! Structured document for a fitted model. Shared training state
//! (covariate reference, spectral bases, lasso features) is stored once.
inline json
model_to_json(const FittedCDE& m)
{
  json j;
  j["format"] = "flexcode-model";
  j["format_version"] = model_format_version;
  j["config"] = detail::config_to_json(m.config);
  j["cutoff"] = m.cutoff;
  j["scaler"] = { { "z_min", m.scaler.z_min }, { "z_max", m.scaler.z_max } };
  j["split"] = { { "train", m.split.train },
                 { "validation", m.split.validation },
                 { "test", m.split.test },
                 { "seed", m.split.seed } };
  json trace = json::array();
  for (std::size_t i = 0; i < m.trace.loss.size(); ++i)
    trace.push_back({ { "cutoff", i + 1 },
                      { "loss", detail::number_to_json(m.trace.loss[i]) },
                      { "se", detail::number_to_json(m.trace.se[i]) },
                      { "coef_loss", detail::number_to_json(m.trace.coef_loss[i]) } });
  j["trace"] = std::move(trace);

  std::map<const void*, std::size_t> refs, spectral, lasso;
  json ref_arr = json::array(), spec_arr = json::array(), lasso_arr = json::array(), regs = json::array();
  for (const auto& r : m.regressors) {
    auto ref_id = refs.find(r.reference.get());
    if (ref_id == refs.end()) {
      json rj = { { "kind", r.reference->kind == DistanceKind::euclidean ? "euclidean" : "precomputed" },
                  { "size", r.reference->size } };
      if (r.reference->kind == DistanceKind::euclidean) {
        rj["standardized"] = detail::matrix_to_json(r.reference->standardized);
        rj["center"] = detail::vector_to_json(r.reference->center);
        rj["scale"] = detail::vector_to_json(r.reference->scale);
      }
      ref_arr.push_back(std::move(rj));
      ref_id = refs.emplace(r.reference.get(), ref_arr.size() - 1).first;
    }
    json rj = { { "kind", to_string(r.kind) },
                { "reference", ref_id->second },
                { "target_mean", r.target_mean },
                { "degenerate", r.degenerate },
                { "validation_mse", detail::number_to_json(r.validation_mse) },
                { "neighbors", r.neighbors },
                { "bandwidth", r.bandwidth },
                { "eigen_count", r.eigen_count },
                { "penalty", r.penalty },
                { "intercept", r.intercept } };
    if (r.targets.size() > 0)
      rj["targets"] = detail::vector_to_json(r.targets);
    if (r.spectral) {
      auto it = spectral.find(r.spectral.get());
      if (it == spectral.end()) {
        spec_arr.push_back({ { "kernel_bandwidth", r.spectral->kernel_bandwidth },
                             { "values", detail::vector_to_json(r.spectral->values) },
                             { "vectors", detail::matrix_to_json(r.spectral->vectors) } });
        it = spectral.emplace(r.spectral.get(), spec_arr.size() - 1).first;
      }
      rj["spectral"] = it->second;
      rj["spectral_coef"] = detail::vector_to_json(r.spectral_coef);
    }
    if (r.lasso_features) {
      auto it = lasso.find(r.lasso_features.get());
      if (it == lasso.end()) {
        lasso_arr.push_back({ { "powers", r.lasso_features->powers },
                              { "center", detail::vector_to_json(r.lasso_features->center) },
                              { "scale", detail::vector_to_json(r.lasso_features->scale) } });
        it = lasso.emplace(r.lasso_features.get(), lasso_arr.size() - 1).first;
      }
      rj["lasso_features"] = it->second;
      rj["coef"] = detail::vector_to_json(r.coef);
    }
    regs.push_back(std::move(rj));
  }
  j["references"] = std::move(ref_arr);
  j["spectral_states"] = std::move(spec_arr);
  j["lasso_features"] = std::move(lasso_arr);
  j["regressors"] = std::move(regs);
  return j;
}

inline FittedCDE
model_from_json(const json& j)
{
  try {
    if (j.at("format").get<std::string>() != "flexcode-model")
      throw DataError("not a flexcode model document");
    if (j.at("format_version").get<int>() != model_format_version)
      throw DataError("unsupported model format version " + std::to_string(j.at("format_version").get<int>()));
    FittedCDE m;
    m.config = detail::config_from_json(j.at("config"));
    m.cutoff = j.at("cutoff").get<std::size_t>();
    m.scaler = ResponseScaler(j.at("scaler").at("z_min").get<double>(), j.at("scaler").at("z_max").get<double>());
    const auto& s = j.at("split");
    m.split.train = s.at("train").get<std::vector<Index>>();
    m.split.validation = s.at("validation").get<std::vector<Index>>();
    m.split.test = s.at("test").get<std::vector<Index>>();
    m.split.seed = s.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trace")) {
      m.trace.loss.push_back(detail::number_from_json(t.at("loss")));
      m.trace.se.push_back(detail::number_from_json(t.at("se")));
      m.trace.coef_loss.push_back(detail::number_from_json(t.at("coef_loss")));
    }

    std::vector<std::shared_ptr<const Reference>> refs;
    for (const auto& rj : j.at("references")) {
      auto r = std::make_shared<Reference>();
      r->kind = rj.at("kind").get<std::string>() == "euclidean" ? DistanceKind::euclidean : DistanceKind::precomputed;
      r->size = rj.at("size").get<Index>();
      if (r->kind == DistanceKind::euclidean) {
        r->standardized = detail::matrix_from_json(rj.at("standardized"));
        r->center = detail::vector_from_json(rj.at("center"));
        r->scale = detail::vector_from_json(rj.at("scale"));
      }
      refs.push_back(std::move(r));
    }
    std::vector<std::shared_ptr<const SpectralState>> spec;
    for (const auto& sj : j.at("spectral_states"))
      spec.push_back(std::make_shared<const SpectralState>(SpectralState{ sj.at("kernel_bandwidth").get<double>(),
                                                                          detail::vector_from_json(sj.at("values")),
                                                                          detail::matrix_from_json(sj.at("vectors")) }));
    std::vector<std::shared_ptr<const LassoFeatures>> lasso;
    for (const auto& lj : j.at("lasso_features")) {
      auto lf = std::make_shared<LassoFeatures>();
      lf->powers = lj.at("powers").get<std::vector<int>>();
      lf->center = detail::vector_from_json(lj.at("center"));
      lf->scale = detail::vector_from_json(lj.at("scale"));
      lasso.push_back(std::move(lf));
    }
    auto pick = [](const auto& pool, const json& idx, const char* what) {
      const auto i = idx.get<std::size_t>();
      if (i >= pool.size())
        throw DataError(std::string("model file: dangling ") + what + " index");
      return pool[i];
    };
    for (const auto& rj : j.at("regressors")) {
      FittedRegressor r;
      r.kind = regressor_kind_from_string(rj.at("kind").get<std::string>());
      r.reference = pick(refs, rj.at("reference"), "reference");
      r.target_mean = rj.at("target_mean").get<double>();
      r.degenerate = rj.at("degenerate").get<bool>();
      r.validation_mse = detail::number_from_json(rj.at("validation_mse"));
      r.neighbors = rj.at("neighbors").get<int>();
      r.bandwidth = rj.at("bandwidth").get<double>();
      r.eigen_count = rj.at("eigen_count").get<int>();
      r.penalty = rj.at("penalty").get<double>();
      r.intercept = rj.at("intercept").get<double>();
      if (rj.contains("targets"))
        r.targets = detail::vector_from_json(rj.at("targets"));
      if (rj.contains("spectral")) {
        r.spectral = pick(spec, rj.at("spectral"), "spectral state");
        r.spectral_coef = detail::vector_from_json(rj.at("spectral_coef"));
      }
      if (rj.contains("lasso_features")) {
        r.lasso_features = pick(lasso, rj.at("lasso_features"), "lasso feature");
        r.coef = detail::vector_from_json(rj.at("coef"));
      }
      m.regressors.push_back(std::move(r));
    }
    if (m.regressors.size() + 1 != m.cutoff)
      throw DataError("model file: regressor count does not match the cutoff");
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

//! Writes `header` lines (each prefixed with "# ") and the JSON document.
inline void
save_model(std::ostream& os, const FittedCDE& m, const json& extra = json::object(), const std::string& header = {})
{
  json j = model_to_json(m);
  if (!extra.empty())
    j["extra"] = extra;
  if (!header.empty())
    os << "# " << header << '\n';
  os << j.dump() << '\n';
}

//! Reads a model document, skipping leading '#' comment lines.
inline FittedCDE
load_model(std::istream& is, json* extra = nullptr)
{
  std::string line, body;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] == '#')
      continue;
    body += line;
    body += '\n';
  }
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (extra)
    *extra = j.contains("extra") ? j.at("extra") : json::object();
  return model_from_json(j);
}

} // namespace flexcode
