#pragma once

#include "covariates.hpp"
#include "error.hpp"
#include "numeric.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace flexcode {

enum class Scenario
{
  irrelevant_covariates,
  manifold,
  non_sparse,
  mixed_types,
  uniform_null
};

inline std::string_view
to_string(Scenario s)
{
  switch (s) {
    case Scenario::irrelevant_covariates:
      return "irrelevant";
    case Scenario::manifold:
      return "manifold";
    case Scenario::non_sparse:
      return "nonsparse";
    case Scenario::mixed_types:
      return "mixed";
    case Scenario::uniform_null:
      return "uniform";
  }
  return "?";
}

inline Scenario
scenario_from_string(std::string_view s)
{
  for (auto sc : { Scenario::irrelevant_covariates, Scenario::manifold, Scenario::non_sparse,
                   Scenario::mixed_types, Scenario::uniform_null })
    if (s == to_string(sc))
      return sc;
  throw ConfigError("unknown scenario '" + std::string(s) +
                    "' (expected irrelevant, manifold, nonsparse, mixed or uniform)");
}

struct ScenarioConfig
{
  Scenario scenario = Scenario::irrelevant_covariates;
  int dims = 10;
  int n = 1000;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (dims < 1)
      throw ConfigError("dims must be >= 1");
    if (n < 1)
      throw ConfigError("n must be >= 1");
    if (scenario == Scenario::manifold && dims < 2)
      throw ConfigError("the manifold scenario needs dims >= 2");
    if (scenario == Scenario::mixed_types && (dims < 4 || dims % 2 != 0))
      throw ConfigError("the mixed-types scenario needs an even dims >= 4");
  }
};

//! A covariate table: numeric columns hold values, categorical columns
//! hold the zero-based index into `levels[j]`.
struct Table
{
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> levels;
  MatrixXd values;
  std::vector<double> z;
  std::string response_name = "z";

  bool categorical(std::size_t j) const { return !levels[j].empty(); }
};

//! Encoded covariates for the regressors. Categorical columns become
//! one-hot indicators scaled by `onehot_scale`, left unstandardized.
inline Covariates
encode(const Table& t, double onehot_scale = std::numbers::sqrt2 / 2.0)
{
  Index width = 0;
  for (std::size_t j = 0; j < t.names.size(); ++j)
    width += t.categorical(j) ? static_cast<Index>(t.levels[j].size()) : 1;
  MatrixXd x = MatrixXd::Zero(t.values.rows(), width);
  std::vector<char> raw(static_cast<std::size_t>(width), 0);
  Index col = 0;
  for (std::size_t j = 0; j < t.names.size(); ++j) {
    const auto src = static_cast<Index>(j);
    if (!t.categorical(j)) {
      x.col(col++) = t.values.col(src);
      continue;
    }
    for (Index r = 0; r < x.rows(); ++r)
      x(r, col + static_cast<Index>(t.values(r, src))) = onehot_scale;
    for (std::size_t l = 0; l < t.levels[j].size(); ++l)
      raw[static_cast<std::size_t>(col) + l] = 1;
    col += static_cast<Index>(t.levels[j].size());
  }
  const bool any_raw = std::find(raw.begin(), raw.end(), 1) != raw.end();
  return Covariates::features(std::move(x), any_raw ? std::move(raw) : std::vector<char>{});
}

//! Generated scenario data with its exact conditional density.
struct ScenarioData
{
  ScenarioConfig config;
  Table table;

  //! Generating density of Z given covariate row `row` of `values`.
  double true_density(double z, const MatrixXd& values, Index row) const
  {
    auto normal = [](double v, double mu, double sd) {
      const double t = (v - mu) / sd;
      return std::exp(-0.5 * t * t) / (sd * std::sqrt(2.0 * std::numbers::pi));
    };
    const auto d = config.dims;
    switch (config.scenario) {
      case Scenario::irrelevant_covariates:
        return normal(z, values(row, 0), 0.5);
      case Scenario::manifold: {
        double theta = std::atan2(manifold_coords(values, row, 1), manifold_coords(values, row, 0));
        if (theta < 0)
          theta += 2.0 * std::numbers::pi;
        return normal(z, theta, 0.5);
      }
      case Scenario::non_sparse:
        return normal(z, values.row(row).mean(), 0.5);
      case Scenario::mixed_types: {
        const auto level = static_cast<int>(values(row, 0));
        if (level <= 1)
          return normal(z, values(row, d / 2), 0.5);
        return normal(z, 10.0 + 2.0 * values(row, d / 2 + 1), 1.0);
      }
      case Scenario::uniform_null:
        return (z >= 0.0 && z <= 1.0) ? 1.0 : 0.0;
    }
    return 0.0;
  }

  double true_density(double z, Index row) const { return true_density(z, table.values, row); }

  //! Seeded rotation applied to the manifold embedding.
  MatrixXd rotation;

private:
  double manifold_coords(const MatrixXd& values, Index row, Index k) const
  {
    return rotation.col(k).dot(values.row(row).transpose());
  }
};

namespace detail {

inline MatrixXd
random_rotation(int dims, std::mt19937_64& rng)
{
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd a(dims, dims);
  for (Index j = 0; j < dims; ++j)
    for (Index i = 0; i < dims; ++i)
      a(i, j) = g(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(dims, dims);
  // Fix column signs so Q is a deterministic function of `a`.
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dims; ++j)
    if (r(j, j) < 0)
      q.col(j) *= -1.0;
  return q;
}

} // namespace detail

//! Seeded draw from a toy scenario. The 0.5 noise parameters are
//! standard deviations.
inline ScenarioData
generate(const ScenarioConfig& cfg)
{
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Index n = cfg.n, d = cfg.dims;

  ScenarioData out;
  out.config = cfg;
  Table& t = out.table;
  t.values.resize(n, d);
  t.z.resize(static_cast<std::size_t>(n));
  for (Index j = 0; j < d; ++j)
    t.names.push_back("x" + std::to_string(j + 1));
  t.levels.assign(static_cast<std::size_t>(d), {});

  switch (cfg.scenario) {
    case Scenario::irrelevant_covariates:
    case Scenario::non_sparse:
    case Scenario::uniform_null:
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j)
          t.values(i, j) = g(rng);
        double z;
        if (cfg.scenario == Scenario::irrelevant_covariates)
          z = t.values(i, 0) + 0.5 * g(rng);
        else if (cfg.scenario == Scenario::non_sparse)
          z = t.values.row(i).mean() + 0.5 * g(rng);
        else
          z = unif(rng);
        t.z[static_cast<std::size_t>(i)] = z;
      }
      break;
    case Scenario::manifold: {
      out.rotation = detail::random_rotation(cfg.dims, rng);
      for (Index i = 0; i < n; ++i) {
        const double theta = 2.0 * std::numbers::pi * unif(rng);
        t.values.row(i) = (std::cos(theta) * out.rotation.col(0) + std::sin(theta) * out.rotation.col(1)).transpose();
        t.z[static_cast<std::size_t>(i)] = theta + 0.5 * g(rng);
      }
      break;
    }
    case Scenario::mixed_types: {
      const Index half = d / 2;
      for (Index j = 0; j < half; ++j)
        t.levels[static_cast<std::size_t>(j)] = { "c1", "c2", "c3", "c4", "c5" };
      std::uniform_int_distribution<int> cat(0, 4);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < half; ++j)
          t.values(i, j) = cat(rng);
        for (Index j = half; j < d; ++j)
          t.values(i, j) = g(rng);
        double z;
        if (t.values(i, 0) <= 1)
          z = t.values(i, half) + 0.5 * g(rng);
        else
          z = 10.0 + 2.0 * (t.values(i, half + 1) + 0.5 * g(rng));
        t.z[static_cast<std::size_t>(i)] = z;
      }
      break;
    }
  }
  return out;
}

//! Shortest decimal form that reads back to the same double.
inline std::string
format_double(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void
write_table_csv(std::ostream& os, const Table& t)
{
  for (const auto& name : t.names)
    os << name << ',';
  os << t.response_name << '\n';
  for (Index i = 0; i < t.values.rows(); ++i) {
    for (std::size_t j = 0; j < t.names.size(); ++j) {
      const double v = t.values(i, static_cast<Index>(j));
      if (t.categorical(j))
        os << t.levels[j][static_cast<std::size_t>(v)];
      else
        os << format_double(v);
      os << ',';
    }
    os << format_double(t.z[static_cast<std::size_t>(i)]) << '\n';
  }
}

namespace detail {

inline std::string
trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string>
split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  return out;
}

inline bool
parse_double(const std::string& s, double& v)
{
  if (s.empty())
    return false;
  const char* b = s.data();
  if (*b == '+')
    ++b;
  const auto res = std::from_chars(b, s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v);
}

inline bool
is_missing(const std::string& s)
{
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "?";
}

} // namespace detail

//! Reads a CSV with a header row. Lines starting with '#' are skipped.
//! Columns with any non-numeric entry are categorical (levels sorted).
//! With an empty `response_col` there is no response column. `schema`
//! fixes the covariate columns and levels (for prediction tables).
inline Table
read_table_csv(std::istream& is, const std::string& response_col, const Table* schema = nullptr,
               const std::string& source = "input")
{
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 0;
  std::vector<std::size_t> row_lines;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    auto fields = detail::split_csv_line(line);
    if (header.empty()) {
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header.size())
      throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    rows.push_back(std::move(fields));
    row_lines.push_back(line_no);
  }
  if (header.empty())
    throw DataError(source + ": missing header row");
  if (rows.empty())
    throw DataError(source + ": no data rows");

  std::size_t response = header.size();
  if (!response_col.empty()) {
    const auto it = std::find(header.begin(), header.end(), response_col);
    if (it == header.end())
      throw DataError(source + ": response column '" + response_col + "' not found in header");
    response = static_cast<std::size_t>(it - header.begin());
  }

  Table t;
  t.response_name = response_col;
  std::vector<std::size_t> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != response)
      cov_cols.push_back(c);
  for (std::size_t c : cov_cols)
    t.names.push_back(header[c]);
  if (schema && schema->names != t.names)
    throw DataError(source + ": covariate columns do not match the model's columns");

  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < header.size(); ++c)
      if (detail::is_missing(rows[r][c]))
        throw DataError(source + ": missing value at line " + std::to_string(row_lines[r]) + ", column '" +
                        header[c] + "'");

  const auto n = static_cast<Index>(rows.size());
  t.values.resize(n, static_cast<Index>(cov_cols.size()));
  t.levels.assign(cov_cols.size(), {});
  for (std::size_t j = 0; j < cov_cols.size(); ++j) {
    const std::size_t c = cov_cols[j];
    bool numeric = true;
    std::vector<double> vals(rows.size());
    for (std::size_t r = 0; r < rows.size() && numeric; ++r)
      numeric = detail::parse_double(rows[r][c], vals[r]);
    const bool want_categorical = schema ? schema->categorical(j) : !numeric;
    if (!want_categorical) {
      if (!numeric)
        throw DataError(source + ": column '" + header[c] + "' must be numeric");
      for (std::size_t r = 0; r < rows.size(); ++r)
        t.values(static_cast<Index>(r), static_cast<Index>(j)) = vals[r];
      continue;
    }
    if (schema) {
      t.levels[j] = schema->levels[j];
    } else {
      for (const auto& row : rows)
        t.levels[j].push_back(row[c]);
      std::sort(t.levels[j].begin(), t.levels[j].end());
      t.levels[j].erase(std::unique(t.levels[j].begin(), t.levels[j].end()), t.levels[j].end());
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& lv = t.levels[j];
      const auto it = std::find(lv.begin(), lv.end(), rows[r][c]);
      if (it == lv.end())
        throw DataError(source + ": unknown level '" + rows[r][c] + "' at line " + std::to_string(row_lines[r]) +
                        ", column '" + header[c] + "'");
      t.values(static_cast<Index>(r), static_cast<Index>(j)) = static_cast<double>(it - lv.begin());
    }
  }
  if (response < header.size()) {
    t.z.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (!detail::parse_double(rows[r][response], t.z[r]))
        throw DataError(source + ": response value '" + rows[r][response] + "' at line " +
                        std::to_string(row_lines[r]) + " is not numeric");
  }
  return t;
}

inline Table
read_table_csv(const std::string& path, const std::string& response_col, const Table* schema = nullptr)
{
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot open '" + path + "' for reading");
  return read_table_csv(is, response_col, schema, path);
}

} // namespace flexcode
