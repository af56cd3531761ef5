#pragma once

#include "baselines.hpp"
#include "datasets.hpp"
#include "error.hpp"
#include "estimator.hpp"
#include "loss.hpp"
#include "numeric.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace flexcode {

enum class Method
{
  flexcode_knn,
  flexcode_nw,
  flexcode_spectral,
  flexcode_lasso,
  kde,
  knn_cde,
  kernel_cde,
  oracle // the generating density, scored like any other method
};

inline std::string_view
to_string(Method m)
{
  switch (m) {
    case Method::flexcode_knn:
      return "flexcode-knn";
    case Method::flexcode_nw:
      return "flexcode-nw";
    case Method::flexcode_spectral:
      return "flexcode-spectral";
    case Method::flexcode_lasso:
      return "flexcode-lasso";
    case Method::kde:
      return "kde";
    case Method::knn_cde:
      return "knn-cde";
    case Method::kernel_cde:
      return "kernel-cde";
    case Method::oracle:
      return "oracle";
  }
  return "?";
}

inline Method
method_from_string(std::string_view s)
{
  for (Method m : { Method::flexcode_knn, Method::flexcode_nw, Method::flexcode_spectral, Method::flexcode_lasso,
                    Method::kde, Method::knn_cde, Method::kernel_cde, Method::oracle })
    if (to_string(m) == s)
      return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

struct BenchmarkConfig
{
  std::vector<Scenario> scenarios{ Scenario::irrelevant_covariates };
  std::vector<Method> methods{ Method::flexcode_knn, Method::kernel_cde };
  std::vector<std::size_t> dims{ 10 };
  std::vector<std::size_t> sizes{ 1000 };
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  FlexCodeConfig flexcode; // regressor kind is overridden per method
  BaselineConfig baseline;

  void validate() const
  {
    if (scenarios.empty() || methods.empty() || dims.empty() || sizes.empty())
      throw ConfigError("benchmark needs at least one scenario, method, dimension and size");
    if (reps < 1)
      throw ConfigError("--reps must be >= 1");
    if (workers < 1)
      throw ConfigError("--workers must be >= 1");
    flexcode.validate();
  }
};

struct BenchmarkRow
{
  Method method = Method::flexcode_knn;
  Scenario scenario = Scenario::irrelevant_covariates;
  std::size_t dims = 0;
  std::size_t n = 0;
  std::size_t rep = 0;
  double loss = 0.0;
  double se = 0.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
};

//! One repetition of one method on one generated data set; the test split
//! is scored.
inline BenchmarkRow
run_method(Method method, const ScenarioData& data, const FlexCodeConfig& base, const BaselineConfig& baseline_cfg)
{
  BenchmarkRow row;
  row.method = method;
  row.scenario = data.config.scenario;
  row.dims = static_cast<std::size_t>(data.config.dims);
  row.n = static_cast<std::size_t>(data.config.n);
  row.seed = data.config.seed;

  const auto t0 = std::chrono::steady_clock::now();
  const auto split = make_split(data.table.z.size(), base.train_frac, base.valid_frac, base.test_frac(), data.config.seed);
  std::vector<double> z_test;
  for (Index i : split.test)
    z_test.push_back(data.table.z[static_cast<std::size_t>(i)]);
  LossReport report;
  switch (method) {
    case Method::flexcode_knn:
    case Method::flexcode_nw:
    case Method::flexcode_spectral:
    case Method::flexcode_lasso: {
      static constexpr RegressorKind kinds[] = { RegressorKind::knn, RegressorKind::nadaraya_watson, RegressorKind::spectral,
                                                 RegressorKind::lasso };
      FlexCodeConfig cfg = base;
      const RegressorKind kind = kinds[static_cast<int>(method)];
      if (cfg.regressor.kind != kind)
        cfg.regressor = RegressorConfig::defaults(kind);
      cfg.seed = data.config.seed;
      const Covariates x = encode(data.table, kind == RegressorKind::lasso ? 1.0 : std::numbers::sqrt2 / 2.0);
      const FittedCDE m = fit(cfg, x, data.table.z, split);
      report = empirical_cde_loss(m, x.subset(split.test), z_test);
      break;
    }
    case Method::kde:
    case Method::knn_cde:
    case Method::kernel_cde: {
      BaselineConfig cfg = baseline_cfg;
      cfg.kind = method == Method::kde       ? BaselineKind::kde_ratio
                 : method == Method::knn_cde ? BaselineKind::knn_cde
                                             : BaselineKind::kernel_cde;
      const Covariates x = encode(data.table);
      const FittedBaseline m = fit_baseline(cfg, x, data.table.z, split);
      std::vector<double> u;
      for (double z : z_test)
        u.push_back(std::clamp(m.scaler.to_unit(z), 0.0, 1.0));
      report = grid_loss(m.unit_density(x.subset(split.test)), u);
      break;
    }
    case Method::oracle: {
      std::vector<double> z_train;
      for (Index i : split.train)
        z_train.push_back(data.table.z[static_cast<std::size_t>(i)]);
      const auto scaler = ResponseScaler::fit(z_train);
      report = oracle_loss(
        [&](double z, Index k) { return data.true_density(z, split.test[static_cast<std::size_t>(k)]); }, scaler, z_test);
      break;
    }
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  row.loss = report.loss;
  row.se = report.se;
  return row;
}

//! Rows ordered by scenario, dimension, size, repetition, method regardless
//! of the worker count. Repetition r uses seed ^ r for data and fitting.
inline std::vector<BenchmarkRow>
run_benchmark(const BenchmarkConfig& config)
{
  config.validate();
  struct Job
  {
    Scenario scenario;
    std::size_t dims, n, rep;
  };
  std::vector<Job> jobs;
  for (Scenario s : config.scenarios)
    for (std::size_t d : config.dims)
      for (std::size_t n : config.sizes)
        for (std::size_t r = 0; r < config.reps; ++r)
          jobs.push_back({ s, d, n, r });
  const std::size_t per_job = config.methods.size();
  std::vector<BenchmarkRow> rows(jobs.size() * per_job);

  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= rows.size())
        return;
      const Job& job = jobs[t / per_job];
      try {
        ScenarioConfig sc;
        sc.scenario = job.scenario;
        sc.dims = static_cast<int>(job.dims);
        sc.n = static_cast<int>(job.n);
        sc.seed = config.seed ^ static_cast<std::uint64_t>(job.rep);
        const ScenarioData data = generate(sc);
        rows[t] = run_method(config.methods[t % per_job], data, config.flexcode, config.baseline);
        rows[t].rep = job.rep;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
        next = rows.size();
      }
    }
  };
  const std::size_t threads = std::min(config.workers, rows.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
  return rows;
}

inline void
write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows, bool include_timing = true)
{
  os << "method,scenario,D,n,loss,se,wall_ms,seed\n";
  for (const auto& r : rows)
    os << to_string(r.method) << ',' << to_string(r.scenario) << ',' << r.dims << ',' << r.n << ','
       << format_double(r.loss) << ',' << format_double(r.se) << ','
       << (include_timing ? format_double(std::round(r.wall_ms * 1000.0) / 1000.0) : std::string("NA")) << ','
       << r.seed << '\n';
}

struct BenchmarkSummary
{
  Method method;
  Scenario scenario;
  std::size_t dims, n, reps;
  double mean_loss, se;
};

//! Mean loss across repetitions with its standard error.
inline std::vector<BenchmarkSummary>
summarize(const std::vector<BenchmarkRow>& rows)
{
  std::vector<BenchmarkSummary> out;
  std::vector<std::vector<double>> losses;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const BenchmarkSummary& s) {
      return s.method == r.method && s.scenario == r.scenario && s.dims == r.dims && s.n == r.n;
    });
    if (it == out.end()) {
      out.push_back({ r.method, r.scenario, r.dims, r.n, 0, 0.0, 0.0 });
      losses.emplace_back();
      it = out.end() - 1;
    }
    losses[static_cast<std::size_t>(it - out.begin())].push_back(r.loss);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& l = losses[i];
    out[i].reps = l.size();
    out[i].mean_loss = mean(l);
    out[i].se = l.size() > 1 ? sample_sd(l) / std::sqrt(static_cast<double>(l.size())) : 0.0;
  }
  return out;
}

inline void
write_summary_csv(std::ostream& os, const std::vector<BenchmarkSummary>& s)
{
  os << "method,scenario,D,n,reps,mean_loss,se\n";
  for (const auto& r : s)
    os << to_string(r.method) << ',' << to_string(r.scenario) << ',' << r.dims << ',' << r.n << ',' << r.reps << ','
       << format_double(r.mean_loss) << ',' << format_double(r.se) << '\n';
}

} // namespace flexcode
