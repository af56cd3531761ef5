#include "flexcode/benchmark.hpp"
#include "flexcode/datasets.hpp"
#include "flexcode/diagnostics.hpp"
#include "flexcode/distreg.hpp"
#include "flexcode/estimator.hpp"
#include "flexcode/loss.hpp"
#include "flexcode/serialize.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace flexcode;

namespace {

struct Options
{
  std::string cmd;
  std::string data;
  std::string model;
  std::string out;
  std::string response_col = "z";
  std::string basis = "fourier";
  std::string regressor = "knn";
  std::size_t max_cutoff = 31;
  double train_frac = 0.7;
  double valid_frac = 0.15;
  std::size_t grid = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string scenario = "irrelevant";
  std::string dims = "10";
  std::string n = "1000";
  std::size_t reps = 10;
  std::string methods = "flexcode-knn,kernel-cde";
  int kl_k = 2;
  std::string sigma2_grid = "0.25,1,4";
  std::string alpha_levels = "0.25,0.5,0.75,0.9";
  bool log_scale_response = false;
};

std::vector<std::string>
split_list(const std::string& s)
{
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(item);
  return out;
}

template<class T>
std::vector<T>
parse_list(const std::string& s, const char* flag)
{
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof())
      throw ConfigError(std::string(flag) + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty())
    throw ConfigError(std::string(flag) + " is empty");
  return out;
}

std::string
header_line(const Options& o)
{
  return std::string("flexcode ") + FLEXCODE_VERSION + " cmd=" + o.cmd + " seed=" + std::to_string(o.seed);
}

std::ofstream
open_out(const fs::path& p)
{
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw IoError("cannot open '" + p.string() + "' for writing");
  return os;
}

void
require(const std::string& value, const char* flag)
{
  if (value.empty())
    throw ConfigError(std::string(flag) + " is required for this command");
}

FlexCodeConfig
flexcode_config(const Options& o)
{
  FlexCodeConfig c;
  c.basis = BasisSpec(basis_family_from_string(o.basis), o.max_cutoff);
  c.regressor = RegressorConfig::defaults(regressor_kind_from_string(o.regressor));
  c.max_cutoff = o.max_cutoff;
  c.train_frac = o.train_frac;
  c.valid_frac = o.valid_frac;
  c.seed = o.seed;
  c.grid_cells = o.grid;
  c.validate();
  return c;
}

double
onehot_scale(RegressorKind k)
{
  return k == RegressorKind::lasso ? 1.0 : std::numbers::sqrt2 / 2.0;
}

std::vector<double>
response_for_model(const std::vector<double>& z, bool log_scale, const std::string& source)
{
  if (!log_scale)
    return z;
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0))
      throw DataError(source + ": row " + std::to_string(i + 1) + " has a nonpositive response, cannot take its log");
    out[i] = std::log(z[i]);
  }
  return out;
}

bool
header_has_column(const std::string& path, const std::string& col)
{
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    for (const auto& f : detail::split_csv_line(line))
      if (f == col)
        return true;
    return false;
  }
  return false;
}

struct LoadedModel
{
  FittedCDE model;
  Table schema;
  bool log_scale = false;
  double onehot = 1.0;
};

LoadedModel
load_model_file(const std::string& path)
{
  std::ifstream is(path);
  if (!is)
    throw IoError("cannot open model '" + path + "'");
  LoadedModel lm;
  json extra;
  lm.model = load_model(is, &extra);
  try {
    lm.schema.names = extra.at("names").get<std::vector<std::string>>();
    lm.schema.levels = extra.at("levels").get<std::vector<std::vector<std::string>>>();
    lm.schema.response_name = extra.at("response_col").get<std::string>();
    lm.log_scale = extra.at("log_scale").get<bool>();
    lm.onehot = extra.at("onehot_scale").get<double>();
  } catch (const json::exception& e) {
    throw DataError("model '" + path + "' lacks its data schema: " + e.what());
  }
  return lm;
}

//! Query table against the model's schema; the response is read when present.
Table
read_queries(const LoadedModel& lm, const std::string& path, bool need_response)
{
  const bool has = header_has_column(path, lm.schema.response_name);
  if (need_response && !has)
    throw DataError(path + ": response column '" + lm.schema.response_name + "' not found in header");
  return read_table_csv(path, has ? lm.schema.response_name : std::string(), &lm.schema);
}

void
write_grid_rows(std::ostream& os, const MatrixXd& dens, const VectorXd& grid, const std::vector<std::string>& ids)
{
  for (Index r = 0; r < dens.rows(); ++r)
    for (Index g = 0; g < grid.size(); ++g)
      os << ids[static_cast<std::size_t>(r)] << ',' << format_double(grid(g)) << ',' << format_double(dens(r, g))
         << '\n';
}

std::vector<std::string>
row_ids(std::size_t n)
{
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i)
    ids[i] = std::to_string(i);
  return ids;
}

int
cmd_generate(const Options& o)
{
  require(o.out, "--out");
  ScenarioConfig c;
  c.scenario = scenario_from_string(o.scenario);
  c.dims = parse_list<int>(o.dims, "--dims").front();
  c.n = parse_list<int>(o.n, "--n").front();
  c.seed = o.seed;
  const auto data = generate(c);
  auto os = open_out(o.out);
  os << "# " << header_line(o) << " scenario=" << to_string(c.scenario) << " dims=" << c.dims << " n=" << c.n
     << '\n';
  write_table_csv(os, data.table);
  return 0;
}

int
cmd_fit(const Options& o)
{
  require(o.data, "--data");
  require(o.model, "--model");
  const FlexCodeConfig cfg = flexcode_config(o);
  const Table t = read_table_csv(o.data, o.response_col);
  const double scale = onehot_scale(cfg.regressor.kind);
  const auto z = response_for_model(t.z, o.log_scale_response, o.data);
  const FittedCDE m = fit(cfg, encode(t, scale), z);

  json extra = { { "names", t.names },
                 { "levels", t.levels },
                 { "response_col", o.response_col },
                 { "log_scale", o.log_scale_response },
                 { "onehot_scale", scale } };
  {
    auto os = open_out(o.model);
    save_model(os, m, extra, header_line(o));
  }
  const std::string trace_path = o.out.empty() ? o.model + ".trace.csv" : o.out;
  auto os = open_out(trace_path);
  os << "# " << header_line(o) << " selected_cutoff=" << m.cutoff << '\n';
  os << "cutoff,loss,se,coef_loss\n";
  for (std::size_t i = 0; i < m.trace.loss.size(); ++i)
    os << i + 1 << ',' << format_double(m.trace.loss[i]) << ',' << format_double(m.trace.se[i]) << ','
       << format_double(m.trace.coef_loss[i]) << '\n';
  return 0;
}

int
cmd_predict(const Options& opts)
{
  require(opts.model, "--model");
  require(opts.data, "--data");
  require(opts.out, "--out");
  const auto lm = load_model_file(opts.model);
  Options o = opts;
  o.seed = lm.model.config.seed;
  const Table q = read_queries(lm, o.data, false);
  const Covariates x = encode(q, lm.onehot);
  const VectorXd grid = uniform_grid(o.grid, lm.model.scaler.z_min, lm.model.scaler.z_max);
  std::vector<char> flagged;
  const MatrixXd dens = lm.model.predict_density(x, grid, &flagged);
  auto os = open_out(o.out);
  os << "# " << header_line(o) << (lm.log_scale ? " response=log" : "") << '\n';
  os << "query_id,z,density\n";
  write_grid_rows(os, dens, grid, row_ids(static_cast<std::size_t>(dens.rows())));
  std::size_t nflag = 0;
  for (char f : flagged)
    nflag += f != 0;
  if (nflag > 0)
    std::cerr << "warning: " << nflag << " queries had no positive density and were set to uniform\n";
  return 0;
}

void
write_loss_row(std::ostream& os, const std::string& method, const std::string& scenario, std::size_t dims,
               std::size_t n, const LossReport& r, std::uint64_t seed)
{
  os << "method,scenario,D,n,loss,se,wall_ms,seed\n";
  os << method << ',' << scenario << ',' << dims << ',' << n << ',' << format_double(r.loss) << ','
     << format_double(r.se) << ",NA," << seed << '\n';
}

int
cmd_evaluate(const Options& opts)
{
  require(opts.model, "--model");
  require(opts.data, "--data");
  require(opts.out, "--out");
  const auto lm = load_model_file(opts.model);
  Options o = opts;
  o.seed = lm.model.config.seed;
  const Table q = read_queries(lm, o.data, true);
  const auto z = response_for_model(q.z, lm.log_scale, o.data);
  const LossReport r = empirical_cde_loss(lm.model, encode(q, lm.onehot), z);
  auto os = open_out(o.out);
  os << "# " << header_line(o) << " path=" << to_string(r.path) << " n_eval=" << r.n_eval
     << " clamped=" << r.clamped << '\n';
  write_loss_row(os, "flexcode-" + std::string(to_string(lm.model.config.regressor.kind)),
                 fs::path(o.data).stem().string(), q.names.size(), q.z.size(), r, lm.model.config.seed);
  return 0;
}

struct DiagnosticsInput
{
  MatrixXd densities;
  VectorXd grid;
  std::vector<double> z;
  std::vector<std::string> ids;
};

void
write_diagnostics(const Options& o, const DiagnosticsInput& in, bool log_scale)
{
  const auto levels = parse_list<double>(o.alpha_levels, "--alpha-levels");
  for (double a : levels)
    if (!(a > 0.0 && a < 1.0))
      throw ConfigError("--alpha-levels entries must lie in (0, 1)");
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const CoverageCurve curve = coverage_curve(in.densities, in.grid, in.z, levels);
  {
    auto os = open_out(dir / "coverage.csv");
    os << "# " << header_line(o) << " n=" << in.z.size() << '\n';
    write_coverage_csv(os, curve);
  }
  {
    std::vector<HPDRow> rows;
    std::vector<double> sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    for (Index r = 0; r < in.densities.rows(); ++r)
      for (double a : sorted)
        rows.push_back({ static_cast<std::size_t>(r), hpd_region(in.densities.row(r).transpose(), in.grid, a) });
    auto os = open_out(dir / "hpd.csv");
    os << "# " << header_line(o) << '\n';
    write_hpd_csv(os, rows);
  }
  std::vector<double> pred_mean, pred_mode, observed;
  {
    auto os = open_out(dir / "points.csv");
    os << "# " << header_line(o) << (log_scale ? " scale=original" : "") << '\n';
    os << "query_id,observed,mean,mode\n";
    for (Index r = 0; r < in.densities.rows(); ++r) {
      const auto s = point_summaries(in.densities.row(r).transpose(), in.grid);
      double obs = in.z[static_cast<std::size_t>(r)], mu = s.mean, mode = s.mode;
      if (log_scale) {
        obs = std::exp(obs);
        mu = std::exp(mu);
        mode = std::exp(mode);
      }
      observed.push_back(obs);
      pred_mean.push_back(mu);
      pred_mode.push_back(mode);
      os << in.ids[static_cast<std::size_t>(r)] << ',' << format_double(obs) << ',' << format_double(mu) << ','
         << format_double(mode) << '\n';
    }
  }
  auto os = open_out(dir / "metrics.csv");
  os << "# " << header_line(o) << '\n';
  os << "summary,mean_error,median_error,scatter68\n";
  try {
    const auto mm = fractional_errors(pred_mean, observed);
    const auto md = fractional_errors(pred_mode, observed);
    os << "mean," << format_double(mm.mean_error) << ',' << format_double(mm.median_error) << ','
       << format_double(mm.scatter68) << '\n';
    os << "mode," << format_double(md.mean_error) << ',' << format_double(md.median_error) << ','
       << format_double(md.scatter68) << '\n';
  } catch (const DataError& e) {
    std::cerr << "warning: fractional errors skipped: " << e.what() << '\n';
  }
}

int
cmd_diagnose(const Options& opts)
{
  require(opts.model, "--model");
  require(opts.data, "--data");
  require(opts.out, "--out");
  const auto lm = load_model_file(opts.model);
  Options o = opts;
  o.seed = lm.model.config.seed;
  const Table q = read_queries(lm, o.data, true);
  DiagnosticsInput in;
  in.z = response_for_model(q.z, lm.log_scale, o.data);
  in.grid = uniform_grid(o.grid, lm.model.scaler.z_min, lm.model.scaler.z_max);
  in.densities = lm.model.predict_density(encode(q, lm.onehot), in.grid);
  in.ids = row_ids(q.z.size());
  write_diagnostics(o, in, lm.log_scale);
  return 0;
}

std::size_t
worker_count(const Options& o)
{
  if (o.workers > 0)
    return o.workers;
  if (const char* env = std::getenv("FLEXCDE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError("FLEXCDE_WORKERS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return 1;
}

int
cmd_benchmark(const Options& o)
{
  require(o.out, "--out");
  BenchmarkConfig c;
  c.scenarios.clear();
  for (const auto& s : split_list(o.scenario))
    c.scenarios.push_back(scenario_from_string(s));
  c.methods.clear();
  for (const auto& m : split_list(o.methods))
    c.methods.push_back(method_from_string(m));
  c.dims = parse_list<std::size_t>(o.dims, "--dims");
  c.sizes = parse_list<std::size_t>(o.n, "--n");
  c.reps = o.reps;
  c.seed = o.seed;
  c.workers = worker_count(o);
  c.flexcode = flexcode_config(o);
  c.baseline.grid_cells = o.grid;
  const auto rows = run_benchmark(c);
  {
    auto os = open_out(o.out);
    os << "# " << header_line(o) << " reps=" << o.reps << '\n';
    write_benchmark_csv(os, rows);
  }
  fs::path summary(o.out);
  summary.replace_extension(".summary.csv");
  auto os = open_out(summary);
  os << "# " << header_line(o) << " reps=" << o.reps << '\n';
  write_summary_csv(os, summarize(rows));
  return 0;
}

int
cmd_distfit(const Options& o)
{
  require(o.data, "--data");
  require(o.out, "--out");
  FlexCodeConfig cfg = flexcode_config(o);
  if (cfg.regressor.kind == RegressorKind::lasso)
    throw ConfigError("--regressor lasso needs coordinates; distfit supports knn, nw and spectral");
  if (o.kl_k < 1)
    throw ConfigError("--kl-k must be >= 1");
  const auto multipliers = parse_list<double>(o.sigma2_grid, "--sigma2-grid");
  for (double s : multipliers)
    if (!(s > 0.0))
      throw ConfigError("--sigma2-grid entries must be positive");

  const auto coll = read_sample_sets(o.data);
  const auto z = response_for_model(coll.z, o.log_scale_response, o.data);
  std::size_t warnings = 0;
  const MatrixXd raw = kl_raw_matrix(coll.sets, o.kl_k, &warnings);
  if (warnings > 0)
    std::cerr << "warning: " << warnings << " divergence estimates floored more than 10% of distances\n";
  const double base = median_offdiag_divergence(raw);
  const auto n = coll.sets.size();
  const auto split = make_split(n, cfg.train_frac, cfg.valid_frac, cfg.test_frac(), cfg.seed);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  double best_loss = std::numeric_limits<double>::infinity();
  double best_sigma2 = 0.0;
  FittedCDE best;
  MatrixXd best_dist;
  {
    auto os = open_out(dir / "tuning.csv");
    os << "# " << header_line(o) << " median_divergence=" << format_double(base) << '\n';
    os << "sigma2,cutoff,valid_loss\n";
    for (double mult : multipliers) {
      const double sigma2 = mult * base;
      const MatrixXd dist = kernel_distance(kl_kernel_from_raw(raw, sigma2).kernel);
      FittedCDE m = fit(cfg, Covariates::precomputed(dist), z, split);
      const double l = m.trace.loss[m.cutoff - 1];
      os << format_double(sigma2) << ',' << m.cutoff << ',' << format_double(l) << '\n';
      if (l < best_loss) {
        best_loss = l;
        best_sigma2 = sigma2;
        best = std::move(m);
        best_dist = dist;
      }
    }
  }
  const Covariates all = Covariates::precomputed(best_dist);
  const Covariates test = best.query_rows(all, split.test);
  std::vector<double> z_test;
  std::vector<std::string> ids;
  for (Index i : split.test) {
    z_test.push_back(z[static_cast<std::size_t>(i)]);
    ids.push_back(coll.sets[static_cast<std::size_t>(i)].id);
  }
  const LossReport r = empirical_cde_loss(best, test, z_test);
  {
    auto os = open_out(dir / "report.csv");
    os << "# " << header_line(o) << " sigma2=" << format_double(best_sigma2) << " cutoff=" << best.cutoff << '\n';
    write_loss_row(os, "flexcode-" + std::string(to_string(cfg.regressor.kind)) + "-kl", "sample-sets",
                   static_cast<std::size_t>(coll.sets.front().dims()), n, r, cfg.seed);
  }
  DiagnosticsInput in;
  in.grid = uniform_grid(o.grid, best.scaler.z_min, best.scaler.z_max);
  in.densities = best.predict_density(test, in.grid);
  in.z = z_test;
  in.ids = ids;
  {
    auto os = open_out(dir / "density.csv");
    os << "# " << header_line(o) << '\n';
    os << "query_id,z,density\n";
    write_grid_rows(os, in.densities, in.grid, ids);
  }
  write_diagnostics(o, in, o.log_scale_response);
  if (!o.model.empty()) {
    auto os = open_out(o.model);
    save_model(os, best, { { "sigma2", best_sigma2 }, { "kl_k", o.kl_k } }, header_line(o));
  }
  return 0;
}

} // namespace

int
main(int argc, char** argv)
{
  Options o;
  CLI::App app{ "Conditional density estimation with orthogonal series (FlexCode)" };
  app.add_option("--cmd", o.cmd, "generate | fit | predict | evaluate | diagnose | benchmark | distfit")
    ->required()
    ->check(CLI::IsMember({ "generate", "fit", "predict", "evaluate", "diagnose", "benchmark", "distfit" }));
  app.add_option("--data", o.data, "Input CSV, or sample-set directory for distfit");
  app.add_option("--model", o.model, "Model file (written by fit, read by predict/evaluate/diagnose)");
  app.add_option("--out", o.out, "Output file or directory");
  app.add_option("--response-col", o.response_col, "Response column name")->capture_default_str();
  app.add_option("--basis", o.basis, "Response basis")
    ->check(CLI::IsMember({ "fourier", "cosine", "haar" }))
    ->capture_default_str();
  app.add_option("--regressor", o.regressor, "Coefficient regressor")
    ->check(CLI::IsMember({ "knn", "nw", "spectral", "lasso" }))
    ->capture_default_str();
  app.add_option("--max-cutoff", o.max_cutoff, "Largest number of basis terms")->capture_default_str();
  app.add_option("--train-frac", o.train_frac, "Training fraction")->capture_default_str();
  app.add_option("--valid-frac", o.valid_frac, "Validation fraction")->capture_default_str();
  app.add_option("--grid", o.grid, "Grid cells for densities")->capture_default_str();
  app.add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  app.add_option("--workers", o.workers, "Benchmark worker threads (default FLEXCDE_WORKERS or 1)");
  app.add_option("--scenario", o.scenario, "irrelevant | manifold | nonsparse | mixed | uniform (list for benchmark)")
    ->capture_default_str();
  app.add_option("--dims", o.dims, "Covariate dimension (list for benchmark)")->capture_default_str();
  app.add_option("--n", o.n, "Rows to generate (list for benchmark)")->capture_default_str();
  app.add_option("--reps", o.reps, "Benchmark repetitions")->capture_default_str();
  app.add_option("--methods", o.methods, "Benchmark methods, comma separated")->capture_default_str();
  app.add_option("--kl-k", o.kl_k, "Neighbor order of the divergence estimator")->capture_default_str();
  app.add_option("--sigma2-grid", o.sigma2_grid, "Kernel widths as multiples of the median divergence")
    ->capture_default_str();
  app.add_option("--alpha-levels", o.alpha_levels, "HPD levels for diagnostics")->capture_default_str();
  app.add_flag("--log-scale-response", o.log_scale_response, "Model log(z); fractional errors on the original scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (o.cmd == "generate")
      return cmd_generate(o);
    if (o.cmd == "fit")
      return cmd_fit(o);
    if (o.cmd == "predict")
      return cmd_predict(o);
    if (o.cmd == "evaluate")
      return cmd_evaluate(o);
    if (o.cmd == "diagnose")
      return cmd_diagnose(o);
    if (o.cmd == "benchmark")
      return cmd_benchmark(o);
    return cmd_distfit(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
