#include "oracles.hpp"

#include <flexcode/datasets.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

using namespace flexcode;

namespace {

ScenarioData
make(Scenario s, int dims, int n, std::uint64_t seed = 1)
{
  ScenarioConfig c;
  c.scenario = s;
  c.dims = dims;
  c.n = n;
  c.seed = seed;
  return generate(c);
}

double
corr(const std::vector<double>& a, const VectorXd& b)
{
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b(static_cast<Index>(i));
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b(static_cast<Index>(i)) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

struct Moments
{
  double mean, var, se_mean, se_var;
};

Moments
moments(const std::vector<double>& z)
{
  const auto n = static_cast<double>(z.size());
  double m = 0;
  for (double v : z)
    m += v;
  m /= n;
  double m2 = 0, m4 = 0;
  for (double v : z) {
    m2 += (v - m) * (v - m);
    m4 += std::pow(v - m, 4);
  }
  m2 /= n;
  m4 /= n;
  return { m, m2, std::sqrt(m2 / n), std::sqrt((m4 - m2 * m2) / n) };
}

} // namespace

TEST(Generate, IrrelevantCovariatesCorrelations)
{
  const auto d = make(Scenario::irrelevant_covariates, 10, 5000);
  EXPECT_GT(corr(d.table.z, d.table.values.col(0)), 0.7);
  for (Index j = 1; j < 10; ++j)
    EXPECT_LT(std::abs(corr(d.table.z, d.table.values.col(j))), 0.1) << "column " << j;
}

TEST(Generate, ManifoldRowsLieOnRotatedCircle)
{
  const auto d = make(Scenario::manifold, 6, 500);
  const MatrixXd& r = d.rotation;
  EXPECT_LT((r.transpose() * r - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
  for (Index i = 0; i < 500; ++i) {
    const VectorXd x = d.table.values.row(i).transpose();
    EXPECT_NEAR(x.norm(), 1.0, 1e-12);
    const VectorXd local = r.transpose() * x;
    EXPECT_NEAR(std::hypot(local(0), local(1)), 1.0, 1e-12);
    for (Index j = 2; j < 6; ++j)
      EXPECT_NEAR(local(j), 0.0, 1e-12);
  }
  Eigen::FullPivLU<MatrixXd> lu(d.table.values);
  lu.setThreshold(1e-9);
  EXPECT_EQ(lu.rank(), 2);
}

TEST(Generate, UniformNullTruth)
{
  const auto d = make(Scenario::uniform_null, 3, 200);
  for (double z : d.table.z) {
    EXPECT_GE(z, 0.0);
    EXPECT_LT(z, 1.0);
  }
  EXPECT_EQ(d.true_density(0.3, 5), 1.0);
  EXPECT_EQ(d.true_density(1.3, 5), 0.0);
}

TEST(Generate, MomentsWithinFourStandardErrors)
{
  struct Case
  {
    Scenario s;
    int dims;
    double mean, var;
  };
  const double two_pi = 2.0 * std::numbers::pi;
  const std::vector<Case> cases{
    { Scenario::irrelevant_covariates, 10, 0.0, 1.25 },
    { Scenario::non_sparse, 10, 0.0, 0.1 + 0.25 },
    { Scenario::uniform_null, 4, 0.5, 1.0 / 12.0 },
    { Scenario::manifold, 5, std::numbers::pi, two_pi * two_pi / 12.0 + 0.25 },
    // Mixture: regime c1/c2 (prob 0.4) N(0, 1.25), else N(10, 5).
    { Scenario::mixed_types, 6, 6.0, 0.4 * 1.25 + 0.6 * 5.0 + 0.24 * 100.0 },
  };
  for (const auto& c : cases) {
    const auto d = make(c.s, c.dims, 5000, 3);
    const auto m = moments(d.table.z);
    EXPECT_LT(std::abs(m.mean - c.mean), 4.0 * m.se_mean) << to_string(c.s);
    EXPECT_LT(std::abs(m.var - c.var), 4.0 * m.se_var) << to_string(c.s);
  }
}

TEST(Generate, SeededDeterminism)
{
  for (auto s : { Scenario::irrelevant_covariates, Scenario::manifold, Scenario::non_sparse, Scenario::mixed_types,
                  Scenario::uniform_null }) {
    const auto a = make(s, 6, 100, 9);
    const auto b = make(s, 6, 100, 9);
    const auto c = make(s, 6, 100, 10);
    EXPECT_EQ(a.table.values, b.table.values);
    EXPECT_EQ(a.table.z, b.table.z);
    EXPECT_NE(a.table.z, c.table.z);
  }
}

TEST(Generate, InvalidConfigRejected)
{
  EXPECT_THROW(make(Scenario::irrelevant_covariates, 0, 10), ConfigError);
  EXPECT_THROW(make(Scenario::irrelevant_covariates, 3, 0), ConfigError);
  EXPECT_THROW(make(Scenario::manifold, 1, 10), ConfigError);
  EXPECT_THROW(make(Scenario::mixed_types, 5, 10), ConfigError);
  EXPECT_THROW(make(Scenario::mixed_types, 2, 10), ConfigError);
  EXPECT_THROW(scenario_from_string("spiral"), ConfigError);
}

TEST(TrueDensity, MatchesGeneratingNormals)
{
  const auto irr = make(Scenario::irrelevant_covariates, 4, 20);
  const auto ns = make(Scenario::non_sparse, 4, 20);
  const auto mix = make(Scenario::mixed_types, 6, 50);
  for (Index i = 0; i < 20; ++i) {
    const double z = 0.3 * static_cast<double>(i) - 2.0;
    EXPECT_NEAR(irr.true_density(z, i), oracle::normal_pdf(z, irr.table.values(i, 0), 0.5), 1e-14);
    EXPECT_NEAR(ns.true_density(z, i), oracle::normal_pdf(z, ns.table.values.row(i).mean(), 0.5), 1e-14);
  }
  for (Index i = 0; i < 50; ++i) {
    const double z = 0.5 * static_cast<double>(i) - 3.0;
    const bool first = mix.table.values(i, 0) <= 1.0;
    const double expect = first ? oracle::normal_pdf(z, mix.table.values(i, 3), 0.5)
                                : oracle::normal_pdf(z, 10.0 + 2.0 * mix.table.values(i, 4), 1.0);
    EXPECT_NEAR(mix.true_density(z, i), expect, 1e-14);
  }
}

TEST(TrueDensity, IntegratesToOne)
{
  for (auto s : { Scenario::irrelevant_covariates, Scenario::manifold, Scenario::non_sparse, Scenario::mixed_types }) {
    const auto d = make(s, 6, 10);
    for (Index i = 0; i < 10; ++i) {
      double mass = 0.0;
      const double lo = -20.0, hi = 40.0, h = 1e-3;
      for (double z = lo; z < hi; z += h)
        mass += h * d.true_density(z + 0.5 * h, i);
      EXPECT_NEAR(mass, 1.0, 1e-6) << to_string(s) << " row " << i;
    }
  }
}

TEST(TrueDensity, ManifoldMeanIsRecoveredAngle)
{
  const auto d = make(Scenario::manifold, 4, 50);
  for (Index i = 0; i < 50; ++i) {
    const VectorXd local = d.rotation.transpose() * d.table.values.row(i).transpose();
    double theta = std::atan2(local(1), local(0));
    if (theta < 0)
      theta += 2.0 * std::numbers::pi;
    EXPECT_NEAR(d.true_density(theta + 0.2, i), oracle::normal_pdf(0.2, 0.0, 0.5), 1e-12);
  }
}

TEST(Encode, OneHotScaledAndRaw)
{
  const auto d = make(Scenario::mixed_types, 4, 30);
  const auto x = encode(d.table);
  ASSERT_EQ(x.cols(), 5 + 5 + 2);
  for (Index i = 0; i < 30; ++i) {
    for (Index c = 0; c < 2; ++c) {
      const auto level = static_cast<Index>(d.table.values(i, c));
      for (Index l = 0; l < 5; ++l)
        EXPECT_EQ(x.data()(i, 5 * c + l), l == level ? std::numbers::sqrt2 / 2.0 : 0.0);
    }
    EXPECT_EQ(x.data()(i, 10), d.table.values(i, 2));
    EXPECT_EQ(x.data()(i, 11), d.table.values(i, 3));
  }
  for (Index j = 0; j < 12; ++j)
    EXPECT_EQ(x.raw_column(j), j < 10);
  const auto plain = encode(d.table, 1.0);
  EXPECT_EQ(plain.data().leftCols(10).maxCoeff(), 1.0);
}

TEST(Csv, RoundTripIsExact)
{
  for (auto s : { Scenario::irrelevant_covariates, Scenario::mixed_types }) {
    const auto d = make(s, 4, 40);
    std::stringstream ss;
    ss << "# comment\n";
    write_table_csv(ss, d.table);
    const auto t = read_table_csv(ss, "z");
    EXPECT_EQ(t.names, d.table.names);
    EXPECT_EQ(t.levels, d.table.levels);
    EXPECT_EQ(t.values, d.table.values);
    EXPECT_EQ(t.z, d.table.z);
  }
}

TEST(Csv, CategoricalAutoDetected)
{
  std::istringstream is("color,size,y\nred,1.5,2\nblue,2.5,3\nred,0.5,4\n");
  const auto t = read_table_csv(is, "y");
  EXPECT_TRUE(t.categorical(0));
  EXPECT_FALSE(t.categorical(1));
  EXPECT_EQ(t.levels[0], (std::vector<std::string>{ "blue", "red" }));
  EXPECT_EQ(t.values(1, 0), 0.0);
  EXPECT_EQ(t.values(2, 1), 0.5);
  EXPECT_EQ(t.z, (std::vector<double>{ 2, 3, 4 }));
}

TEST(Csv, MissingValueNamesLineAndColumn)
{
  std::istringstream is("a,b,z\n1,2,3\n4,NA,6\n");
  try {
    read_table_csv(is, "z");
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    const std::string w = e.what();
    EXPECT_NE(w.find("line 3"), std::string::npos) << w;
    EXPECT_NE(w.find("'b'"), std::string::npos) << w;
  }
}

TEST(Csv, ContractErrors)
{
  std::istringstream no_resp("a,b\n1,2\n");
  EXPECT_THROW(read_table_csv(no_resp, "z"), DataError);
  std::istringstream ragged("a,z\n1,2,3\n");
  EXPECT_THROW(read_table_csv(ragged, "z"), DataError);
  std::istringstream empty("");
  EXPECT_THROW(read_table_csv(empty, "z"), DataError);
  std::istringstream bad_resp("a,z\n1,x\n");
  EXPECT_THROW(read_table_csv(bad_resp, "z"), DataError);
  EXPECT_THROW(read_table_csv(std::string("/nonexistent/file.csv"), "z"), IoError);
}

TEST(Csv, SchemaFixesLevels)
{
  std::istringstream train("c,z\nb,1\na,2\n");
  const auto t = read_table_csv(train, "z");
  std::istringstream query("c\nb\nb\n");
  const auto q = read_table_csv(query, "", &t);
  EXPECT_EQ(q.values(0, 0), 1.0);
  EXPECT_TRUE(q.z.empty());
  std::istringstream unknown("c\nq\n");
  EXPECT_THROW(read_table_csv(unknown, "", &t), DataError);
  std::istringstream wrong_cols("d\nb\n");
  EXPECT_THROW(read_table_csv(wrong_cols, "", &t), DataError);
}

TEST(FormatDouble, ShortestRoundTrip)
{
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.5), "-2.5");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_double(v)), v);
}
