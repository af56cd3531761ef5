#include "oracles.hpp"

#include <flexcode/distreg.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

using namespace flexcode;

namespace {

SampleSet
normal_set(int n, int dims, double mu, std::mt19937_64& rng, std::string id = "s")
{
  std::normal_distribution<double> g(mu, 1.0);
  SampleSet s{ MatrixXd(n, dims), std::move(id) };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dims; ++j)
      s.points(i, j) = g(rng);
  return s;
}

oracle::Matrix
rows_of(const MatrixXd& m)
{
  oracle::Matrix out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

SampleSet
column_set(std::initializer_list<double> v, std::string id)
{
  SampleSet s{ MatrixXd(static_cast<Index>(v.size()), 1), std::move(id) };
  Index i = 0;
  for (double x : v)
    s.points(i++, 0) = x;
  return s;
}

} // namespace

TEST(KLDivergence, HandEnumeration)
{
  const auto a = column_set({ 0, 1, 2, 3 }, "a");
  const auto b = column_set({ 10, 11, 12, 13 }, "b");
  const double expect = (std::log(10.0) + std::log(9.0) + std::log(8.0) + std::log(7.0)) / 4.0 + std::log(4.0 / 3.0);
  EXPECT_NEAR(kl_divergence(a, b, 1).value, expect, 1e-12);
}

TEST(KLDivergence, SameSetMatchesBruteForce)
{
  std::mt19937_64 rng(1);
  for (int dims : { 1, 2, 3 }) {
    const auto a = normal_set(60, dims, 0.0, rng);
    const auto est = kl_divergence(a, a, 2);
    EXPECT_NEAR(est.value, oracle::kl_brute_force(rows_of(a.points), rows_of(a.points), 2), 1e-10);
  }
}

TEST(KLDivergence, MatchesBruteForceAtFifty)
{
  std::mt19937_64 rng(2);
  for (int dims : { 1, 2, 4 })
    for (int k : { 1, 2, 3 }) {
      const auto a = normal_set(50, dims, 0.0, rng);
      const auto b = normal_set(50, dims, 0.7, rng);
      EXPECT_NEAR(kl_divergence(a, b, k).value, oracle::kl_brute_force(rows_of(a.points), rows_of(b.points), k), 1e-10)
        << "dims " << dims << " k " << k;
    }
}

TEST(KLDivergence, UnequalSizesMatchBruteForce)
{
  std::mt19937_64 rng(3);
  const auto a = normal_set(37, 1, 0.0, rng);
  const auto b = normal_set(81, 1, 0.5, rng);
  EXPECT_NEAR(kl_divergence(a, b, 2).value, oracle::kl_brute_force(rows_of(a.points), rows_of(b.points), 2), 1e-10);
  EXPECT_NEAR(kl_divergence(b, a, 2).value, oracle::kl_brute_force(rows_of(b.points), rows_of(a.points), 2), 1e-10);
}

TEST(KLDivergence, GaussianShiftAccuracy)
{
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto a = normal_set(2000, 1, 0.0, rng);
    const auto b = normal_set(2000, 1, 1.0, rng);
    good += std::abs(kl_divergence(a, b, 2).value - 0.5) < 0.15;
  }
  EXPECT_GE(good, 18);
}

TEST(KLDivergence, DuplicatesRaiseWarning)
{
  const auto a = column_set({ 1, 1, 1, 1, 2, 3, 4, 5, 6, 7 }, "dup");
  const auto b = column_set({ 0.5, 1.5, 2.5, 3.5 }, "b");
  const auto est = kl_divergence(a, b, 1);
  EXPECT_TRUE(est.warning);
  EXPECT_GE(est.floored, 4u);
  EXPECT_TRUE(std::isfinite(est.value));
  const auto clean = kl_divergence(b, a, 1);
  EXPECT_FALSE(clean.warning);
}

TEST(KLDivergence, SizePreconditions)
{
  const auto small = column_set({ 0.0, 1.0 }, "small");
  const auto b = column_set({ 0.0, 1.0, 2.0 }, "b");
  EXPECT_THROW(kl_divergence(small, b, 2), SizeError);
  EXPECT_THROW(kl_divergence(b, small, 3), SizeError);
  EXPECT_THROW(kl_divergence(b, b, 0), ConfigError);
  SampleSet two{ MatrixXd::Zero(5, 2), "two" };
  EXPECT_THROW(kl_divergence(b, two, 1), ShapeError);
}

TEST(KLDivergence, RawMatrixErrorNamesPair)
{
  std::vector<SampleSet> sets{ column_set({ 0, 1, 2, 3 }, "good"), column_set({ 0.5 }, "tiny") };
  try {
    kl_raw_matrix(sets, 2);
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("tiny"), std::string::npos);
  }
}

TEST(NearestPsd, TwoByTwoExample)
{
  MatrixXd m(2, 2);
  m << 1, 2, 2, 1;
  const auto p = nearest_psd(m);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      EXPECT_NEAR(p.matrix(i, j), 1.5, 1e-10);
  EXPECT_NEAR(p.shift, 1.0, 1e-10);
}

TEST(NearestPsd, PsdInputUnchanged)
{
  MatrixXd m(3, 3);
  m << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  const auto p = nearest_psd(m);
  EXPECT_LT((p.matrix - m).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(p.shift, 1e-12);
}

TEST(NearestPsd, RandomCasesHaveNonnegativeSpectrum)
{
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int c = 0; c < 20; ++c) {
    const Index n = 3 + c % 8;
    MatrixXd m(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        m(i, j) = g(rng);
    const auto p = nearest_psd(m);
    EXPECT_GE(oracle::min_eigenvalue(rows_of(p.matrix)), -1e-8);
    EXPECT_LT((p.matrix - p.matrix.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    // Projection is idempotent.
    EXPECT_LT((nearest_psd(p.matrix).matrix - p.matrix).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(KLKernel, SymmetricPsdAndMetricDistance)
{
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mu(0.0, 3.0);
  std::vector<SampleSet> sets;
  for (int i = 0; i < 12; ++i)
    sets.push_back(normal_set(40 + 5 * i, 1, mu(rng), rng, "s" + std::to_string(i)));
  KLConfig cfg;
  cfg.sigma2 = 1.0;
  const auto d = kl_kernel_matrix(sets, cfg);
  EXPECT_LT((d.kernel - d.kernel.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GE(oracle::min_eigenvalue(rows_of(d.kernel)), -1e-8);
  EXPECT_GE(d.projection_shift, 0.0);
  const MatrixXd dist = kernel_distance(d.kernel);
  const Index n = dist.rows();
  for (Index i = 0; i < n; ++i) {
    EXPECT_EQ(dist(i, i), 0.0);
    for (Index j = 0; j < n; ++j) {
      EXPECT_GE(dist(i, j), 0.0);
      EXPECT_NEAR(dist(i, j), dist(j, i), 1e-12);
      for (Index k = 0; k < n; ++k)
        EXPECT_LE(dist(i, k), dist(i, j) + dist(j, k) + 1e-9);
    }
  }
}

TEST(KLKernel, FormulaBeforeProjection)
{
  // For a raw matrix whose exponential kernel is already PSD the
  // projection is the identity.
  MatrixXd raw(2, 2);
  raw << 0.0, 0.4, 0.6, 0.0;
  const auto d = kl_kernel_from_raw(raw, 2.0);
  EXPECT_NEAR(d.kernel(0, 1), std::exp(-1.0 / 4.0), 1e-12);
  EXPECT_NEAR(d.kernel(1, 0), std::exp(-1.0 / 4.0), 1e-12);
  EXPECT_NEAR(d.kernel(0, 0), 1.0, 1e-12);
  EXPECT_THROW(kl_kernel_from_raw(raw, 0.0), ConfigError);
}

TEST(SampleSetIo, RoundTrip)
{
  const auto dir = std::filesystem::temp_directory_path() / "flexcode_sets_roundtrip";
  std::filesystem::remove_all(dir);
  std::mt19937_64 rng(11);
  SampleSetCollection c;
  for (int i = 0; i < 4; ++i) {
    c.sets.push_back(normal_set(10 + i, 2, 0.0, rng, std::to_string(100 + i)));
    c.z.push_back(0.25 * i - 0.3);
  }
  write_sample_sets(dir, c, "# test");
  const auto back = read_sample_sets(dir);
  ASSERT_EQ(back.sets.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.sets[i].id, c.sets[i].id);
    EXPECT_EQ(back.sets[i].points, c.sets[i].points);
    EXPECT_EQ(back.z[i], c.z[i]);
  }
  std::filesystem::remove_all(dir);
}

TEST(SampleSetIo, MissingFilesReported)
{
  const auto dir = std::filesystem::temp_directory_path() / "flexcode_sets_missing";
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_sample_sets(dir), IoError);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "index.csv") << "id,z\nalpha,1.0\n";
  EXPECT_THROW(read_sample_sets(dir), IoError);
  std::ofstream(dir / "index.csv") << "name,z\nalpha,1.0\n";
  EXPECT_THROW(read_sample_sets(dir), DataError);
  std::filesystem::remove_all(dir);
}
