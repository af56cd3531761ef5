#include <flexcode/basis.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace flexcode;

namespace {

std::vector<double>
grid(std::size_t points)
{
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

//! Max |<phi_i, phi_j> - delta_ij| by plain trapezoid sums written out here.
double
gram_deviation(const BasisSpec& spec, std::size_t terms, std::size_t points)
{
  const auto z = grid(points);
  const MatrixXd b = eval_basis(spec, z, terms);
  const double h = 1.0 / static_cast<double>(points - 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < terms; ++i)
    for (std::size_t j = 0; j < terms; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < points; ++r) {
        const double w = (r == 0 || r == points - 1) ? 0.5 * h : h;
        s += w * b(static_cast<Index>(r), static_cast<Index>(i)) * b(static_cast<Index>(r), static_cast<Index>(j));
      }
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

} // namespace

TEST(Basis, FourierIndexingMatchesDefinition)
{
  const BasisSpec spec(BasisFamily::fourier, 5);
  const std::vector<double> z{ 0.0, 0.25, 0.7 };
  const MatrixXd b = eval_basis(spec, z);
  ASSERT_EQ(b.cols(), 5);
  for (Index r = 0; r < 3; ++r)
    EXPECT_EQ(b(r, 0), 1.0);
  EXPECT_NEAR(b(1, 2), std::numbers::sqrt2, 1e-15);    // phi_3(0.25) = sqrt2 sin(pi/2)
  EXPECT_NEAR(b(0, 1), std::numbers::sqrt2, 1e-15);    // phi_2(0) = sqrt2 cos(0)
  EXPECT_NEAR(b(2, 3), std::numbers::sqrt2 * std::cos(4 * std::numbers::pi * 0.7), 1e-14);
  EXPECT_NEAR(b(2, 4), std::numbers::sqrt2 * std::sin(4 * std::numbers::pi * 0.7), 1e-14);
}

TEST(Basis, CosineAndHaarValues)
{
  const std::vector<double> z{ 0.1, 0.6, 1.0, 0.5, 0.0 };
  const MatrixXd c = eval_basis(BasisSpec(BasisFamily::cosine, 3), z);
  EXPECT_NEAR(c(0, 2), std::numbers::sqrt2 * std::cos(2 * std::numbers::pi * 0.1), 1e-15);

  const BasisSpec haar(BasisFamily::haar, 3);
  EXPECT_EQ(haar.effective_terms(), 4u);
  const MatrixXd h = eval_basis(haar, z);
  EXPECT_EQ(h(0, 1), 1.0);
  EXPECT_EQ(h(1, 1), -1.0);
  EXPECT_EQ(h(2, 1), -1.0); // z = 1 belongs to the last dyadic cell
  EXPECT_EQ(h(4, 1), 1.0);
  EXPECT_EQ(h(3, 1), -1.0); // right-continuous at breakpoints
  EXPECT_NEAR(h(0, 2), std::numbers::sqrt2, 1e-15);
  EXPECT_EQ(h(1, 2), 0.0);
  EXPECT_NEAR(h(1, 3), std::numbers::sqrt2, 1e-15);
}

TEST(Basis, RejectsPointsOutsideUnitInterval)
{
  const std::vector<double> z{ 0.2, 1.5 };
  try {
    eval_basis(BasisSpec(BasisFamily::fourier, 3), z);
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("point 1"), std::string::npos);
  }
  EXPECT_THROW(BasisSpec(BasisFamily::cosine, 0), ConfigError);
}

TEST(Basis, OrthonormalOnFineQuadrature)
{
  EXPECT_LT(gram_deviation(BasisSpec(BasisFamily::fourier, 30), 30, 10001), 1e-6);
  EXPECT_LT(gram_deviation(BasisSpec(BasisFamily::cosine, 30), 30, 10001), 1e-6);
}

// Trapezoid error for a Haar product concentrates at grid nodes where both
// factors jump; each such node contributes at most amp_i * amp_j * h / 2.
TEST(Basis, HaarGramErrorWithinJumpBound)
{
  const double h = 1e-4;
  EXPECT_LT(gram_deviation(BasisSpec(BasisFamily::haar, 16), 16, 10001), 1e-3);
  EXPECT_LE(gram_deviation(BasisSpec(BasisFamily::haar, 32), 32, 10001), 4.0 * std::sqrt(8.0) * h + 1e-12);
}

TEST(Basis, FourierProjectionReconstructsLinearFunction)
{
  const std::size_t points = 10001;
  const auto z = grid(points);
  const MatrixXd b = eval_basis(BasisSpec(BasisFamily::fourier, 31), z);
  const VectorXd g = to_eigen(z);
  const VectorXd w = trapezoid_weights(static_cast<Index>(points));
  const VectorXd coef = b.transpose() * w.cwiseProduct(g);
  const VectorXd rec = b * coef;
  double err = 0.0;
  const double h = 1.0 / static_cast<double>(points - 1);
  for (std::size_t r = 0; r < points; ++r)
    if (z[r] >= 0.05 && z[r] <= 0.95)
      err += h * std::pow(rec(static_cast<Index>(r)) - z[r], 2);
  EXPECT_LT(err, 0.01);
}

TEST(Basis, TensorProductColumns)
{
  TensorBasisSpec spec{ BasisSpec(BasisFamily::fourier, 3), BasisSpec(BasisFamily::fourier, 3) };
  const std::vector<std::pair<double, double>> pts{ { 0.25, 0.0 }, { 0.4, 0.9 } };
  const MatrixXd b = eval_tensor_basis(spec, pts);
  ASSERT_EQ(b.cols(), 9);
  EXPECT_EQ(b(0, 0), 1.0);
  EXPECT_EQ(b(1, 0), 1.0);
  EXPECT_NEAR(b(0, static_cast<Index>(spec.column(2, 1))), 2.0, 1e-14); // phi_{3,2}(0.25, 0)
}

TEST(Basis, CosineTensorGramIsIdentityOnUniformGrid)
{
  TensorBasisSpec spec{ BasisSpec(BasisFamily::cosine, 4), BasisSpec(BasisFamily::cosine, 4) };
  const std::size_t m = 200;
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      pts.emplace_back((i + 0.5) / m, (j + 0.5) / m);
  const MatrixXd b = eval_tensor_basis(spec, pts);
  const MatrixXd gram = b.transpose() * b / static_cast<double>(pts.size());
  EXPECT_LT((gram - MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Basis, ResponseScalerRoundTrip)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 50);
  const ResponseScaler s(-3.5, 12.25);
  for (int i = 0; i < 1000; ++i) {
    const double z = u(rng);
    EXPECT_NEAR(s.from_unit(s.to_unit(z)), z, 1e-12 * std::max(1.0, std::abs(z)));
  }
  EXPECT_DOUBLE_EQ(s.density_to_original(1.0) * s.width(), 1.0);
  EXPECT_THROW(ResponseScaler(1.0, 1.0), DataError);
  const std::vector<double> constant{ 2.0, 2.0, 2.0 };
  EXPECT_THROW(ResponseScaler::fit(constant), DataError);
}
