#include <random>

#include <gtest/gtest.h>

#include "lureid/kernel.hpp"
#include "oracles.hpp"

using namespace lureid;

namespace {

const KernelSpec kGauss1(KernelFamily::gaussian, 1.0, 3);
const KernelSpec kLap100(KernelFamily::laplacian, 100.0, 3);

Matrix seeded_points(Eigen::Index n, Eigen::Index dim, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> ud(lo, hi);
  Matrix p(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) p(i, j) = ud(eng);
  }
  return p;
}

}  // namespace

TEST(KernelSpec, ValidatesBandwidthAndFamily) {
  EXPECT_THROW(KernelSpec(KernelFamily::gaussian, 0.0, 3), InvalidInputError);
  EXPECT_THROW(KernelSpec(KernelFamily::gaussian, -1.0, 3), InvalidInputError);
  EXPECT_THROW(KernelSpec(KernelFamily::gaussian, NAN, 3), InvalidInputError);
  EXPECT_THROW(kernel_family_from_string("polynomial"), InvalidInputError);
  EXPECT_EQ(kernel_family_from_string("laplacian"), KernelFamily::laplacian);
  EXPECT_EQ(to_string(KernelFamily::gaussian), "gaussian");
}

TEST(KernelEval, AnalyticValues) {
  const Eigen::Vector3d z(0.3, -0.2, 1.0);
  EXPECT_EQ(kernel::eval(kGauss1, z, z), 1.0);
  // |d|_2 = sqrt(2)
  EXPECT_NEAR(kernel::eval(kGauss1, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 1, 0)), std::exp(-1.0), 1e-15);
  // |d|_1 = 100
  EXPECT_NEAR(kernel::eval(kLap100, Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(50, -30, 20)), std::exp(-1.0),
              1e-15);
}

TEST(KernelEval, DimensionMismatchThrows) {
  EXPECT_THROW(kernel::eval(kGauss1, Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0)), InvalidInputError);
}

TEST(KernelEval, PropertySymmetricAndInUnitInterval) {
  const Matrix p = seeded_points(200, 3, 4, -5.0, 5.0);
  for (Eigen::Index i = 0; i + 1 < p.rows(); i += 2) {
    for (const KernelSpec& s : {kGauss1, kLap100}) {
      const double ab = kernel::eval(s, p.row(i), p.row(i + 1));
      EXPECT_EQ(ab, kernel::eval(s, p.row(i + 1), p.row(i)));
      EXPECT_GE(ab, 0.0);
      EXPECT_LE(ab, 1.0);
      EXPECT_DOUBLE_EQ(ab, oracle::kernel(s.family == KernelFamily::gaussian, s.sigma,
                                          p.row(i).transpose(), p.row(i + 1).transpose()));
    }
  }
}

TEST(Gram, SinglePointAndDuplicates) {
  const auto g1 = kernel::gram(kGauss1, Matrix::Ones(1, 3));
  EXPECT_EQ(g1.K.matrix(), Matrix::Ones(1, 1));
  const auto g2 = kernel::gram(kGauss1, Matrix::Ones(2, 3));
  EXPECT_EQ(g2.K.matrix(), Matrix::Ones(2, 2));
  EXPECT_THROW(kernel::gram(kGauss1, Matrix(0, 3)), InvalidInputError);
}

TEST(Gram, EntriesMatchEvalAndArePsd) {
  const Matrix p = seeded_points(10, 3, 21);
  const auto g = kernel::gram(kGauss1, p);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) EXPECT_EQ(g.K(i, j), kernel::eval(kGauss1, p.row(i), p.row(j)));
  }
  EXPECT_GE(linalg::sym_eig(g.K).values.minCoeff(), -1e-10);
  EXPECT_EQ(g.points, p);
}

TEST(Gram, PropertyPsdForSeededSets) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const KernelSpec& s : {kGauss1, kLap100}) {
      const auto g = kernel::gram(s, seeded_points(25, 3, seed, -2.0, 2.0));
      const auto e = linalg::sym_eig(g.K);
      EXPECT_GE(e.values.minCoeff(), -1e-10 * e.values.maxCoeff());
    }
  }
}

TEST(KernelSection, MatchesEvalAndDecays) {
  const Matrix one = Matrix::Constant(1, 3, 0.4);
  EXPECT_EQ(kernel::kernel_section(kGauss1, one, Eigen::Vector3d::Constant(0.4)), Vector::Ones(1));

  const Matrix p = seeded_points(5, 3, 8);
  const Eigen::Vector3d x(0.1, 0.9, 0.5);
  const Vector k = kernel::kernel_section(kGauss1, p, x);
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_EQ(k(j), kernel::eval(kGauss1, x, p.row(j)));

  const Vector far = kernel::kernel_section(kGauss1, p, Eigen::Vector3d::Constant(100.0));
  EXPECT_TRUE((far.array() < 1e-300).all());
}

TEST(Nonexpansive, CoincidentPairIsSkipped) {
  EXPECT_FALSE(kernel::nonexpansive_ratio(kGauss1, Vector::Ones(3), Vector::Ones(3)).has_value());
  const auto r = kernel::nonexpansive_ratio(kGauss1, Vector::Zero(3), Vector::Ones(3));
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(*r, (2.0 - 2.0 * std::exp(-1.5)) / std::sqrt(3.0), 1e-15);
}

TEST(Nonexpansive, GaussianUnitBoxHolds) {
  const kernel::Box box{Vector::Zero(3), Vector::Ones(3)};
  const auto rep = kernel::check_nonexpansive(kGauss1, box, 10000, 1);
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.pairs_used, 10000u);
  EXPECT_LE(rep.worst_ratio, 1.0);
  ASSERT_TRUE(rep.worst_pair.has_value());
}

TEST(Nonexpansive, LaplacianWideBoxHolds) {
  const kernel::Box box{Vector::Zero(3), Vector::Constant(3, 10.0)};
  EXPECT_TRUE(kernel::check_nonexpansive(kLap100, box, 10000, 1).holds);
}

TEST(Nonexpansive, NarrowBandwidthFails) {
  const KernelSpec narrow(KernelFamily::laplacian, 0.01, 3);
  const kernel::Box box{Vector::Zero(3), Vector::Ones(3)};
  const auto rep = kernel::check_nonexpansive(narrow, box, 1000, 1);
  EXPECT_FALSE(rep.holds);
  EXPECT_GT(rep.worst_ratio, 1.0);
}

TEST(Nonexpansive, DeterministicPerSeedAndRejectsBadBox) {
  const kernel::Box box{Vector::Zero(3), Vector::Ones(3)};
  EXPECT_EQ(kernel::check_nonexpansive(kGauss1, box, 500, 9).worst_ratio,
            kernel::check_nonexpansive(kGauss1, box, 500, 9).worst_ratio);
  EXPECT_THROW(kernel::check_nonexpansive(kGauss1, {Vector::Zero(3), Vector::Zero(3)}, 10, 1),
               InvalidInputError);
  EXPECT_THROW(kernel::check_nonexpansive(kGauss1, box, 0, 1), InvalidInputError);
}
