#include <gtest/gtest.h>

#include <cmath>

#include "scale/errors.hpp"
#include "scale/rng.hpp"
#include "scale/svd.hpp"

using namespace scale;

namespace {

double orthonormal_cols_error(const Matrix& u) {
  return frobenius_norm(matmul(transpose(u), u) - Matrix::identity(u.cols()));
}

double orthonormal_rows_error(const Matrix& vt) {
  return frobenius_norm(gram(vt) - Matrix::identity(vt.rows()));
}

void expect_valid(const Matrix& g, const SvdResult& s) {
  const std::size_t r = std::min(g.rows(), g.cols());
  ASSERT_EQ(s.u.rows(), g.rows());
  ASSERT_EQ(s.u.cols(), r);
  ASSERT_EQ(s.vt.rows(), r);
  ASSERT_EQ(s.vt.cols(), g.cols());
  ASSERT_EQ(s.sigma.size(), r);
  for (std::size_t i = 0; i < r; ++i) {
    EXPECT_GE(s.sigma[i], 0.0);
    if (i > 0) EXPECT_LE(s.sigma[i], s.sigma[i - 1]);
  }
  EXPECT_LE(orthonormal_cols_error(s.u), 1e-10);
  EXPECT_LE(orthonormal_rows_error(s.vt), 1e-10);
  EXPECT_LE(frobenius_norm(reconstruct(s) - g), 1e-8 * frobenius_norm(g));
}

}  // namespace

TEST(Svd, Diagonal) {
  const auto s = svd_exact(Matrix::diagonal({2, 5}));
  EXPECT_NEAR(s.sigma[0], 5.0, 1e-14);
  EXPECT_NEAR(s.sigma[1], 2.0, 1e-14);
  expect_valid(Matrix::diagonal({2, 5}), s);
}

TEST(Svd, RankOneOuterProduct) {
  Rng rng(1);
  Matrix u = rng.normal_matrix(4, 1);
  Matrix v = rng.normal_matrix(1, 3);
  u *= 1.0 / frobenius_norm(u);
  v *= 1.0 / frobenius_norm(v);
  const Matrix g = matmul(u, v);
  const auto s = svd_exact(g);
  EXPECT_NEAR(s.sigma[0], 1.0, 1e-12);
  EXPECT_NEAR(s.sigma[1], 0.0, 1e-12);
  EXPECT_NEAR(s.sigma[2], 0.0, 1e-12);
  expect_valid(g, s);
}

TEST(Svd, RandomTallReconstruction) {
  Rng rng(2);
  const Matrix g = rng.normal_matrix(6, 4);
  expect_valid(g, svd_exact(g));
}

TEST(Svd, ZeroMatrix) {
  const Matrix g(3, 5);
  const auto s = svd_exact(g);
  for (double v : s.sigma) EXPECT_EQ(v, 0.0);
  EXPECT_LE(orthonormal_cols_error(s.u), 1e-12);
  EXPECT_LE(orthonormal_rows_error(s.vt), 1e-12);
}

TEST(Svd, RoundTrip500RandomUpTo16) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 1 + rng.below(16);
    const std::size_t n = 1 + rng.below(16);
    const Matrix g = rng.normal_matrix(m, n);
    const auto s = svd_exact(g);
    ASSERT_LE(frobenius_norm(reconstruct(s) - g), 1e-8 * frobenius_norm(g))
        << "trial " << trial << " " << m << "x" << n;
  }
}

TEST(Svd, WideAndRankDeficient) {
  Rng rng(4);
  const Matrix a = rng.normal_matrix(5, 2);
  const Matrix b = rng.normal_matrix(2, 9);
  const Matrix g = matmul(a, b);  // 5 x 9, rank 2
  const auto s = svd_exact(g);
  expect_valid(g, s);
  for (std::size_t i = 2; i < s.sigma.size(); ++i) EXPECT_LE(s.sigma[i], 1e-12 * s.sigma[0]);
}

TEST(Svd, LargeSizeUsesDriverAndAgreesWithJacobi) {
  Rng rng(5);
  const Matrix g = rng.normal_matrix(80, 70);
  const auto lapack = svd_exact(g);
  expect_valid(g, lapack);
  const auto jacobi = svd_jacobi(g);
  expect_valid(g, jacobi);
  for (std::size_t i = 0; i < lapack.sigma.size(); ++i) {
    EXPECT_NEAR(lapack.sigma[i], jacobi.sigma[i], 1e-10 * lapack.sigma[0]);
  }
}

TEST(Svd, JacobiSweepCapSignalsNonConvergence) {
  Rng rng(6);
  EXPECT_THROW(svd_jacobi(rng.normal_matrix(12, 12), 1), ConvergenceError);
}

TEST(Svd, SingularValuesOfKnownSpectrum) {
  Rng rng(7);
  const Matrix q1 = svd_exact(rng.normal_matrix(6, 6)).u;
  const Matrix q2 = svd_exact(rng.normal_matrix(6, 6)).vt;
  const Matrix g = matmul(matmul(q1, Matrix::diagonal({9, 7, 5, 3, 2, 1})), q2);
  const auto s = svd_exact(g);
  const double want[] = {9, 7, 5, 3, 2, 1};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(s.sigma[i], want[i], 1e-12);
}
