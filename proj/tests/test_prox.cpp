#include <doctest.h>

#include <Eigen/Cholesky>

#include "spinner/prox.hpp"
#include "support/oracles.hpp"
#include "support/test_data.hpp"

using namespace spinner;

namespace {

DesignContext small_context(Rng& rng, Index p, Index n,
                            bool covariates = false) {
  testdata::DatasetSpec spec;
  spec.p = p;
  spec.n = n;
  spec.covariates = covariates;
  return DesignContext(testdata::random_dataset(spec, rng));
}

}  // namespace

TEST_CASE("ridge update solves the scalar instance by hand") {
  // One subject, off-diagonal 1, y = 2, step 2, anchor 0:
  // minimize (2 - 2c)^2 + 4 c^2  =>  c = 1/2.
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  Vector y(1);
  y << 2.0;
  const auto ds = ConnectivityDataset::validate({a}, y, {});
  const DesignContext ctx(ds);
  const Matrix out = ridge_update(ctx, Matrix::Zero(2, 2), 2.0);
  CHECK(out(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out(0, 0) == 0.0);
}

TEST_CASE("ridge update with zero shifted residual returns the anchor") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  Vector y(1);
  y << 2.0;
  const auto ds = ConnectivityDataset::validate({a}, y, {});
  const DesignContext ctx(ds);
  Matrix anchor = Matrix::Zero(2, 2);
  anchor(0, 1) = anchor(1, 0) = 1.0;  // <A, anchor> = 2 = y
  anchor(0, 0) = 0.3;                 // diagonals ride along untouched
  const Matrix out = ridge_update(ctx, anchor, 1.7);
  CHECK((out - anchor).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ridge update matches a dense normal-equations solve") {
  Rng rng(51);
  for (const bool with_covariates : {false, true}) {
    const DesignContext ctx = small_context(rng, 5, 12, with_covariates);
    const Matrix anchor = testdata::random_symmetric(5, rng);
    const double step = 0.3 + rng.uniform();
    const Matrix out = ridge_update(ctx, anchor, step);

    // (4 A~_U^T A~_U + 2 step I) c = 2 A~_U^T shifted, solved densely.
    const Matrix design = ctx.projected_upper_design();
    const Vector shifted =
        ctx.projected_response() -
        ctx.projected_model_upper(upper_from_matrix(anchor));
    const Matrix lhs =
        4.0 * design.transpose() * design +
        2.0 * step * Matrix::Identity(ctx.q(), ctx.q());
    const Vector rhs = 2.0 * design.transpose() * shifted;
    const Vector c = lhs.ldlt().solve(rhs);
    const Matrix expected = matrix_from_upper(c, 5) + anchor;
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("ridge correction has an exactly zero diagonal") {
  Rng rng(53);
  const DesignContext ctx = small_context(rng, 6, 10);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix anchor = testdata::random_symmetric(6, rng);
    const Matrix out = ridge_update(ctx, anchor, 0.5 + rng.uniform());
    CHECK((out - anchor).diagonal().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("svt thresholds a diagonal matrix directly") {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 3.0;
  m(1, 1) = 1.0;
  const Matrix out = svt(m, 2.0);
  CHECK(out(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(out(0, 1)) < 1e-14);
}

TEST_CASE("svt with zero threshold is the identity") {
  Rng rng(59);
  Matrix m(4, 4);
  for (Index j = 0; j < 4; ++j) {
    for (Index i = 0; i < 4; ++i) m(i, j) = rng.normal();
  }
  CHECK((svt(m, 0.0) - m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("svt satisfies the nuclear-norm prox optimality conditions") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(5, 5);
    for (Index j = 0; j < 5; ++j) {
      for (Index i = 0; i < 5; ++i) m(i, j) = rng.normal();
    }
    const double threshold = 0.7;
    const Matrix c = svt(m, threshold);
    CHECK(oracle::svt_optimality_gap(m, threshold, c) < 1e-8);
  }
}

TEST_CASE("svt of a symmetric matrix is symmetric") {
  Rng rng(67);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = testdata::random_symmetric(6, rng);
    const Matrix out = svt(m, 0.4);
    CHECK((out - out.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(oracle::svt_optimality_gap(m, 0.4, out) < 1e-8);
  }
}

TEST_CASE("svt is firmly nonexpansive") {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m1(4, 4), m2(4, 4);
    for (Index j = 0; j < 4; ++j) {
      for (Index i = 0; i < 4; ++i) {
        m1(i, j) = rng.normal();
        m2(i, j) = rng.normal();
      }
    }
    const double t = rng.uniform();
    CHECK((svt(m1, t) - svt(m2, t)).norm() <= (m1 - m2).norm() + 1e-12);
  }
}

TEST_CASE("weighted soft threshold worked example") {
  Matrix q(2, 2);
  q << 5.0, 3.0, 3.0, -1.0;
  const Matrix out =
      weighted_soft_threshold(q, WeightMatrix::standard(2), 2.0);
  CHECK(out(0, 0) == 5.0);  // zero diagonal weight: passes through
  CHECK(out(0, 1) == doctest::Approx(1.0));
  CHECK(out(1, 0) == doctest::Approx(1.0));
  CHECK(out(1, 1) == -1.0);  // diagonal again
}

TEST_CASE("weighted soft threshold with scale zero is the identity") {
  Rng rng(73);
  const Matrix q = testdata::random_symmetric(4, rng);
  CHECK((weighted_soft_threshold(q, WeightMatrix::standard(4), 0.0) - q)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("weighted soft threshold matches the scalar grid oracle") {
  Rng rng(79);
  Matrix q(4, 4), w(4, 4);
  for (Index j = 0; j < 4; ++j) {
    for (Index i = 0; i < 4; ++i) {
      q(i, j) = 3.0 * rng.normal();
      w(i, j) = rng.uniform();
    }
  }
  w = ((w + w.transpose()) * 0.5).eval();
  const double scale = 0.8;
  const Matrix out =
      weighted_soft_threshold(q, WeightMatrix::from_matrix(w), scale);
  for (Index j = 0; j < 4; ++j) {
    for (Index i = 0; i < 4; ++i) {
      const double oracle_value =
          oracle::scalar_lasso_grid(q(i, j), scale * w(i, j));
      CHECK(out(i, j) == doctest::Approx(oracle_value).epsilon(1e-6));
    }
  }
}

TEST_CASE("weighted soft threshold commutes with permutation") {
  Rng rng(83);
  const Index p = 5;
  const Matrix q = testdata::random_symmetric(p, rng);
  Matrix w = Matrix::Ones(p, p);
  w.diagonal().setZero();
  w(0, 2) = w(2, 0) = 0.25;

  std::vector<int> perm = {3, 1, 4, 0, 2};
  Matrix pm = Matrix::Zero(p, p);
  for (Index i = 0; i < p; ++i) pm(i, perm[static_cast<std::size_t>(i)]) = 1.0;

  const Matrix lhs = pm *
                     weighted_soft_threshold(q, WeightMatrix::from_matrix(w),
                                             0.6) *
                     pm.transpose();
  const Matrix rhs = weighted_soft_threshold(
      (pm * q * pm.transpose()).eval(),
      WeightMatrix::from_matrix((pm * w * pm.transpose()).eval()), 0.6);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("merge_quadratics") {
  Rng rng(89);
  const Matrix k = testdata::random_symmetric(3, rng);
  const Matrix l = testdata::random_symmetric(3, rng);
  CHECK((merge_quadratics(k, k, 0.7, 2.1) - k).cwiseAbs().maxCoeff() <
        1e-15);
  CHECK((merge_quadratics(k, l, 1.5, 1.5) - (k + l) * 0.5)
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  const Matrix ones = Matrix::Ones(3, 3);
  CHECK((merge_quadratics(Matrix::Zero(3, 3), ones, 1.0, 3.0) -
         0.75 * ones)
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("prox maps satisfy their subgradient conditions at the optimum") {
  // The soft-threshold output d solves min 1/2 (d-q)^2 + s w |d|:
  // q - d = s w sgn(d) on the support, |q| <= s w off it.
  Rng rng(97);
  Matrix q(5, 5);
  for (Index j = 0; j < 5; ++j) {
    for (Index i = 0; i < 5; ++i) q(i, j) = 2.0 * rng.normal();
  }
  const auto w = WeightMatrix::standard(5);
  const double scale = 0.9;
  const Matrix d = weighted_soft_threshold(q, w, scale);
  for (Index j = 0; j < 5; ++j) {
    for (Index i = 0; i < 5; ++i) {
      const double bound = scale * w.entries(i, j);
      if (d(i, j) != 0.0) {
        const double sub = q(i, j) - d(i, j);
        CHECK(std::abs(sub - bound * (d(i, j) > 0 ? 1.0 : -1.0)) < 1e-8);
      } else {
        CHECK(std::abs(q(i, j)) <= bound + 1e-8);
      }
    }
  }
}
