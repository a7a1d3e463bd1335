#include <doctest.h>

#include "spinner/admm.hpp"
#include "spinner/tuning.hpp"
#include "support/oracles.hpp"
#include "support/test_data.hpp"

using namespace spinner;

namespace {

SpinnerConfig config_with(double lambda_nuclear, double lambda_lasso) {
  SpinnerConfig config;
  config.lambda_nuclear = lambda_nuclear;
  config.lambda_lasso = lambda_lasso;
  return config;
}

ConnectivityDataset random_ds(Index p, Index n, std::uint64_t seed,
                              bool covariates = false) {
  Rng rng(seed);
  testdata::DatasetSpec spec;
  spec.p = p;
  spec.n = n;
  spec.covariates = covariates;
  return testdata::random_dataset(spec, rng);
}

}  // namespace

TEST_CASE("zero projected response gives the zero fit immediately") {
  Rng rng(101);
  auto mats = testdata::random_stack(4, 8, rng);
  const auto ds =
      ConnectivityDataset::validate(std::move(mats), Vector::Zero(8), {});
  const DesignContext ctx(ds);
  const SpinnerFit fit = solve_spinner(ctx, config_with(0.7, 0.3));
  CHECK(fit.converged);
  CHECK(fit.iterations_used <= 2);
  CHECK(fit.coefficient_matrix.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("penalties above both critical values give the zero matrix") {
  const auto ds = random_ds(5, 20, 103);
  const DesignContext ctx(ds);
  const double ln = 1.01 * lambda_max_nuclear(ctx);
  const double ll = 1.01 * lambda_max_lasso(ctx);
  const SpinnerFit fit = solve_spinner(ctx, config_with(ln, ll));
  CHECK(fit.converged);
  CHECK(fit.coefficient_matrix.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("three-block solution matches the Davis-Yin reference") {
  const auto ds = random_ds(6, 40, 107);
  const DesignContext ctx(ds);
  const SpinnerFit fit = solve_spinner(ctx, config_with(0.5, 0.5));
  REQUIRE(fit.converged);

  const auto problem = oracle::build_dense_problem(ds);
  const Matrix w = WeightMatrix::standard(6).entries;
  const auto reference = oracle::davis_yin(problem, 0.5, 0.5, w);
  REQUIRE(reference.converged);
  CHECK(std::abs(fit.objective_value - reference.objective) <=
        1e-6 * reference.objective);
}

TEST_CASE("kkt certificate holds at convergence") {
  for (std::uint64_t seed : {109, 113, 127}) {
    const auto ds = random_ds(6, 30, seed);
    const DesignContext ctx(ds);
    const SpinnerFit fit = solve_spinner(ctx, config_with(0.8, 0.4));
    REQUIRE(fit.converged);
    const auto problem = oracle::build_dense_problem(ds);
    const Matrix w = WeightMatrix::standard(6).entries;
    const double residual = oracle::kkt_residual(
        problem, fit.coefficient_matrix, 0.8, 0.4, w);
    const double grad = oracle::gradient_norm(problem,
                                              fit.coefficient_matrix);
    CHECK(residual <= 1e-4 * (1.0 + grad));
  }
}

TEST_CASE("nuclear-only solver") {
  SUBCASE("critical value zeroes the estimate") {
    const auto ds = random_ds(5, 18, 131);
    const DesignContext ctx(ds);
    SpinnerConfig config = config_with(1.01 * lambda_max_nuclear(ctx), 0.0);
    const SpinnerFit fit = solve_nuclear_only(ctx, config);
    CHECK(fit.converged);
    CHECK(fit.coefficient_matrix.cwiseAbs().maxCoeff() <= 1e-8);
  }

  SUBCASE("vanishing penalty approaches least squares") {
    // n > q with a full-column-rank design.
    const auto ds = random_ds(4, 24, 137);
    const DesignContext ctx(ds);
    SpinnerConfig config = config_with(1e-8, 0.0);
    config.eps_primal = 1e-8;
    config.eps_dual = 1e-8;
    config.max_iterations = 50000;
    const SpinnerFit fit = solve_nuclear_only(ctx, config);
    REQUIRE(fit.converged);

    const Matrix design = 2.0 * ctx.projected_upper_design();
    const Vector ls = oracle::normal_equation_solve(
        design, ctx.projected_response());
    const Matrix b_ls = matrix_from_upper(ls, 4);
    // The diagonal is not identified by the fit term; the vanishing
    // nuclear penalty fills it with the minimum-nuclear-norm choice, so
    // the comparison is on the identified off-diagonal part.
    Matrix off = fit.coefficient_matrix;
    off.diagonal().setZero();
    CHECK((off - b_ls).norm() <= 1e-3 * b_ls.norm());
  }

  SUBCASE("agrees with the three-block path at lambda_lasso ~ 0") {
    const auto ds = random_ds(5, 25, 139);
    const DesignContext ctx(ds);
    const double ln = 0.3 * lambda_max_nuclear(ctx);
    const SpinnerFit nuclear = solve_nuclear_only(ctx, config_with(ln, 0.0));
    const SpinnerFit spinner = solve_spinner(ctx, config_with(ln, 1e-14));
    REQUIRE(nuclear.converged);
    REQUIRE(spinner.converged);
    CHECK(std::abs(nuclear.objective_value - spinner.objective_value) <=
          1e-6 * std::max(1.0, nuclear.objective_value));
  }
}

TEST_CASE("lasso-only solver") {
  SUBCASE("critical value zeroes the off-diagonal") {
    const auto ds = random_ds(5, 22, 149);
    const DesignContext ctx(ds);
    SpinnerConfig config = config_with(0.0, 1.0 * lambda_max_lasso(ctx));
    config.lambda_lasso *= 1.005;
    const SpinnerFit fit = solve_lasso_only(ctx, config);
    CHECK(fit.converged);
    CHECK(fit.coefficient_matrix.cwiseAbs().maxCoeff() <= 1e-8);
  }

  SUBCASE("single-feature instance matches the scalar closed form") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = a(1, 0) = 1.5;
    Matrix a2 = Matrix::Zero(2, 2);
    a2(0, 1) = a2(1, 0) = -0.5;
    Vector y(2);
    y << 2.0, 1.0;
    const auto ds = ConnectivityDataset::validate({a, a2}, y, {});
    const DesignContext ctx(ds);

    const double lambda = 0.4;
    SpinnerConfig config = config_with(0.0, lambda);
    config.eps_primal = 1e-10;
    config.eps_dual = 1e-10;
    config.max_iterations = 100000;
    const SpinnerFit fit = solve_lasso_only(ctx, config);
    REQUIRE(fit.converged);

    // min 1/2 ||y - x c||^2 + 2 lambda |c| with x the doubled column.
    const Vector x = 2.0 * ctx.upper_design().col(0);
    const double rho = x.dot(y);
    const double mag = std::abs(rho) - 2.0 * lambda;
    const double expected =
        mag > 0.0 ? (rho > 0 ? mag : -mag) / x.squaredNorm() : 0.0;
    CHECK(fit.coefficient_matrix(0, 1) ==
          doctest::Approx(expected).epsilon(1e-7));
  }

  SUBCASE("matches coordinate descent on random data") {
    const auto ds = random_ds(5, 60, 151);
    const DesignContext ctx(ds);
    const double lambda = 0.25 * lambda_max_lasso(ctx);
    SpinnerConfig config = config_with(0.0, lambda);
    config.eps_primal = 1e-9;
    config.eps_dual = 1e-9;
    config.max_iterations = 100000;
    const SpinnerFit fit = solve_lasso_only(ctx, config);
    REQUIRE(fit.converged);

    const Matrix x = 2.0 * ctx.projected_upper_design();
    const Vector penalties =
        Vector::Constant(ctx.q(), 2.0 * lambda);
    const Vector c = oracle::coordinate_descent_lasso(
        x, ctx.projected_response(), penalties);
    const Matrix b_cd = matrix_from_upper(c, 5);
    CHECK((fit.coefficient_matrix - b_cd).cwiseAbs().maxCoeff() <= 1e-6);
  }

  SUBCASE("agrees with the three-block path at lambda_nuclear ~ 0") {
    const auto ds = random_ds(5, 25, 157);
    const DesignContext ctx(ds);
    const double ll = 0.3 * lambda_max_lasso(ctx);
    const SpinnerFit lasso = solve_lasso_only(ctx, config_with(0.0, ll));
    const SpinnerFit spinner = solve_spinner(ctx, config_with(1e-14, ll));
    REQUIRE(lasso.converged);
    REQUIRE(spinner.converged);
    CHECK(std::abs(lasso.objective_value - spinner.objective_value) <=
          1e-6 * std::max(1.0, lasso.objective_value));
  }
}

TEST_CASE("balance_pair rule") {
  BalancePolicy policy;
  double step = 1.0;

  SUBCASE("balanced residuals leave the step alone") {
    balance_pair(step, 1.0, 1.0, policy);
    CHECK(step == 1.0);
  }

  SUBCASE("dominant primal doubles the step") {
    balance_pair(step, 100.0, 1.0, policy);
    CHECK(step == 2.0);
  }

  SUBCASE("dominant dual halves the step") {
    balance_pair(step, 1.0, 100.0, policy);
    CHECK(step == 0.5);
  }

  SUBCASE("steps are clamped") {
    step = policy.step_max;
    balance_pair(step, 100.0, 1.0, policy);
    CHECK(step == policy.step_max);
    step = policy.step_min;
    balance_pair(step, 1.0, 100.0, policy);
    CHECK(step == policy.step_min);
  }

  SUBCASE("zero residuals never trigger a change") {
    balance_pair(step, 0.0, 0.0, policy);
    CHECK(step == 1.0);
  }

  SUBCASE("disabled policy is inert") {
    policy.enabled = false;
    balance_pair(step, 100.0, 1.0, policy);
    CHECK(step == 1.0);
  }
}

TEST_CASE("balancing keeps the dual variables intact") {
  AdmmState state = AdmmState::zero(3, 1.0, 1.0);
  state.Z1.setConstant(2.0);
  state.Z2.setConstant(-1.0);
  balance_steps(state, {100.0, 1.0, 1.0}, BalancePolicy{});
  CHECK(state.step_1 == 2.0);  // primal-dominated pair speeds up
  CHECK(state.step_2 == 1.0);  // balanced pair untouched
  CHECK(state.Z1(0, 0) == 2.0);
  CHECK(state.Z2(0, 0) == -1.0);
}

TEST_CASE("a freshly balanced pair rests for the cooldown") {
  BalancePolicy policy;
  policy.cooldown = 3;
  AdmmState state = AdmmState::zero(2, 1.0, 1.0);
  balance_steps(state, {100.0, 1.0, 1.0}, policy);
  CHECK(state.step_1 == 2.0);
  for (int k = 0; k < 3; ++k) {
    balance_steps(state, {100.0, 1.0, 1.0}, policy);
    CHECK(state.step_1 == 2.0);  // resting
  }
  balance_steps(state, {100.0, 1.0, 1.0}, policy);
  CHECK(state.step_1 == 4.0);  // eligible again
}

TEST_CASE("balancing reaches the fixed-step objective, usually faster") {
  int balanced_not_slower = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto ds = random_ds(5, 25, 3000 + static_cast<std::uint64_t>(s));
    const DesignContext ctx(ds);
    const double ln = 0.2 * lambda_max_nuclear(ctx);
    const double ll = 0.2 * lambda_max_lasso(ctx);

    SpinnerConfig balanced = config_with(ln, ll);
    balanced.max_iterations = 50000;
    SpinnerConfig fixed = balanced;
    fixed.balancing.enabled = false;

    const SpinnerFit fit_b = solve_spinner(ctx, balanced);
    const SpinnerFit fit_f = solve_spinner(ctx, fixed);
    REQUIRE(fit_b.converged);
    REQUIRE(fit_f.converged);
    CHECK(std::abs(fit_b.objective_value - fit_f.objective_value) <=
          1e-6 * std::max(1.0, fit_f.objective_value));
    if (fit_b.iterations_used <= fit_f.iterations_used) {
      ++balanced_not_slower;
    }
  }
  CHECK(balanced_not_slower >= (seeds * 8) / 10);
}

TEST_CASE("iterates stay symmetric") {
  for (std::uint64_t seed : {163, 167, 173}) {
    const auto ds = random_ds(6, 20, seed);
    const DesignContext ctx(ds);
    SpinnerConfig config = config_with(0.5, 0.3);
    config.record_history = true;
    const SpinnerFit fit = solve_spinner(ctx, config);
    CHECK(fit.diagnostics.max_iterate_asymmetry <= 1e-10);
    CHECK((fit.coefficient_matrix - fit.coefficient_matrix.transpose())
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
}

TEST_CASE("fits are equivariant under node permutation") {
  Rng rng(179);
  const auto ds = random_ds(5, 25, 181);
  const DesignContext ctx(ds);
  SpinnerConfig config = config_with(0.0, 0.0);
  config.eps_primal = 1e-8;
  config.eps_dual = 1e-8;
  config.max_iterations = 100000;
  const double ln = 0.25 * lambda_max_nuclear(ctx);
  const double ll = 0.25 * lambda_max_lasso(ctx);
  config.lambda_nuclear = ln;
  config.lambda_lasso = ll;
  const SpinnerFit fit = solve_spinner(ctx, config);
  REQUIRE(fit.converged);

  std::vector<int> perm = {2, 4, 0, 3, 1};
  Matrix pm = Matrix::Zero(5, 5);
  for (Index i = 0; i < 5; ++i) pm(i, perm[static_cast<std::size_t>(i)]) = 1.0;

  std::vector<Matrix> permuted;
  for (const Matrix& a : ds.matrices()) {
    permuted.push_back(pm * a * pm.transpose());
  }
  const auto ds_perm = ConnectivityDataset::validate(
      std::move(permuted), ds.response(), {});
  const DesignContext ctx_perm(ds_perm);
  const SpinnerFit fit_perm = solve_spinner(ctx_perm, config);
  REQUIRE(fit_perm.converged);

  const Matrix expected = pm * fit.coefficient_matrix * pm.transpose();
  CHECK((fit_perm.coefficient_matrix - expected).norm() <=
        1e-5 * fit.coefficient_matrix.norm());
}

TEST_CASE("stopping ratios are honored at termination") {
  const auto ds = random_ds(5, 20, 191);
  const DesignContext ctx(ds);
  SpinnerConfig config = config_with(0.4, 0.2);
  const SpinnerFit fit = solve_spinner(ctx, config);
  REQUIRE(fit.converged);
  CHECK(fit.final_primal_residual < config.eps_primal);
  CHECK(fit.final_dual_residual < config.eps_dual);
}

TEST_CASE("running out of iterations is reported, not thrown") {
  const auto ds = random_ds(5, 20, 193);
  const DesignContext ctx(ds);
  SpinnerConfig config = config_with(0.4, 0.2);
  config.max_iterations = 3;
  config.record_history = true;
  const SpinnerFit fit = solve_spinner(ctx, config);
  CHECK(!fit.converged);
  CHECK(fit.iterations_used == 3);
  CHECK(fit.diagnostics.primal_ratio_cb.size() == 3);
  CHECK(fit.diagnostics.dual_ratio.size() == 3);
  CHECK(fit.diagnostics.objective.size() == 3);
}

TEST_CASE("solve_spinner rejects degenerate penalties") {
  const auto ds = random_ds(4, 10, 197);
  const DesignContext ctx(ds);
  CHECK_THROWS_AS(solve_spinner(ctx, config_with(0.0, 1.0)), InvalidConfig);
  CHECK_THROWS_AS(solve_spinner(ctx, config_with(1.0, 0.0)), InvalidConfig);
  CHECK_THROWS_AS(solve_spinner(ctx, config_with(-1.0, 1.0)),
                  InvalidConfig);
  CHECK_THROWS_AS(solve_nuclear_only(ctx, config_with(1.0, 0.5)),
                  InvalidConfig);
  CHECK_THROWS_AS(solve_lasso_only(ctx, config_with(0.5, 1.0)),
                  InvalidConfig);
}

TEST_CASE("solve dispatches by penalty signs") {
  const auto ds = random_ds(5, 20, 199);
  const DesignContext ctx(ds);
  const double ln = 0.3 * lambda_max_nuclear(ctx);
  const double ll = 0.3 * lambda_max_lasso(ctx);

  const SpinnerFit lasso = solve(ctx, config_with(0.0, ll));
  const SpinnerFit lasso_direct = solve_lasso_only(ctx, config_with(0.0, ll));
  CHECK(lasso.coefficient_matrix == lasso_direct.coefficient_matrix);

  const SpinnerFit nuclear = solve(ctx, config_with(ln, 0.0));
  const SpinnerFit nuclear_direct =
      solve_nuclear_only(ctx, config_with(ln, 0.0));
  CHECK(nuclear.coefficient_matrix == nuclear_direct.coefficient_matrix);

  const SpinnerFit ls = solve(ctx, config_with(0.0, 0.0));
  CHECK(ls.converged);
  // Unpenalized corner: the minimum-norm least-squares fit.
  const Matrix design = 2.0 * ctx.projected_upper_design();
  const Vector residual =
      ctx.projected_response() -
      design * upper_from_matrix(ls.coefficient_matrix);
  // Gradient of the fit term must vanish on the range of the design.
  CHECK((design.transpose() * residual).cwiseAbs().maxCoeff() <= 1e-8);
}
