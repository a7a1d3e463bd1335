#include "spinner/admm.hpp"

#include <algorithm>
#include <cmath>

#include "spinner/prox.hpp"

namespace spinner {

namespace {

// Denominators below this switch the ratio tests to absolute tests,
// which keeps the B = 0 regime well-defined.
constexpr double kRatioGuard = 1e-12;

double guarded_ratio(double num, double den) {
  return den > kRatioGuard ? num / den : num;
}

double max_asymmetry(const Matrix& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

const WeightMatrix& effective_weights(const SpinnerConfig& config,
                                      Index p, WeightMatrix& storage) {
  if (config.weights.has_value()) return *config.weights;
  storage = WeightMatrix::standard(p);
  return storage;
}

}  // namespace

bool balance_pair(double& step, double primal, double dual,
                  const BalancePolicy& policy) {
  if (!policy.enabled) return false;
  double target = step;
  if (primal > policy.mu * dual) {
    target = step * policy.tau;
  } else if (dual > policy.mu * primal) {
    target = step / policy.tau;
  }
  // The dual variable is deliberately left alone: it estimates the same
  // optimal multiplier whatever the step is, and rescaling it with the
  // step feeds energy back into the iteration (observed to drive a
  // divergent ping-pong near convergence).
  target = std::clamp(target, policy.step_min, policy.step_max);
  if (target == step) return false;
  step = target;
  return true;
}

void balance_steps(AdmmState& state, const BalanceResiduals& residuals,
                   const BalancePolicy& policy) {
  if (state.balance_wait_1 > 0) {
    --state.balance_wait_1;
  } else if (balance_pair(state.step_1, residuals.primal_1, residuals.dual,
                          policy)) {
    state.balance_wait_1 = policy.cooldown;
  }
  if (state.balance_wait_2 > 0) {
    --state.balance_wait_2;
  } else if (balance_pair(state.step_2, residuals.primal_2, residuals.dual,
                          policy)) {
    state.balance_wait_2 = policy.cooldown;
  }
}

SpinnerFit solve_spinner(const DesignContext& context,
                         const SpinnerConfig& config) {
  const Index p = context.p();
  config.check(p);
  if (!(config.lambda_nuclear > 0.0) || !(config.lambda_lasso > 0.0)) {
    throw InvalidConfig(
        "solve_spinner needs both penalties positive; use solve() to "
        "dispatch degenerate configurations");
  }
  WeightMatrix default_weights;
  const WeightMatrix& w = effective_weights(config, p, default_weights);

  AdmmState state =
      AdmmState::zero(p, config.initial_step_1, config.initial_step_2);
  Matrix d_old = state.D;

  SpinnerFit fit;
  SolveDiagnostics& diag = fit.diagnostics;
  double primal = 0.0;
  double dual = 0.0;

  int iter = 0;
  for (iter = 1; iter <= config.max_iterations; ++iter) {
    state.B = ridge_update(context, state.D + state.Z1 / state.step_1,
                           state.step_1);
    state.C = svt(state.D + state.Z2 / state.step_2,
                  config.lambda_nuclear / state.step_2);
    const double total = state.step_1 + state.step_2;
    state.D = weighted_soft_threshold(
        merge_quadratics(state.B - state.Z1 / state.step_1,
                         state.C - state.Z2 / state.step_2, state.step_1,
                         state.step_2),
        w, config.lambda_lasso / total);
    state.Z1 += state.step_1 * (state.D - state.B);
    state.Z2 += state.step_2 * (state.D - state.C);

    const double r_cb = (state.C - state.B).norm();
    const double r_db = (state.D - state.B).norm();
    const double r_dc = (state.D - state.C).norm();
    const double s_dd = (state.D - d_old).norm();
    const double b_norm = state.B.norm();
    primal = std::max(guarded_ratio(r_cb, b_norm),
                      guarded_ratio(r_db, b_norm));
    dual = guarded_ratio(s_dd, d_old.norm());

    if (config.record_history) {
      diag.primal_ratio_cb.push_back(guarded_ratio(r_cb, b_norm));
      diag.primal_ratio_db.push_back(guarded_ratio(r_db, b_norm));
      diag.dual_ratio.push_back(dual);
      diag.objective.push_back(objective_value(
          context, state.D, config.lambda_nuclear, config.lambda_lasso, w));
      diag.step_1.push_back(state.step_1);
      diag.step_2.push_back(state.step_2);
      diag.max_iterate_asymmetry = std::max(
          {diag.max_iterate_asymmetry, max_asymmetry(state.B),
           max_asymmetry(state.C), max_asymmetry(state.D),
           max_asymmetry(state.Z1), max_asymmetry(state.Z2)});
    }

    if (primal < config.eps_primal && dual < config.eps_dual) {
      fit.converged = true;
      break;
    }
    balance_steps(state, {r_db, r_dc, s_dd}, config.balancing);
    d_old = state.D;
  }

  fit.iterations_used = std::min(iter, config.max_iterations);
  fit.coefficient_matrix = state.D;
  fit.covariate_coefficients = recover_beta(context, state.D);
  fit.final_primal_residual = primal;
  fit.final_dual_residual = dual;
  fit.objective_value = objective_value(
      context, state.D, config.lambda_nuclear, config.lambda_lasso, w);
  return fit;
}

SpinnerFit solve_nuclear_only(const DesignContext& context,
                              const SpinnerConfig& config) {
  const Index p = context.p();
  config.check(p);
  if (!(config.lambda_nuclear > 0.0) || config.lambda_lasso != 0.0) {
    throw InvalidConfig(
        "solve_nuclear_only needs lambda_nuclear > 0 and lambda_lasso = 0");
  }
  WeightMatrix default_weights;
  const WeightMatrix& w = effective_weights(config, p, default_weights);

  double step = config.initial_step_1;
  int balance_wait = 0;
  Matrix c = Matrix::Zero(p, p);
  Matrix z = Matrix::Zero(p, p);

  SpinnerFit fit;
  SolveDiagnostics& diag = fit.diagnostics;
  double primal = 0.0;
  double dual = 0.0;

  int iter = 0;
  for (iter = 1; iter <= config.max_iterations; ++iter) {
    const Matrix b = ridge_update(context, c + z / step, step);
    const Matrix c_new = svt(b - z / step, config.lambda_nuclear / step);
    z += step * (c_new - b);

    const double r = (c_new - b).norm();
    const double s = (c_new - c).norm();
    primal = guarded_ratio(r, b.norm());
    dual = guarded_ratio(s, c.norm());
    c = c_new;

    if (config.record_history) {
      diag.primal_ratio_cb.push_back(primal);
      diag.dual_ratio.push_back(dual);
      diag.objective.push_back(
          objective_value(context, c, config.lambda_nuclear, 0.0, w));
      diag.step_1.push_back(step);
      diag.max_iterate_asymmetry =
          std::max({diag.max_iterate_asymmetry, max_asymmetry(b),
                    max_asymmetry(c), max_asymmetry(z)});
    }

    if (primal < config.eps_primal && dual < config.eps_dual) {
      fit.converged = true;
      break;
    }
    if (balance_wait > 0) {
      --balance_wait;
    } else if (balance_pair(step, r, s, config.balancing)) {
      balance_wait = config.balancing.cooldown;
    }
  }

  fit.iterations_used = std::min(iter, config.max_iterations);
  fit.coefficient_matrix = c;
  fit.covariate_coefficients = recover_beta(context, c);
  fit.final_primal_residual = primal;
  fit.final_dual_residual = dual;
  fit.objective_value =
      objective_value(context, c, config.lambda_nuclear, 0.0, w);
  return fit;
}

SpinnerFit solve_lasso_only(const DesignContext& context,
                            const SpinnerConfig& config) {
  const Index p = context.p();
  config.check(p);
  if (!(config.lambda_lasso > 0.0) || config.lambda_nuclear != 0.0) {
    throw InvalidConfig(
        "solve_lasso_only needs lambda_lasso > 0 and lambda_nuclear = 0");
  }
  WeightMatrix default_weights;
  const WeightMatrix& w = effective_weights(config, p, default_weights);

  double step = config.initial_step_1;
  int balance_wait = 0;
  Matrix d = Matrix::Zero(p, p);
  Matrix z = Matrix::Zero(p, p);

  SpinnerFit fit;
  SolveDiagnostics& diag = fit.diagnostics;
  double primal = 0.0;
  double dual = 0.0;

  int iter = 0;
  for (iter = 1; iter <= config.max_iterations; ++iter) {
    const Matrix b = ridge_update(context, d + z / step, step);
    const Matrix d_new =
        weighted_soft_threshold(b - z / step, w, config.lambda_lasso / step);
    z += step * (d_new - b);

    const double r = (d_new - b).norm();
    const double s = (d_new - d).norm();
    primal = guarded_ratio(r, b.norm());
    dual = guarded_ratio(s, d.norm());
    d = d_new;

    if (config.record_history) {
      diag.primal_ratio_db.push_back(primal);
      diag.dual_ratio.push_back(dual);
      diag.objective.push_back(
          objective_value(context, d, 0.0, config.lambda_lasso, w));
      diag.step_1.push_back(step);
      diag.max_iterate_asymmetry =
          std::max({diag.max_iterate_asymmetry, max_asymmetry(b),
                    max_asymmetry(d), max_asymmetry(z)});
    }

    if (primal < config.eps_primal && dual < config.eps_dual) {
      fit.converged = true;
      break;
    }
    if (balance_wait > 0) {
      --balance_wait;
    } else if (balance_pair(step, r, s, config.balancing)) {
      balance_wait = config.balancing.cooldown;
    }
  }

  // The diagonal is unpenalized and carries no model information; report
  // the zero-diagonal representative.
  d.diagonal().setZero();

  fit.iterations_used = std::min(iter, config.max_iterations);
  fit.coefficient_matrix = d;
  fit.covariate_coefficients = recover_beta(context, d);
  fit.final_primal_residual = primal;
  fit.final_dual_residual = dual;
  fit.objective_value =
      objective_value(context, d, 0.0, config.lambda_lasso, w);
  return fit;
}

SpinnerFit solve_least_squares(const DesignContext& context) {
  const SvdCache& svd = context.svd_cache();
  Vector coeff = svd.u.transpose() * context.projected_response();
  const double cutoff = svd.d.size() > 0 ? 1e-12 * svd.d(0) : 0.0;
  for (Index i = 0; i < coeff.size(); ++i) {
    coeff(i) = svd.d(i) > cutoff ? coeff(i) / svd.d(i) : 0.0;
  }
  SpinnerFit fit;
  fit.coefficient_matrix = matrix_from_upper(svd.v * coeff, context.p());
  fit.covariate_coefficients = recover_beta(context, fit.coefficient_matrix);
  fit.converged = true;
  fit.objective_value =
      objective_value(context, fit.coefficient_matrix, 0.0, 0.0,
                      WeightMatrix::standard(context.p()));
  return fit;
}

SpinnerFit solve(const DesignContext& context, const SpinnerConfig& config) {
  config.check(context.p());
  const bool has_nuclear = config.lambda_nuclear > 0.0;
  const bool has_lasso = config.lambda_lasso > 0.0;
  if (has_nuclear && has_lasso) return solve_spinner(context, config);
  if (has_nuclear) return solve_nuclear_only(context, config);
  if (has_lasso) return solve_lasso_only(context, config);
  return solve_least_squares(context);
}

}  // namespace spinner
