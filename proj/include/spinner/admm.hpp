#pragma once

#include "spinner/design.hpp"

namespace spinner {

/// Three-block ADMM for
///   min 1/2 ||y~ - A~ vec(B)||^2 + lambda_N ||C||_* + lambda_L ||vec(W o D)||_1
///   s.t. D = B, D = C.
/// Per iteration: a ridge update of B, singular value thresholding of C,
/// a weighted soft-threshold of D, dual ascent on Z1, Z2, then residual
/// balancing of the step sizes. Stops when
///   max(||C-B||, ||D-B||)_F / ||B||_F < eps_primal  and
///   ||D_new - D_old||_F / ||D_old||_F < eps_dual
/// (absolute tests when a denominator falls below 1e-12). The D block is
/// returned as the estimate: it carries the exact zeros produced by
/// soft-thresholding, and agrees with B and C within eps_primal.
///
/// Requires lambda_nuclear > 0 and lambda_lasso > 0; use solve() to
/// dispatch degenerate configurations. Running past max_iterations is not
/// an error: the fit comes back with converged = false.
SpinnerFit solve_spinner(const DesignContext& context,
                         const SpinnerConfig& config);

/// Two-block variant for lambda_lasso = 0: ridge update of B against
/// C + Z/step, then C = svt(B - Z/step, lambda_N/step). Returns C.
SpinnerFit solve_nuclear_only(const DesignContext& context,
                              const SpinnerConfig& config);

/// Two-block variant for lambda_nuclear = 0: ridge update of B against
/// D + Z/step, then D = soft-threshold(B - Z/step). Returns D with a zero
/// diagonal (the diagonal is unpenalized and unidentified, so the
/// zero-diagonal representative is reported).
SpinnerFit solve_lasso_only(const DesignContext& context,
                            const SpinnerConfig& config);

/// Unpenalized corner of the grid: minimum-norm least squares through the
/// cached SVD.
SpinnerFit solve_least_squares(const DesignContext& context);

/// Dispatches on the signs of the two penalties.
SpinnerFit solve(const DesignContext& context, const SpinnerConfig& config);

struct BalanceResiduals {
  double primal_1 = 0.0;  // ||D - B||_F, the constraint carried by Z1
  double primal_2 = 0.0;  // ||D - C||_F, the constraint carried by Z2
  double dual = 0.0;      // ||D_new - D_old||_F, shared by both pairs
};

/// One balancing pass over both (step, dual) pairs, applied after the
/// dual updates each iteration; a pair that just changed rests for
/// policy.cooldown iterations.
void balance_steps(AdmmState& state, const BalanceResiduals& residuals,
                   const BalancePolicy& policy);

/// Single-pair rule: step *= tau when the primal residual exceeds mu
/// times the dual residual, step /= tau in the opposite case, clamped to
/// [step_min, step_max]. The dual variable is not rescaled. Returns
/// whether the step changed.
bool balance_pair(double& step, double primal, double dual,
                  const BalancePolicy& policy);

}  // namespace spinner
