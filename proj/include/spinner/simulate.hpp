#pragma once

#include "spinner/tuning.hpp"

namespace spinner {

/// Block-diagonal ground truth: constant blocks listed in order, an
/// implicit zero block filling the remaining p - sum(sizes) nodes, and a
/// zero diagonal (diagonal entries carry no signal since diag(A_i) = 0).
struct BlockSpec {
  struct Block {
    Index size = 0;
    double value = 0.0;
  };
  std::vector<Block> blocks;
  Index p = 0;

  void check() const;  // throws InvalidConfig
};

Matrix assemble_block_signal(const BlockSpec& spec);

/// Synthetic connectivity stack: upper-triangle entries i.i.d. N(0,1),
/// then each off-diagonal position standardized across the n subjects to
/// mean 0 and sample sd 1 (denominator n-1); symmetrized, zero diagonal.
std::vector<Matrix> generate_synthetic_matrices(Index p, Index n,
                                                std::uint64_t seed);

/// Standardizes an existing stack the same way (used for user-supplied
/// connectomes).
std::vector<Matrix> standardize_matrices(std::vector<Matrix> matrices);

/// y_i = <A_i, B> + eps_i with eps i.i.d. N(0, noise_sd^2).
Vector generate_responses(const std::vector<Matrix>& matrices,
                          const Matrix& b, double noise_sd,
                          std::uint64_t seed);

/// Relative squared error over off-diagonal entries only. Throws
/// ZeroTruth when the truth has no off-diagonal signal.
double mse_r(const Matrix& b_hat, const Matrix& b_true);

/// Best rank-k approximation of a symmetric matrix: top-k terms of the
/// eigendecomposition ordered by |eigenvalue|.
Matrix best_rank_k(const Matrix& b, int k);

enum class Method { spinner, nuclear, lasso };

const char* method_name(Method method);

struct ScenarioConfig {
  Index p = 60;
  Index n = 150;
  double signal_strength = 1.0;  // s in the default block layout
  double noise_sd = 0.1;
  int replicates = 10;
  std::uint64_t seed = 0;
  std::optional<BlockSpec> blocks;  // default: (8,1),(8,-s),(8,s), zeros
  int folds = 5;
  int threads = 0;
  /// Optional user-supplied connectivity stack (standardized in place of
  /// synthetic generation; only the responses are redrawn per replicate).
  std::optional<std::vector<Matrix>> matrix_stack;
  SpinnerConfig base;

  BlockSpec resolved_blocks() const;
};

struct ScenarioRow {
  int replicate = 0;
  Method method = Method::spinner;
  double mser = 0.0;
  double lambda_nuclear = 0.0;
  double lambda_lasso = 0.0;
};

struct ScenarioSummary {
  Method method = Method::spinner;
  double mean = 0.0;
  double ci_low = 0.0;   // mean -/+ 1.96 * sd / sqrt(replicates)
  double ci_high = 0.0;
};

struct ScenarioResult {
  std::vector<ScenarioRow> rows;
  std::vector<ScenarioSummary> summary;
};

/// One replicate: draw data, build folds shared by all methods, tune each
/// method on its own grid (2-D for spinner, the matching 1-D axis for
/// nuclear / lasso), refit, record MSEr. Per-replicate RNG streams are
/// derived from (seed, replicate), so results do not depend on execution
/// order.
ScenarioResult run_scenario(const ScenarioConfig& config,
                            const std::vector<Method>& methods);

}  // namespace spinner
