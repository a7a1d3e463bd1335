#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "spinner/admm.hpp"

namespace spinner {

/// 15 values per axis: {0} followed by 14 log-spaced values running from
/// lambda_max * 1e-3 up to lambda_max.
struct LambdaGrid {
  std::vector<double> nuclear_values;
  std::vector<double> lasso_values;
};

inline constexpr int kGridAxisSize = 15;

/// Smallest lambda_lasso with B = 0 when lambda_nuclear = 0:
/// || (H A_U)^T y~ ||_inf. Throws DegenerateData when the critical value
/// is zero (y~ = 0 collapses the grid).
double lambda_max_lasso(const DesignContext& context);

/// Smallest lambda_nuclear with B = 0 when lambda_lasso = 0: the spectral
/// norm of sum_i y~_i A_i, i.e. ||grad f(0)||_2.
double lambda_max_nuclear(const DesignContext& context);

LambdaGrid build_grid(const DesignContext& context);

/// Deterministic fold assignment: contiguous blocks of a seeded
/// permutation; sizes differ by at most one.
std::vector<int> make_folds(Index n, int folds, std::uint64_t seed);

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  SpinnerConfig base;  // lambda fields are overwritten per cell
};

/// (nuclear index, lasso index, fold) of a cell whose solve hit
/// max_iterations; such cells are scored by their returned iterate.
struct UnconvergedCell {
  int cell = 0;
  int fold = 0;
  double lambda_nuclear = 0.0;
  double lambda_lasso = 0.0;
};

struct CvResult {
  LambdaGrid grid;
  Matrix errors;  // 15 x 15, rows = nuclear axis, cols = lasso axis
  double best_lambda_nuclear = 0.0;
  double best_lambda_lasso = 0.0;
  int best_row = 0;
  int best_col = 0;
  std::vector<int> fold_assignment;
  SpinnerFit refit;
  std::vector<UnconvergedCell> unconverged;
};

/// Mean cross-validated squared prediction error for explicit
/// (lambda_nuclear, lambda_lasso) cells under an explicit fold
/// assignment. The design (and its SVD) is rebuilt once per training
/// split and shared by every cell. Results are reduced by cell index, so
/// the output is independent of scheduling.
Vector cv_score_cells(const ConnectivityDataset& dataset,
                      const std::vector<std::pair<double, double>>& cells,
                      const std::vector<int>& fold_assignment,
                      const SpinnerConfig& base, int threads,
                      std::vector<UnconvergedCell>* unconverged = nullptr);

/// Full-grid cross-validation: scores all 225 cells, picks the minimizing
/// pair (ties broken toward larger lambda_N, then larger lambda_L) and
/// refits on the full data.
CvResult cross_validate(const ConnectivityDataset& dataset,
                        const LambdaGrid& grid, const CvOptions& options);

}  // namespace spinner
