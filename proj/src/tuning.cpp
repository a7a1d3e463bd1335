#include "spinner/tuning.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "spinner/parallel.hpp"
#include "spinner/rng.hpp"

namespace spinner {

double lambda_max_lasso(const DesignContext& context) {
  const Vector gradient =
      context.projected_upper_design().transpose() *
      context.projected_response();
  const double value =
      gradient.size() > 0 ? gradient.cwiseAbs().maxCoeff() : 0.0;
  if (!(value > 0.0)) {
    throw DegenerateData(
        "projected response carries no signal; the lasso grid collapses");
  }
  return value;
}

double lambda_max_nuclear(const DesignContext& context) {
  // -grad f(0) assembled as sum_i y~_i A_i; symmetric, so the spectral
  // norm is the largest |eigenvalue|.
  const Index p = context.p();
  const Vector g =
      context.stacked_design().transpose() * context.projected_response();
  const Matrix gradient = Eigen::Map<const Matrix>(g.data(), p, p);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gradient,
                                            Eigen::EigenvaluesOnly);
  const double value = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(value > 0.0)) {
    throw DegenerateData(
        "projected response carries no signal; the nuclear grid collapses");
  }
  return value;
}

namespace {

std::vector<double> grid_axis(double lambda_max) {
  // {0} then 14 values log-spaced over three decades up to lambda_max.
  std::vector<double> axis(kGridAxisSize);
  axis[0] = 0.0;
  for (int j = 0; j < kGridAxisSize - 1; ++j) {
    axis[static_cast<std::size_t>(j) + 1] =
        lambda_max * std::pow(10.0, -3.0 * (13 - j) / 13.0);
  }
  axis[kGridAxisSize - 1] = lambda_max;
  return axis;
}

}  // namespace

LambdaGrid build_grid(const DesignContext& context) {
  LambdaGrid grid;
  grid.nuclear_values = grid_axis(lambda_max_nuclear(context));
  grid.lasso_values = grid_axis(lambda_max_lasso(context));
  return grid;
}

std::vector<int> make_folds(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidConfig("need at least 2 folds");
  if (n < folds) {
    std::ostringstream msg;
    msg << "cannot split " << n << " observations into " << folds
        << " folds";
    throw InvalidConfig(msg.str());
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x464f4c44ULL));
  shuffle(order, rng);

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  const Index base = n / folds;
  const Index remainder = n % folds;
  std::size_t pos = 0;
  for (int f = 0; f < folds; ++f) {
    const Index size = base + (f < remainder ? 1 : 0);
    for (Index s = 0; s < size; ++s) {
      assignment[static_cast<std::size_t>(order[pos++])] = f;
    }
  }
  return assignment;
}

namespace {

double frobenius_inner(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace

Vector cv_score_cells(const ConnectivityDataset& dataset,
                      const std::vector<std::pair<double, double>>& cells,
                      const std::vector<int>& fold_assignment,
                      const SpinnerConfig& base, int threads,
                      std::vector<UnconvergedCell>* unconverged) {
  const Index n = dataset.n();
  if (static_cast<Index>(fold_assignment.size()) != n) {
    throw DimensionMismatch("fold assignment length does not match n");
  }
  const int folds =
      1 + *std::max_element(fold_assignment.begin(), fold_assignment.end());
  if (folds < 2) throw InvalidConfig("need at least 2 folds");

  std::vector<std::vector<int>> train_idx(static_cast<std::size_t>(folds));
  std::vector<std::vector<int>> test_idx(static_cast<std::size_t>(folds));
  for (Index i = 0; i < n; ++i) {
    const int f = fold_assignment[static_cast<std::size_t>(i)];
    if (f < 0 || f >= folds) throw InvalidConfig("fold index out of range");
    for (int g = 0; g < folds; ++g) {
      (g == f ? test_idx : train_idx)[static_cast<std::size_t>(g)].push_back(
          static_cast<int>(i));
    }
  }
  for (int f = 0; f < folds; ++f) {
    if (test_idx[static_cast<std::size_t>(f)].empty() ||
        train_idx[static_cast<std::size_t>(f)].empty()) {
      throw InvalidConfig("every fold needs both training and test rows");
    }
  }

  // One design (and SVD) per training split, shared by every cell.
  std::vector<std::unique_ptr<DesignContext>> contexts(
      static_cast<std::size_t>(folds));
  parallel_for(0, folds, threads, [&](int f) {
    contexts[static_cast<std::size_t>(f)] = std::make_unique<DesignContext>(
        dataset.subset(train_idx[static_cast<std::size_t>(f)]));
  });

  const int cell_count = static_cast<int>(cells.size());
  Matrix errors = Matrix::Zero(cell_count, folds);
  std::vector<std::uint8_t> flags(
      static_cast<std::size_t>(cell_count * folds), 0);

  parallel_for(0, cell_count * folds, threads, [&](int task) {
    const int cell = task / folds;
    const int fold = task % folds;
    SpinnerConfig config = base;
    config.lambda_nuclear = cells[static_cast<std::size_t>(cell)].first;
    config.lambda_lasso = cells[static_cast<std::size_t>(cell)].second;
    config.record_history = false;

    const DesignContext& ctx = *contexts[static_cast<std::size_t>(fold)];
    const SpinnerFit fit = solve(ctx, config);

    double sum = 0.0;
    for (int i : test_idx[static_cast<std::size_t>(fold)]) {
      double prediction = frobenius_inner(
          dataset.matrices()[static_cast<std::size_t>(i)],
          fit.coefficient_matrix);
      if (dataset.has_covariates()) {
        prediction +=
            dataset.covariates().row(i).dot(fit.covariate_coefficients);
      }
      const double residual = dataset.response()(i) - prediction;
      sum += residual * residual;
    }
    errors(cell, fold) =
        sum / static_cast<double>(test_idx[static_cast<std::size_t>(fold)]
                                      .size());
    if (!fit.converged) flags[static_cast<std::size_t>(task)] = 1;
  });

  if (unconverged != nullptr) {
    for (int cell = 0; cell < cell_count; ++cell) {
      for (int fold = 0; fold < folds; ++fold) {
        if (flags[static_cast<std::size_t>(cell * folds + fold)]) {
          unconverged->push_back(
              {cell, fold, cells[static_cast<std::size_t>(cell)].first,
               cells[static_cast<std::size_t>(cell)].second});
        }
      }
    }
  }
  return errors.rowwise().mean();
}

CvResult cross_validate(const ConnectivityDataset& dataset,
                        const LambdaGrid& grid, const CvOptions& options) {
  const int rows = static_cast<int>(grid.nuclear_values.size());
  const int cols = static_cast<int>(grid.lasso_values.size());
  if (rows == 0 || cols == 0) throw InvalidConfig("empty lambda grid");

  CvResult result;
  result.grid = grid;
  result.fold_assignment = make_folds(dataset.n(), options.folds,
                                      options.seed);

  std::vector<std::pair<double, double>> cells;
  cells.reserve(static_cast<std::size_t>(rows * cols));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      cells.emplace_back(grid.nuclear_values[static_cast<std::size_t>(i)],
                         grid.lasso_values[static_cast<std::size_t>(j)]);
    }
  }
  const Vector flat =
      cv_score_cells(dataset, cells, result.fold_assignment, options.base,
                     options.threads, &result.unconverged);

  result.errors.resize(rows, cols);
  int best_row = 0, best_col = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double err = flat(i * cols + j);
      result.errors(i, j) = err;
      const double ln = grid.nuclear_values[static_cast<std::size_t>(i)];
      const double ll = grid.lasso_values[static_cast<std::size_t>(j)];
      const double bn =
          grid.nuclear_values[static_cast<std::size_t>(best_row)];
      const double bl =
          grid.lasso_values[static_cast<std::size_t>(best_col)];
      // Ties go to the sparser / lower-rank corner: larger lambda_N,
      // then larger lambda_L.
      const bool better =
          err < best_err ||
          (err == best_err && (ln > bn || (ln == bn && ll > bl)));
      if (better) {
        best_err = err;
        best_row = i;
        best_col = j;
      }
    }
  }
  result.best_row = best_row;
  result.best_col = best_col;
  result.best_lambda_nuclear =
      grid.nuclear_values[static_cast<std::size_t>(best_row)];
  result.best_lambda_lasso =
      grid.lasso_values[static_cast<std::size_t>(best_col)];

  SpinnerConfig refit_config = options.base;
  refit_config.lambda_nuclear = result.best_lambda_nuclear;
  refit_config.lambda_lasso = result.best_lambda_lasso;
  const DesignContext context(dataset);
  result.refit = solve(context, refit_config);
  return result;
}

}  // namespace spinner
