#include "spinner/simulate.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "spinner/rng.hpp"

namespace spinner {

void BlockSpec::check() const {
  if (p < 2) throw InvalidConfig("block spec needs p >= 2");
  Index total = 0;
  for (const Block& block : blocks) {
    if (block.size < 1) throw InvalidConfig("block sizes must be positive");
    total += block.size;
  }
  if (total > p) {
    std::ostringstream msg;
    msg << "blocks cover " << total << " nodes but p = " << p;
    throw InvalidConfig(msg.str());
  }
}

Matrix assemble_block_signal(const BlockSpec& spec) {
  spec.check();
  Matrix b = Matrix::Zero(spec.p, spec.p);
  Index offset = 0;
  for (const BlockSpec::Block& block : spec.blocks) {
    b.block(offset, offset, block.size, block.size).setConstant(block.value);
    offset += block.size;
  }
  b.diagonal().setZero();
  return b;
}

std::vector<Matrix> generate_synthetic_matrices(Index p, Index n,
                                                std::uint64_t seed) {
  if (p < 2) throw InvalidConfig("need p >= 2");
  if (n < 2) {
    throw InvalidConfig("need n >= 2: one subject cannot be standardized");
  }
  const Index q = p * (p - 1) / 2;
  Matrix draws(n, q);
  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < q; ++k) {
      draws(i, k) = rng.normal();
    }
  }
  // Each off-diagonal position is standardized across subjects to mean 0
  // and sample sd 1 (denominator n - 1).
  for (Index k = 0; k < q; ++k) {
    const double mean = draws.col(k).mean();
    draws.col(k).array() -= mean;
    const double sd =
        std::sqrt(draws.col(k).squaredNorm() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw DegenerateData("constant connectivity entry across subjects");
    }
    draws.col(k) /= sd;
  }
  std::vector<Matrix> matrices;
  matrices.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    matrices.push_back(matrix_from_upper(draws.row(i), p));
  }
  return matrices;
}

std::vector<Matrix> standardize_matrices(std::vector<Matrix> matrices) {
  const Index n = static_cast<Index>(matrices.size());
  if (n < 2) {
    throw InvalidConfig("need n >= 2: one subject cannot be standardized");
  }
  const Index p = matrices[0].rows();
  Matrix draws(n, p * (p - 1) / 2);
  for (Index i = 0; i < n; ++i) {
    const Matrix& a = matrices[static_cast<std::size_t>(i)];
    if (a.rows() != p || a.cols() != p) {
      throw DimensionMismatch("matrix stack dimensions differ");
    }
    draws.row(i) = upper_from_matrix(a);
  }
  for (Index k = 0; k < draws.cols(); ++k) {
    const double mean = draws.col(k).mean();
    draws.col(k).array() -= mean;
    const double sd =
        std::sqrt(draws.col(k).squaredNorm() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw DegenerateData("constant connectivity entry across subjects");
    }
    draws.col(k) /= sd;
  }
  for (Index i = 0; i < n; ++i) {
    matrices[static_cast<std::size_t>(i)] = matrix_from_upper(draws.row(i), p);
  }
  return matrices;
}

Vector generate_responses(const std::vector<Matrix>& matrices,
                          const Matrix& b, double noise_sd,
                          std::uint64_t seed) {
  if (noise_sd < 0.0) throw InvalidConfig("noise sd must be nonnegative");
  const Index n = static_cast<Index>(matrices.size());
  Vector y(n);
  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    const double signal =
        (matrices[static_cast<std::size_t>(i)].array() * b.array()).sum();
    y(i) = signal + noise_sd * rng.normal();
  }
  return y;
}

double mse_r(const Matrix& b_hat, const Matrix& b_true) {
  if (b_hat.rows() != b_true.rows() || b_hat.cols() != b_true.cols()) {
    throw DimensionMismatch("mse_r inputs have different shapes");
  }
  double num = 0.0;
  double den = 0.0;
  for (Index col = 0; col < b_true.cols(); ++col) {
    for (Index row = 0; row < b_true.rows(); ++row) {
      if (row == col) continue;
      const double diff = b_hat(row, col) - b_true(row, col);
      num += diff * diff;
      den += b_true(row, col) * b_true(row, col);
    }
  }
  if (!(den > 0.0)) {
    throw ZeroTruth("truth has no off-diagonal signal");
  }
  return num / den;
}

Matrix best_rank_k(const Matrix& b, int k) {
  if (k < 1) throw InvalidConfig("rank must be at least 1");
  const Index p = b.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig((b + b.transpose()) * 0.5);
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index c) {
    return std::abs(eig.eigenvalues()(a)) > std::abs(eig.eigenvalues()(c));
  });
  Matrix out = Matrix::Zero(p, p);
  const Index keep = std::min<Index>(k, p);
  for (Index t = 0; t < keep; ++t) {
    const Index i = order[static_cast<std::size_t>(t)];
    out.noalias() += eig.eigenvalues()(i) * eig.eigenvectors().col(i) *
                     eig.eigenvectors().col(i).transpose();
  }
  return ((out + out.transpose()) * 0.5).eval();
}

const char* method_name(Method method) {
  switch (method) {
    case Method::spinner:
      return "spinner";
    case Method::nuclear:
      return "nuclear";
    case Method::lasso:
      return "lasso";
  }
  return "unknown";
}

BlockSpec ScenarioConfig::resolved_blocks() const {
  if (blocks.has_value()) {
    BlockSpec spec = *blocks;
    if (spec.p == 0) spec.p = p;
    return spec;
  }
  BlockSpec spec;
  spec.p = p;
  spec.blocks = {{8, 1.0}, {8, -signal_strength}, {8, signal_strength}};
  return spec;
}

namespace {

struct BestCell {
  double lambda_nuclear = 0.0;
  double lambda_lasso = 0.0;
};

BestCell pick_best(const std::vector<std::pair<double, double>>& cells,
                   const Vector& errors) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const double err = errors(static_cast<Index>(i));
    const double best_err = errors(static_cast<Index>(best));
    const bool better =
        err < best_err ||
        (err == best_err &&
         (cells[i].first > cells[best].first ||
          (cells[i].first == cells[best].first &&
           cells[i].second > cells[best].second)));
    if (better) best = i;
  }
  return {cells[best].first, cells[best].second};
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config,
                            const std::vector<Method>& methods) {
  if (methods.empty()) throw InvalidConfig("no methods requested");
  if (config.replicates < 1) throw InvalidConfig("need replicates >= 1");
  const BlockSpec spec = config.resolved_blocks();
  spec.check();
  if (spec.p != config.p) {
    throw InvalidConfig("block spec dimension does not match p");
  }
  const Matrix b_true = assemble_block_signal(spec);

  std::optional<std::vector<Matrix>> shared_stack;
  if (config.matrix_stack.has_value()) {
    if (static_cast<Index>(config.matrix_stack->size()) != config.n) {
      throw InvalidConfig("matrix stack size does not match n");
    }
    shared_stack = standardize_matrices(*config.matrix_stack);
  }

  ScenarioResult result;
  for (int r = 0; r < config.replicates; ++r) {
    const std::vector<Matrix> matrices =
        shared_stack.has_value()
            ? *shared_stack
            : generate_synthetic_matrices(config.p, config.n,
                                          mix_seed(config.seed, r, 1));
    const Vector y = generate_responses(matrices, b_true, config.noise_sd,
                                        mix_seed(config.seed, r, 2));
    const ConnectivityDataset dataset = ConnectivityDataset::validate(
        matrices, y, std::nullopt);
    // Fold membership is shared across methods within a replicate.
    const std::vector<int> folds =
        make_folds(config.n, config.folds, mix_seed(config.seed, r, 3));

    const DesignContext context(dataset);
    const LambdaGrid grid = build_grid(context);

    for (Method method : methods) {
      std::vector<std::pair<double, double>> cells;
      if (method == Method::spinner) {
        for (double ln : grid.nuclear_values) {
          for (double ll : grid.lasso_values) cells.emplace_back(ln, ll);
        }
      } else if (method == Method::nuclear) {
        for (double ln : grid.nuclear_values) cells.emplace_back(ln, 0.0);
      } else {
        for (double ll : grid.lasso_values) cells.emplace_back(0.0, ll);
      }

      SpinnerConfig base = config.base;
      base.record_history = false;
      const Vector errors =
          cv_score_cells(dataset, cells, folds, base, config.threads);
      const BestCell best = pick_best(cells, errors);

      SpinnerConfig refit = base;
      refit.lambda_nuclear = best.lambda_nuclear;
      refit.lambda_lasso = best.lambda_lasso;
      const SpinnerFit fit = solve(context, refit);

      result.rows.push_back({r, method,
                             mse_r(fit.coefficient_matrix, b_true),
                             best.lambda_nuclear, best.lambda_lasso});
    }
  }

  for (Method method : methods) {
    std::vector<double> values;
    for (const ScenarioRow& row : result.rows) {
      if (row.method == method) values.push_back(row.mser);
    }
    const double count = static_cast<double>(values.size());
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / count;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = count > 1 ? std::sqrt(var / (count - 1.0)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(count);
    result.summary.push_back({method, mean, mean - half, mean + half});
  }
  return result;
}

}  // namespace spinner
