#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinner {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Input tolerances: strict enough to catch data errors, loose enough for
// round-tripped CSV.
inline constexpr double kSymmetryTol = 1e-8;
inline constexpr double kDiagonalTol = 1e-8;

// --- Errors -----------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when input data violate a model assumption.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AsymmetryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonzeroDiagonal : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RankDeficientCovariates : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Degenerate inputs for tuning (e.g. a projected response of zero, which
/// collapses the lambda grid).
class DegenerateData : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// mse_r against a truth whose off-diagonal part is identically zero.
class ZeroTruth : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidConfig : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// File-format error carrying file and line context.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, long line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}
  const std::string& file() const { return file_; }
  long line() const { return line_; }

 private:
  std::string file_;
  long line_;
};

// --- Weight matrix ----------------------------------------------------

/// Nonnegative symmetric penalty weights W for the entrywise l1 term.
/// The standard choice has zeros on the diagonal and ones off-diagonal,
/// so diagonal entries are never l1-shrunk.
struct WeightMatrix {
  Matrix entries;

  static WeightMatrix standard(Index p);
  /// Validates symmetry (within 1e-8) and nonnegativity.
  static WeightMatrix from_matrix(Matrix w);

  Index size() const { return entries.rows(); }
};

// --- Dataset ----------------------------------------------------------

struct ValidateOptions {
  bool symmetrize = false;     // replace A with (A + A^T)/2 instead of erroring
  bool zero_diagonal = false;  // coerce any diagonal, not just |.| <= 1e-8
  bool add_intercept = true;   // prepend a ones column to supplied covariates
};

/// n symmetric p x p zero-diagonal predictor matrices, a response of
/// length n and an optional full-column-rank covariate matrix. Instances
/// are immutable after construction and safe to share across workers.
class ConnectivityDataset {
 public:
  static ConnectivityDataset validate(std::vector<Matrix> matrices,
                                      Vector response,
                                      std::optional<Matrix> covariates,
                                      const ValidateOptions& options = {});

  const std::vector<Matrix>& matrices() const { return matrices_; }
  const Vector& response() const { return response_; }
  /// n x m; zero columns when the model has no covariates.
  const Matrix& covariates() const { return covariates_; }
  bool has_covariates() const { return covariates_.cols() > 0; }

  Index n() const { return static_cast<Index>(matrices_.size()); }
  Index p() const { return matrices_.empty() ? 0 : matrices_[0].rows(); }
  Index m() const { return covariates_.cols(); }

  /// Row subset (already-validated data keeps its invariants).
  ConnectivityDataset subset(const std::vector<int>& indices) const;

  bool operator==(const ConnectivityDataset& other) const;

 private:
  ConnectivityDataset(std::vector<Matrix> matrices, Vector response,
                      Matrix covariates)
      : matrices_(std::move(matrices)),
        response_(std::move(response)),
        covariates_(std::move(covariates)) {}

  std::vector<Matrix> matrices_;
  Vector response_;
  Matrix covariates_;
};

// --- Solver configuration ---------------------------------------------

/// Residual-balancing policy: a step size is scaled by tau when its primal
/// residual exceeds mu times the dual residual (and vice versa), clamped
/// to [step_min, step_max]. After a change the pair rests for `cooldown`
/// iterations so the iteration can absorb the kick; without the rest the
/// near-converged regime turns into a self-sustaining oscillation.
struct BalancePolicy {
  double mu = 10.0;
  double tau = 2.0;
  double step_min = 1e-6;
  double step_max = 1e6;
  int cooldown = 10;
  bool enabled = true;
};

struct SpinnerConfig {
  double lambda_nuclear = 0.0;  // nuclear-norm penalty weight
  double lambda_lasso = 0.0;    // entrywise l1 penalty weight
  std::optional<WeightMatrix> weights;  // default: WeightMatrix::standard(p)
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  int max_iterations = 5000;
  double initial_step_1 = 1.0;
  double initial_step_2 = 1.0;
  BalancePolicy balancing;
  /// Per-iteration history (residual ratios, objective, steps) is kept only
  /// when set; cross-validation turns it off to avoid the extra
  /// decompositions behind the objective trace.
  bool record_history = true;

  /// Throws InvalidConfig; p is the problem dimension the weights must match.
  void check(Index p) const;
};

// --- Results ----------------------------------------------------------

struct SolveDiagnostics {
  // Per-iteration traces, filled when record_history is set. Two-block
  // solvers fill only the ratio that exists for them.
  std::vector<double> primal_ratio_cb;  // ||C - B||_F / ||B||_F
  std::vector<double> primal_ratio_db;  // ||D - B||_F / ||B||_F
  std::vector<double> dual_ratio;       // ||D_new - D_old||_F / ||D_old||_F
  std::vector<double> objective;
  std::vector<double> step_1;
  std::vector<double> step_2;
  /// Largest entrywise asymmetry seen in any iterate (history runs only).
  double max_iterate_asymmetry = 0.0;
};

struct SpinnerFit {
  Matrix coefficient_matrix;       // symmetric p x p estimate
  Vector covariate_coefficients;   // length m (empty without covariates)
  int iterations_used = 0;
  double final_primal_residual = 0.0;
  double final_dual_residual = 0.0;
  double objective_value = 0.0;
  bool converged = false;
  SolveDiagnostics diagnostics;
};

/// Primal blocks, duals and step sizes of the three-block splitting.
/// Owned by a single solve; never shared.
struct AdmmState {
  Matrix B, C, D;
  Matrix Z1, Z2;
  double step_1 = 1.0;
  double step_2 = 1.0;
  // Iterations each pair still has to wait before its next balance event.
  int balance_wait_1 = 0;
  int balance_wait_2 = 0;

  static AdmmState zero(Index p, double step_1, double step_2);
};

}  // namespace spinner
