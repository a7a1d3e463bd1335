#pragma once

#include <filesystem>

#include "spinner/simulate.hpp"

namespace spinner {

// CSV conventions: comma-separated, no header, LF line endings, doubles
// serialized with 17 significant digits so reloads are lossless.

Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

/// One value per line.
Vector read_vector_csv(const std::filesystem::path& path);
void write_vector_csv(const std::filesystem::path& path, const Vector& v);

struct DatasetManifest {
  struct Subject {
    std::string id;
    std::string matrix_path;
  };
  std::vector<Subject> subjects;
  std::string response_path;
  std::optional<std::string> covariates_path;
  ValidateOptions options;
  /// True when the manifest asks for an intercept but supplies no
  /// covariates file: the model gets a lone column of ones.
  bool intercept_only = false;

  static DatasetManifest parse(const std::filesystem::path& path);
};

/// Loads every file referenced by the manifest (paths resolve relative to
/// the manifest's directory), applies the options and validates.
ConnectivityDataset load_manifest(const std::filesystem::path& path);

/// Node permutation for cluster-by-cluster display. permutation[t] is the
/// node shown at position t; cluster_labels[node] is 1-based, 0 for
/// unassigned nodes.
struct NodeOrdering {
  std::vector<int> permutation;
  std::vector<int> cluster_labels;
};

/// Groups nodes by the top-k eigenvectors of a symmetric estimate: node i
/// joins cluster j* = argmax_j |v_j(i)| when that magnitude exceeds
/// magnitude_threshold times the largest entry of v_{j*}; clusters are
/// ordered by singular value, unassigned nodes go last.
NodeOrdering reorder_nodes(const Matrix& b, int k, double magnitude_threshold);

// --- Command layer (shared by the CLI binary and tests) ----------------

// Exit codes: 0 success, 2 validation error, 3 parse error, 4 solver
// finished unconverged (outputs still written).
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitParse = 3;
inline constexpr int kExitUnconverged = 4;

struct FitArgs {
  std::filesystem::path manifest;
  double lambda_nuclear = 0.0;
  double lambda_lasso = 0.0;
  std::optional<std::filesystem::path> weights;
  std::filesystem::path out_dir;
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  int max_iterations = 5000;
};

struct CvArgs {
  std::filesystem::path manifest;
  int folds = 5;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  int threads = 0;
};

struct SimulateArgs {
  std::filesystem::path config;
  std::vector<std::string> methods;  // names among spinner, nuclear, lasso
  std::filesystem::path out_dir;
  int threads = 0;
};

struct ReorderArgs {
  std::filesystem::path matrix;
  int k = 6;
  double threshold = 0.3;
  std::filesystem::path out_dir;
};

struct RankApproxArgs {
  std::filesystem::path matrix;
  int k = 1;
  std::filesystem::path out_dir;
};

/// Writes B_hat.csv, beta_hat.csv and diagnostics.json.
int cmd_fit(const FitArgs& args);
/// Writes cv_errors.csv (with axis headers), best_pair.json and the refit
/// B_hat.csv / beta_hat.csv / diagnostics.json.
int cmd_cv(const CvArgs& args);
/// Writes mser_table.csv and summary.csv.
int cmd_simulate(const SimulateArgs& args);
/// Writes node_ordering.csv and B_reordered.csv.
int cmd_reorder(const ReorderArgs& args);
/// Writes rank_approx.csv.
int cmd_rankapprox(const RankApproxArgs& args);

}  // namespace spinner
