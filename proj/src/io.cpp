#include "spinner/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spinner/version.hpp"

namespace spinner {

namespace {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& token,
                    const std::filesystem::path& path, long line) {
  const std::string t = trim(token);
  if (t.empty()) throw ParseError(path.string(), line, "empty field");
  char* end = nullptr;
  const double value = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) {
    throw ParseError(path.string(), line, "bad number '" + t + "'");
  }
  return value;
}

std::vector<std::vector<double>> read_table(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      row.push_back(parse_double(token, path, line_no));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      std::ostringstream msg;
      msg << "row has " << row.size() << " fields, expected "
          << rows.front().size();
      throw ParseError(path.string(), line_no, msg.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string(), 0, "file is empty");
  return rows;
}

void open_output(std::ofstream& out, const std::filesystem::path& path) {
  out.open(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = read_table(path);
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out;
  open_output(out, path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Vector read_vector_csv(const std::filesystem::path& path) {
  const auto rows = read_table(path);
  if (rows.front().size() != 1) {
    throw ParseError(path.string(), 1, "expected one value per line");
  }
  Vector v(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    v(static_cast<Index>(i)) = rows[i][0];
  }
  return v;
}

void write_vector_csv(const std::filesystem::path& path, const Vector& v) {
  std::ofstream out;
  open_output(out, path);
  for (Index i = 0; i < v.size(); ++i) {
    out << format_double(v(i)) << '\n';
  }
}

DatasetManifest DatasetManifest::parse(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open manifest");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }

  DatasetManifest manifest;
  try {
    for (const auto& subject : doc.at("subjects")) {
      manifest.subjects.push_back({subject.at("id").get<std::string>(),
                                   subject.at("matrix_path")
                                       .get<std::string>()});
    }
    manifest.response_path = doc.at("response_path").get<std::string>();
    if (doc.contains("covariates_path") &&
        !doc["covariates_path"].is_null()) {
      manifest.covariates_path = doc["covariates_path"].get<std::string>();
    }
    if (doc.contains("options")) {
      const auto& options = doc["options"];
      manifest.options.symmetrize = options.value("symmetrize", false);
      manifest.options.zero_diagonal =
          options.value("zero_diagonal", false);
      manifest.options.add_intercept = options.value("intercept", true);
      // An explicit intercept request without covariates means an
      // intercept-only model.
      manifest.intercept_only = !manifest.covariates_path.has_value() &&
                                options.contains("intercept") &&
                                options["intercept"].get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }

  if (manifest.subjects.empty()) {
    throw ParseError(path.string(), 0, "manifest lists no subjects");
  }
  std::set<std::string> ids;
  for (const auto& subject : manifest.subjects) {
    if (!ids.insert(subject.id).second) {
      throw ParseError(path.string(), 0,
                       "duplicate subject id '" + subject.id + "'");
    }
  }
  return manifest;
}

ConnectivityDataset load_manifest(const std::filesystem::path& path) {
  const DatasetManifest manifest = DatasetManifest::parse(path);
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  std::vector<Matrix> matrices;
  matrices.reserve(manifest.subjects.size());
  Index p = 0;
  for (const auto& subject : manifest.subjects) {
    Matrix a = read_matrix_csv(resolve(subject.matrix_path));
    // Per-subject checks give the error the subject id; the dataset-level
    // validation below re-checks the rest.
    if (a.rows() != a.cols()) {
      throw DimensionMismatch("subject '" + subject.id +
                              "': matrix is not square");
    }
    if (p == 0) p = a.rows();
    if (a.rows() != p) {
      throw DimensionMismatch("subject '" + subject.id +
                              "': matrix dimension differs from the others");
    }
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol && !manifest.options.symmetrize) {
      std::ostringstream msg;
      msg << "subject '" << subject.id << "': asymmetry " << asym
          << " exceeds " << kSymmetryTol;
      throw AsymmetryError(msg.str());
    }
    const double diag = a.diagonal().cwiseAbs().maxCoeff();
    if (diag > kDiagonalTol && !manifest.options.zero_diagonal) {
      std::ostringstream msg;
      msg << "subject '" << subject.id << "': diagonal magnitude " << diag;
      throw NonzeroDiagonal(msg.str());
    }
    matrices.push_back(std::move(a));
  }

  const Vector response = read_vector_csv(resolve(manifest.response_path));
  std::optional<Matrix> covariates;
  if (manifest.covariates_path.has_value()) {
    covariates = read_matrix_csv(resolve(*manifest.covariates_path));
  } else if (manifest.intercept_only) {
    covariates = Matrix(response.size(), 0);
  }
  return ConnectivityDataset::validate(std::move(matrices), response,
                                       covariates, manifest.options);
}

NodeOrdering reorder_nodes(const Matrix& b, int k,
                           double magnitude_threshold) {
  const Index p = b.rows();
  if (b.cols() != p) throw DimensionMismatch("matrix must be square");
  if (k < 1 || k > p) throw InvalidConfig("need 1 <= k <= p");
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw AsymmetryError("matrix must be symmetric for node reordering");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig((b + b.transpose()) * 0.5);
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index c) {
    return std::abs(eig.eigenvalues()(a)) > std::abs(eig.eigenvalues()(c));
  });

  const double sigma_max = std::abs(eig.eigenvalues()(order[0]));
  std::vector<Vector> vectors;
  for (int j = 0; j < k; ++j) {
    const Index idx = order[static_cast<std::size_t>(j)];
    // Negligible singular values do not define clusters (all-zero input
    // leaves every node unassigned).
    if (std::abs(eig.eigenvalues()(idx)) <= 1e-12 * sigma_max ||
        sigma_max == 0.0) {
      break;
    }
    vectors.push_back(eig.eigenvectors().col(idx));
  }

  NodeOrdering ordering;
  ordering.cluster_labels.assign(static_cast<std::size_t>(p), 0);
  for (Index node = 0; node < p; ++node) {
    int best = -1;
    double best_mag = 0.0;
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      const double mag = std::abs(vectors[j](node));
      if (mag > best_mag) {
        best_mag = mag;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      const double peak =
          vectors[static_cast<std::size_t>(best)].cwiseAbs().maxCoeff();
      if (best_mag > magnitude_threshold * peak) {
        ordering.cluster_labels[static_cast<std::size_t>(node)] = best + 1;
      }
    }
  }

  // Cluster by cluster (clusters ordered by singular value), unassigned
  // nodes last; within a cluster by descending loading.
  ordering.permutation.reserve(static_cast<std::size_t>(p));
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    std::vector<int> members;
    for (Index node = 0; node < p; ++node) {
      if (ordering.cluster_labels[static_cast<std::size_t>(node)] ==
          static_cast<int>(j) + 1) {
        members.push_back(static_cast<int>(node));
      }
    }
    std::sort(members.begin(), members.end(), [&](int a, int c) {
      const double ma = std::abs(vectors[j](a));
      const double mc = std::abs(vectors[j](c));
      if (ma != mc) return ma > mc;
      return a < c;
    });
    ordering.permutation.insert(ordering.permutation.end(),
                                members.begin(), members.end());
  }
  for (Index node = 0; node < p; ++node) {
    if (ordering.cluster_labels[static_cast<std::size_t>(node)] == 0) {
      ordering.permutation.push_back(static_cast<int>(node));
    }
  }
  return ordering;
}

// --- Command layer ------------------------------------------------------

namespace {

nlohmann::json config_json(const SpinnerConfig& config) {
  return {
      {"lambda_nuclear", config.lambda_nuclear},
      {"lambda_lasso", config.lambda_lasso},
      {"eps_primal", config.eps_primal},
      {"eps_dual", config.eps_dual},
      {"max_iterations", config.max_iterations},
      {"initial_step_1", config.initial_step_1},
      {"initial_step_2", config.initial_step_2},
      {"balancing",
       {{"mu", config.balancing.mu},
        {"tau", config.balancing.tau},
        {"step_min", config.balancing.step_min},
        {"step_max", config.balancing.step_max},
        {"cooldown", config.balancing.cooldown},
        {"enabled", config.balancing.enabled}}},
  };
}

void write_json(const std::filesystem::path& path,
                const nlohmann::json& doc) {
  std::ofstream out;
  open_output(out, path);
  out << doc.dump(2) << '\n';
}

void write_fit_outputs(const std::filesystem::path& dir,
                       const SpinnerFit& fit, const SpinnerConfig& config) {
  write_matrix_csv(dir / "B_hat.csv", fit.coefficient_matrix);
  write_vector_csv(dir / "beta_hat.csv", fit.covariate_coefficients);
  nlohmann::json doc = {
      {"software", {{"name", "spinner"}, {"version", kVersion}}},
      {"config", config_json(config)},
      {"iterations", fit.iterations_used},
      {"converged", fit.converged},
      {"final_primal_residual", fit.final_primal_residual},
      {"final_dual_residual", fit.final_dual_residual},
      {"objective", fit.objective_value},
      {"residual_history",
       {{"primal_cb", fit.diagnostics.primal_ratio_cb},
        {"primal_db", fit.diagnostics.primal_ratio_db},
        {"dual", fit.diagnostics.dual_ratio}}},
      {"objective_history", fit.diagnostics.objective},
      {"step_history",
       {{"step_1", fit.diagnostics.step_1},
        {"step_2", fit.diagnostics.step_2}}},
  };
  write_json(dir / "diagnostics.json", doc);
}

}  // namespace

int cmd_fit(const FitArgs& args) {
  const ConnectivityDataset dataset = load_manifest(args.manifest);
  const DesignContext context(dataset);

  SpinnerConfig config;
  config.lambda_nuclear = args.lambda_nuclear;
  config.lambda_lasso = args.lambda_lasso;
  config.eps_primal = args.eps_primal;
  config.eps_dual = args.eps_dual;
  config.max_iterations = args.max_iterations;
  if (args.weights.has_value()) {
    config.weights = WeightMatrix::from_matrix(read_matrix_csv(*args.weights));
  }

  const SpinnerFit fit = solve(context, config);
  std::filesystem::create_directories(args.out_dir);
  write_fit_outputs(args.out_dir, fit, config);
  return fit.converged ? kExitOk : kExitUnconverged;
}

int cmd_cv(const CvArgs& args) {
  const ConnectivityDataset dataset = load_manifest(args.manifest);
  const DesignContext context(dataset);
  const LambdaGrid grid = build_grid(context);

  CvOptions options;
  options.folds = args.folds;
  options.seed = args.seed;
  options.threads = args.threads;
  const CvResult result = cross_validate(dataset, grid, options);

  std::filesystem::create_directories(args.out_dir);

  {
    std::ofstream out;
    open_output(out, args.out_dir / "cv_errors.csv");
    out << "lambda_nuclear\\lambda_lasso";
    for (double ll : grid.lasso_values) out << ',' << format_double(ll);
    out << '\n';
    for (Index i = 0; i < result.errors.rows(); ++i) {
      out << format_double(grid.nuclear_values[static_cast<std::size_t>(i)]);
      for (Index j = 0; j < result.errors.cols(); ++j) {
        out << ',' << format_double(result.errors(i, j));
      }
      out << '\n';
    }
  }

  nlohmann::json unconverged = nlohmann::json::array();
  for (const UnconvergedCell& cell : result.unconverged) {
    unconverged.push_back({{"cell", cell.cell},
                           {"fold", cell.fold},
                           {"lambda_nuclear", cell.lambda_nuclear},
                           {"lambda_lasso", cell.lambda_lasso}});
  }
  write_json(args.out_dir / "best_pair.json",
             {{"lambda_nuclear", result.best_lambda_nuclear},
              {"lambda_lasso", result.best_lambda_lasso},
              {"row", result.best_row},
              {"col", result.best_col},
              {"cv_error", result.errors(result.best_row, result.best_col)},
              {"folds", args.folds},
              {"seed", args.seed},
              {"unconverged_cells", unconverged}});

  SpinnerConfig refit_config = options.base;
  refit_config.lambda_nuclear = result.best_lambda_nuclear;
  refit_config.lambda_lasso = result.best_lambda_lasso;
  write_fit_outputs(args.out_dir, result.refit, refit_config);
  return result.refit.converged ? kExitOk : kExitUnconverged;
}

namespace {

ScenarioConfig parse_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open config");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }

  ScenarioConfig config;
  try {
    config.p = doc.value("p", 60);
    config.n = doc.value("n", 150);
    config.signal_strength = doc.value("signal_strength", 1.0);
    config.noise_sd = doc.value("noise_sd", 0.1);
    config.replicates = doc.value("replicates", 10);
    config.seed = doc.value("seed", std::uint64_t{0});
    config.folds = doc.value("folds", 5);
    if (doc.contains("blocks")) {
      BlockSpec spec;
      spec.p = config.p;
      for (const auto& block : doc["blocks"]) {
        spec.blocks.push_back({block.at("size").get<Index>(),
                               block.at("value").get<double>()});
      }
      config.blocks = spec;
    }
    if (doc.contains("matrices")) {
      std::vector<Matrix> stack;
      for (const auto& entry : doc["matrices"]) {
        std::filesystem::path mp(entry.get<std::string>());
        if (!mp.is_absolute()) mp = path.parent_path() / mp;
        stack.push_back(read_matrix_csv(mp));
      }
      config.matrix_stack = std::move(stack);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return config;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  ScenarioConfig config = parse_scenario_config(args.config);
  config.threads = args.threads;

  std::vector<Method> methods;
  for (const std::string& name : args.methods) {
    if (name == "spinner") {
      methods.push_back(Method::spinner);
    } else if (name == "nuclear") {
      methods.push_back(Method::nuclear);
    } else if (name == "lasso") {
      methods.push_back(Method::lasso);
    } else {
      throw InvalidConfig("unknown method '" + name + "'");
    }
  }

  const ScenarioResult result = run_scenario(config, methods);
  std::filesystem::create_directories(args.out_dir);

  {
    std::ofstream out;
    open_output(out, args.out_dir / "mser_table.csv");
    out << "replicate,method,mser\n";
    for (const ScenarioRow& row : result.rows) {
      out << row.replicate << ',' << method_name(row.method) << ','
          << format_double(row.mser) << '\n';
    }
  }
  {
    std::ofstream out;
    open_output(out, args.out_dir / "summary.csv");
    out << "method,mean,ci_low,ci_high\n";
    for (const ScenarioSummary& s : result.summary) {
      out << method_name(s.method) << ',' << format_double(s.mean) << ','
          << format_double(s.ci_low) << ',' << format_double(s.ci_high)
          << '\n';
    }
  }
  return kExitOk;
}

int cmd_reorder(const ReorderArgs& args) {
  const Matrix b = read_matrix_csv(args.matrix);
  const NodeOrdering ordering = reorder_nodes(b, args.k, args.threshold);

  std::filesystem::create_directories(args.out_dir);
  {
    std::ofstream out;
    open_output(out, args.out_dir / "node_ordering.csv");
    out << "position,node,cluster\n";
    for (std::size_t t = 0; t < ordering.permutation.size(); ++t) {
      const int node = ordering.permutation[t];
      out << (t + 1) << ',' << (node + 1) << ','
          << ordering.cluster_labels[static_cast<std::size_t>(node)]
          << '\n';
    }
  }
  const Index p = b.rows();
  Matrix reordered(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      reordered(i, j) = b(ordering.permutation[static_cast<std::size_t>(i)],
                          ordering.permutation[static_cast<std::size_t>(j)]);
    }
  }
  write_matrix_csv(args.out_dir / "B_reordered.csv", reordered);
  return kExitOk;
}

int cmd_rankapprox(const RankApproxArgs& args) {
  const Matrix b = read_matrix_csv(args.matrix);
  std::filesystem::create_directories(args.out_dir);
  write_matrix_csv(args.out_dir / "rank_approx.csv",
                   best_rank_k(b, args.k));
  return kExitOk;
}

}  // namespace spinner
