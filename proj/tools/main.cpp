// Command-line front end: fit, cv, simulate, reorder, rankapprox.

#include <exception>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "spinner/io.hpp"
#include "spinner/version.hpp"

namespace {

std::vector<std::string> split_methods(const std::string& csv) {
  std::vector<std::string> names;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) names.push_back(token);
  }
  return names;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const spinner::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return spinner::kExitParse;
  } catch (const spinner::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return spinner::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpINNEr: sparse low-rank scalar-on-matrix regression"};
  app.set_version_flag("--version", std::string("spinner ") +
                                        spinner::kVersion);
  app.require_subcommand(1);

  spinner::FitArgs fit;
  std::string fit_weights;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Fit at a fixed (lambda_N, lambda_L) pair");
  fit_cmd->add_option("--manifest", fit.manifest, "Dataset manifest JSON")
      ->required();
  fit_cmd->add_option("--lambda-n", fit.lambda_nuclear,
                      "Nuclear-norm penalty weight")
      ->required();
  fit_cmd->add_option("--lambda-l", fit.lambda_lasso,
                      "Entrywise l1 penalty weight")
      ->required();
  fit_cmd->add_option("--weights", fit_weights,
                      "Optional weight matrix CSV (default: ones off-diag)");
  fit_cmd->add_option("--out", fit.out_dir, "Output directory")->required();
  fit_cmd->add_option("--eps-primal", fit.eps_primal, "Primal tolerance");
  fit_cmd->add_option("--eps-dual", fit.eps_dual, "Dual tolerance");
  fit_cmd->add_option("--max-iter", fit.max_iterations, "Iteration cap");

  spinner::CvArgs cv;
  CLI::App* cv_cmd = app.add_subcommand(
      "cv", "Five-fold cross-validation over the 15 x 15 lambda grid");
  cv_cmd->add_option("--manifest", cv.manifest, "Dataset manifest JSON")
      ->required();
  cv_cmd->add_option("--folds", cv.folds, "Number of folds");
  cv_cmd->add_option("--seed", cv.seed, "Fold-assignment seed");
  cv_cmd->add_option("--out", cv.out_dir, "Output directory")->required();
  cv_cmd->add_option("--threads", cv.threads,
                     "Worker threads (0 = hardware)");

  spinner::SimulateArgs sim;
  std::string sim_methods = "spinner,nuclear,lasso";
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Run a simulation scenario");
  sim_cmd->add_option("--config", sim.config, "Scenario config JSON")
      ->required();
  sim_cmd->add_option("--methods", sim_methods,
                      "Comma list among spinner,nuclear,lasso");
  sim_cmd->add_option("--out", sim.out_dir, "Output directory")->required();
  sim_cmd->add_option("--threads", sim.threads,
                      "Worker threads (0 = hardware)");

  spinner::ReorderArgs reorder;
  CLI::App* reorder_cmd = app.add_subcommand(
      "reorder", "Cluster-by-cluster node ordering of an estimate");
  reorder_cmd->add_option("--matrix", reorder.matrix, "Estimate CSV")
      ->required();
  reorder_cmd->add_option("--k", reorder.k, "Number of leading vectors");
  reorder_cmd->add_option("--threshold", reorder.threshold,
                          "Cluster membership threshold");
  reorder_cmd->add_option("--out", reorder.out_dir, "Output directory")
      ->required();

  spinner::RankApproxArgs rank;
  CLI::App* rank_cmd =
      app.add_subcommand("rankapprox", "Best rank-k approximation");
  rank_cmd->add_option("--matrix", rank.matrix, "Matrix CSV")->required();
  rank_cmd->add_option("--k", rank.k, "Rank")->required();
  rank_cmd->add_option("--out", rank.out_dir, "Output directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (fit_cmd->parsed()) {
    if (!fit_weights.empty()) fit.weights = fit_weights;
    return run_guarded([&] { return spinner::cmd_fit(fit); });
  }
  if (cv_cmd->parsed()) {
    return run_guarded([&] { return spinner::cmd_cv(cv); });
  }
  if (sim_cmd->parsed()) {
    sim.methods = split_methods(sim_methods);
    return run_guarded([&] { return spinner::cmd_simulate(sim); });
  }
  if (reorder_cmd->parsed()) {
    return run_guarded([&] { return spinner::cmd_reorder(reorder); });
  }
  if (rank_cmd->parsed()) {
    return run_guarded([&] { return spinner::cmd_rankapprox(rank); });
  }
  return 0;
}
