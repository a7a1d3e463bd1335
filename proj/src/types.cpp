#include "spinner/types.hpp"

#include <Eigen/QR>

#include <cmath>
#include <sstream>

namespace spinner {

WeightMatrix WeightMatrix::standard(Index p) {
  WeightMatrix w;
  w.entries = Matrix::Ones(p, p);
  w.entries.diagonal().setZero();
  return w;
}

WeightMatrix WeightMatrix::from_matrix(Matrix m) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("weight matrix must be square");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    std::ostringstream msg;
    msg << "weight matrix asymmetry " << asym << " exceeds " << kSymmetryTol;
    throw AsymmetryError(msg.str());
  }
  if (m.minCoeff() < 0.0) {
    throw ValidationError("weight matrix entries must be nonnegative");
  }
  WeightMatrix w;
  w.entries = std::move(m);
  return w;
}

namespace {

bool leading_ones_column(const Matrix& x) {
  return x.cols() > 0 && (x.col(0).array() == 1.0).all();
}

}  // namespace

ConnectivityDataset ConnectivityDataset::validate(
    std::vector<Matrix> matrices, Vector response,
    std::optional<Matrix> covariates, const ValidateOptions& options) {
  if (matrices.empty()) {
    throw DimensionMismatch("at least one predictor matrix is required");
  }
  const Index p = matrices[0].rows();
  if (p < 2) {
    throw DimensionMismatch("predictor matrices must be at least 2 x 2");
  }
  const Index n = static_cast<Index>(matrices.size());
  if (response.size() != n) {
    std::ostringstream msg;
    msg << "response length " << response.size() << " does not match the "
        << n << " predictor matrices";
    throw DimensionMismatch(msg.str());
  }

  for (Index i = 0; i < n; ++i) {
    Matrix& a = matrices[static_cast<std::size_t>(i)];
    if (a.rows() != p || a.cols() != p) {
      std::ostringstream msg;
      msg << "matrix " << i << " is " << a.rows() << " x " << a.cols()
          << ", expected " << p << " x " << p;
      throw DimensionMismatch(msg.str());
    }
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol) {
      if (options.symmetrize) {
        a = ((a + a.transpose()) * 0.5).eval();
      } else {
        std::ostringstream msg;
        msg << "matrix " << i << " asymmetry " << asym << " exceeds "
            << kSymmetryTol << " (pass symmetrize to average)";
        throw AsymmetryError(msg.str());
      }
    } else if (asym > 0.0) {
      a = ((a + a.transpose()) * 0.5).eval();
    }
    const double diag_max = a.diagonal().cwiseAbs().maxCoeff();
    if (diag_max > kDiagonalTol && !options.zero_diagonal) {
      std::ostringstream msg;
      msg << "matrix " << i << " has diagonal magnitude " << diag_max
          << " (pass zero_diagonal to coerce)";
      throw NonzeroDiagonal(msg.str());
    }
    a.diagonal().setZero();
  }

  Matrix x(n, 0);
  if (covariates.has_value()) {
    if (covariates->rows() != n) {
      std::ostringstream msg;
      msg << "covariates have " << covariates->rows() << " rows, expected "
          << n;
      throw DimensionMismatch(msg.str());
    }
    if (options.add_intercept && !leading_ones_column(*covariates)) {
      x.resize(n, covariates->cols() + 1);
      x.col(0).setOnes();
      x.rightCols(covariates->cols()) = *covariates;
    } else {
      x = *covariates;
    }
    if (x.cols() > n) {
      throw RankDeficientCovariates(
          "more covariate columns than observations");
    }
    if (x.cols() > 0) {
      Eigen::ColPivHouseholderQR<Matrix> qr(x);
      if (qr.rank() < x.cols()) {
        throw RankDeficientCovariates(
            "covariate columns are linearly dependent");
      }
    }
  }

  return ConnectivityDataset(std::move(matrices), std::move(response),
                             std::move(x));
}

ConnectivityDataset ConnectivityDataset::subset(
    const std::vector<int>& indices) const {
  std::vector<Matrix> mats;
  mats.reserve(indices.size());
  Vector y(static_cast<Index>(indices.size()));
  Matrix x(static_cast<Index>(indices.size()), covariates_.cols());
  Index row = 0;
  for (int idx : indices) {
    mats.push_back(matrices_[static_cast<std::size_t>(idx)]);
    y(row) = response_(idx);
    if (covariates_.cols() > 0) x.row(row) = covariates_.row(idx);
    ++row;
  }
  return ConnectivityDataset(std::move(mats), std::move(y), std::move(x));
}

bool ConnectivityDataset::operator==(const ConnectivityDataset& other) const {
  if (matrices_.size() != other.matrices_.size()) return false;
  for (std::size_t i = 0; i < matrices_.size(); ++i) {
    if (matrices_[i] != other.matrices_[i]) return false;
  }
  return response_ == other.response_ && covariates_ == other.covariates_;
}

void SpinnerConfig::check(Index p) const {
  if (!(lambda_nuclear >= 0.0) || !std::isfinite(lambda_nuclear) ||
      !(lambda_lasso >= 0.0) || !std::isfinite(lambda_lasso)) {
    throw InvalidConfig("penalty weights must be finite and nonnegative");
  }
  if (!(eps_primal > 0.0) || !(eps_dual > 0.0)) {
    throw InvalidConfig("tolerances must be positive");
  }
  if (max_iterations < 1) {
    throw InvalidConfig("max_iterations must be positive");
  }
  if (!(initial_step_1 > 0.0) || !(initial_step_2 > 0.0)) {
    throw InvalidConfig("initial step sizes must be positive");
  }
  if (!(balancing.mu > 1.0) || !(balancing.tau > 1.0) ||
      !(balancing.step_min > 0.0) ||
      !(balancing.step_max >= balancing.step_min) ||
      balancing.cooldown < 0) {
    throw InvalidConfig("invalid residual-balancing policy");
  }
  if (weights.has_value() && weights->size() != p) {
    std::ostringstream msg;
    msg << "weight matrix is " << weights->size() << " x " << weights->size()
        << ", expected " << p << " x " << p;
    throw DimensionMismatch(msg.str());
  }
}

AdmmState AdmmState::zero(Index p, double step_1, double step_2) {
  AdmmState s;
  s.B = Matrix::Zero(p, p);
  s.C = Matrix::Zero(p, p);
  s.D = Matrix::Zero(p, p);
  s.Z1 = Matrix::Zero(p, p);
  s.Z2 = Matrix::Zero(p, p);
  s.step_1 = step_1;
  s.step_2 = step_2;
  return s;
}

}  // namespace spinner
