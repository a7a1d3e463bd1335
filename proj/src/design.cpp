#include "spinner/design.hpp"

#include <Eigen/SVD>

#include <sstream>

namespace spinner {

Vector upper_from_matrix(const Matrix& b) {
  const Index p = b.rows();
  Vector c(p * (p - 1) / 2);
  Index k = 0;
  for (Index col = 1; col < p; ++col) {
    for (Index row = 0; row < col; ++row) {
      c(k++) = b(row, col);
    }
  }
  return c;
}

Matrix matrix_from_upper(const Vector& c, Index p) {
  if (c.size() != p * (p - 1) / 2) {
    std::ostringstream msg;
    msg << "upper vector has length " << c.size() << ", expected "
        << p * (p - 1) / 2;
    throw DimensionMismatch(msg.str());
  }
  Matrix b = Matrix::Zero(p, p);
  Index k = 0;
  for (Index col = 1; col < p; ++col) {
    for (Index row = 0; row < col; ++row) {
      b(row, col) = c(k);
      b(col, row) = c(k);
      ++k;
    }
  }
  return b;
}

DesignContext::DesignContext(const ConnectivityDataset& dataset)
    : n_(dataset.n()),
      p_(dataset.p()),
      q_(dataset.p() * (dataset.p() - 1) / 2),
      response_(dataset.response()),
      covariates_(dataset.covariates()) {
  stacked_.resize(n_, p_ * p_);
  upper_.resize(n_, q_);
  for (Index i = 0; i < n_; ++i) {
    const Matrix& a = dataset.matrices()[static_cast<std::size_t>(i)];
    stacked_.row(i) = Eigen::Map<const Vector>(a.data(), p_ * p_);
    upper_.row(i) = upper_from_matrix(a);
  }

  if (covariates_.cols() > 0) {
    covariate_qr_.compute(covariates_);
    if (covariate_qr_.rank() < covariates_.cols()) {
      throw RankDeficientCovariates(
          "covariate columns are linearly dependent");
    }
    projected_response_ = project(response_);
    projected_upper_.resize(n_, q_);
    // H M = M - X (X^T X)^{-1} X^T M, column by column through the QR.
    projected_upper_ = upper_ - covariates_ * covariate_qr_.solve(upper_);
  } else {
    projected_response_ = response_;
    projected_upper_ = upper_;
  }

  Eigen::BDCSVD<Matrix> svd(2.0 * projected_upper_,
                            Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd_.u = svd.matrixU();
  svd_.d = svd.singularValues();
  svd_.v = svd.matrixV();
}

DesignContext build_design(const ConnectivityDataset& dataset) {
  return DesignContext(dataset);
}

Vector DesignContext::project(const Vector& v) const {
  if (covariates_.cols() == 0) return v;
  return v - covariates_ * covariate_qr_.solve(v);
}

Vector DesignContext::solve_covariates(const Vector& r) const {
  if (covariates_.cols() == 0) return Vector();
  return covariate_qr_.solve(r);
}

Vector DesignContext::model_upper(const Vector& c) const {
  return 2.0 * (upper_ * c);
}

Vector DesignContext::projected_model_upper(const Vector& c) const {
  return 2.0 * (projected_upper_ * c);
}

Vector apply_model(const DesignContext& context, const Matrix& b) {
  if (b.rows() != context.p() || b.cols() != context.p()) {
    throw DimensionMismatch("coefficient matrix has the wrong dimension");
  }
  return context.model_upper(upper_from_matrix(b));
}

Vector recover_beta(const DesignContext& context, const Matrix& b) {
  if (!context.has_covariates()) return Vector();
  return context.solve_covariates(context.response() -
                                  apply_model(context, b));
}

double objective_value(const DesignContext& context, const Matrix& b,
                       double lambda_nuclear, double lambda_lasso,
                       const WeightMatrix& weights) {
  const Index p = context.p();
  if (b.rows() != p || b.cols() != p || weights.size() != p) {
    throw DimensionMismatch("objective inputs have mismatched dimensions");
  }
  // The fit term goes through the full stacked design so that asymmetric
  // B is evaluated exactly.
  const Vector model =
      context.stacked_design() * Eigen::Map<const Vector>(b.data(), p * p);
  const Vector residual = context.project(context.response() - model);
  double value = 0.5 * residual.squaredNorm();
  if (lambda_nuclear != 0.0) {
    Eigen::BDCSVD<Matrix> svd(b);
    value += lambda_nuclear * svd.singularValues().sum();
  }
  if (lambda_lasso != 0.0) {
    value += lambda_lasso *
             (weights.entries.array() * b.array()).abs().sum();
  }
  return value;
}

}  // namespace spinner
