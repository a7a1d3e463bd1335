#pragma once

#include <Eigen/QR>

#include "spinner/types.hpp"

namespace spinner {

/// Economy SVD factors of 2 * H * A_U, cached once per dataset. They are
/// independent of the penalty weights and step sizes, so one cache serves
/// every solve across a whole cross-validation grid.
struct SvdCache {
  Matrix u;  // n x r, orthonormal columns
  Vector d;  // r singular values, nonincreasing
  Matrix v;  // q x r, orthonormal columns
};

/// Vectorized design derived from a validated dataset:
///   stacked         n x p^2, row i = vec(A_i) (column-major)
///   upper           n x q,   row i = strict upper triangle of A_i
///   projected_*     data multiplied by H = I - X (X^T X)^{-1} X^T
/// The strict upper triangle is ordered column by column:
/// (0,1), (0,2), (1,2), (0,3), ... and q = p(p-1)/2.
class DesignContext {
 public:
  explicit DesignContext(const ConnectivityDataset& dataset);

  Index n() const { return n_; }
  Index p() const { return p_; }
  Index q() const { return q_; }
  bool has_covariates() const { return covariates_.cols() > 0; }

  const Matrix& stacked_design() const { return stacked_; }
  const Matrix& upper_design() const { return upper_; }
  const Matrix& projected_upper_design() const { return projected_upper_; }
  const Vector& response() const { return response_; }
  const Vector& projected_response() const { return projected_response_; }
  const Matrix& covariates() const { return covariates_; }
  const SvdCache& svd_cache() const { return svd_; }

  /// Hv (identity when there are no covariates). X^T X is never formed;
  /// the projection goes through an orthogonal factorization of X.
  Vector project(const Vector& v) const;

  /// (X^T X)^{-1} X^T r via the cached factorization.
  Vector solve_covariates(const Vector& r) const;

  /// 2 A_U c  — model values of the symmetric zero-diagonal matrix with
  /// upper vector c.
  Vector model_upper(const Vector& c) const;

  /// 2 H A_U c — same thing on projected data.
  Vector projected_model_upper(const Vector& c) const;

 private:
  Index n_ = 0, p_ = 0, q_ = 0;
  Matrix stacked_;
  Matrix upper_;
  Matrix projected_upper_;
  Vector response_;
  Vector projected_response_;
  Matrix covariates_;
  Eigen::ColPivHouseholderQR<Matrix> covariate_qr_;
  SvdCache svd_;
};

DesignContext build_design(const ConnectivityDataset& dataset);

/// Strict upper triangle of B in the documented fixed order.
Vector upper_from_matrix(const Matrix& b);

/// Symmetric zero-diagonal p x p matrix with upper vector c.
Matrix matrix_from_upper(const Vector& c, Index p);

/// (<A_1,B>, ..., <A_n,B>) for symmetric B, computed as 2 A_U vec_U(B);
/// the diagonal contributes nothing since diag(A_i) = 0.
Vector apply_model(const DesignContext& context, const Matrix& b);

/// beta = (X^T X)^{-1} X^T (y - A vec(B)); empty without covariates.
Vector recover_beta(const DesignContext& context, const Matrix& b);

/// F(B) = 1/2 ||y~ - A~ vec(B)||^2 + lambda_N ||B||_* +
///        lambda_L ||vec(W o B)||_1, evaluated on projected data.
/// B need not be symmetric here; the fit term goes through the full
/// stacked design.
double objective_value(const DesignContext& context, const Matrix& b,
                       double lambda_nuclear, double lambda_lasso,
                       const WeightMatrix& weights);

}  // namespace spinner
