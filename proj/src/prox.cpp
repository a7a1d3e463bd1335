#include "spinner/prox.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <atomic>
#include <cmath>

namespace spinner {

namespace {

std::atomic<std::uint64_t> g_svt_calls{0};

// Relative cutoff under which singular values are treated as zero when
// forming d / (d^2 + 2 step); the ridge term keeps the map bounded.
constexpr double kSingularCutoff = 1e-12;

}  // namespace

Matrix ridge_update(const DesignContext& context, const Matrix& anchor,
                    double step) {
  const SvdCache& svd = context.svd_cache();
  const Vector shifted =
      context.projected_response() -
      context.projected_model_upper(upper_from_matrix(anchor));
  Vector coeff = svd.u.transpose() * shifted;
  const double cutoff =
      svd.d.size() > 0 ? kSingularCutoff * svd.d(0) : 0.0;
  for (Index i = 0; i < coeff.size(); ++i) {
    const double d = svd.d(i);
    coeff(i) = d > cutoff ? d / (d * d + 2.0 * step) * coeff(i) : 0.0;
  }
  Matrix out = matrix_from_upper(svd.v * coeff, context.p());
  out += anchor;
  return out;
}

Matrix svt(const Matrix& m, double threshold) {
  g_svt_calls.fetch_add(1, std::memory_order_relaxed);
  const Index p = m.rows();
  // Every singular value is bounded by the Frobenius norm, so inputs this
  // small threshold to zero with no decomposition at all.
  if (m.norm() <= threshold) return Matrix::Zero(p, m.cols());

  const double asym =
      m.size() > 0 ? (m - m.transpose()).cwiseAbs().maxCoeff() : 0.0;
  if (m.rows() == m.cols() && asym <= kSymmetryTol) {
    // Symmetric fast path: singular values are |eigenvalues| with the
    // signs folded back into one side. Only surviving components are
    // reconstructed, and averaging keeps the output exactly symmetric.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const Vector& values = eig.eigenvalues();
    Index kept = 0;
    Vector coeff(values.size());
    Matrix basis(p, values.size());
    for (Index i = 0; i < values.size(); ++i) {
      const double magnitude = std::abs(values(i)) - threshold;
      if (magnitude > 0.0) {
        coeff(kept) = values(i) >= 0.0 ? magnitude : -magnitude;
        basis.col(kept) = eig.eigenvectors().col(i);
        ++kept;
      }
    }
    if (kept == 0) return Matrix::Zero(p, p);
    Matrix out(p, p);
    out.noalias() = basis.leftCols(kept) * coeff.head(kept).asDiagonal() *
                    basis.leftCols(kept).transpose();
    return ((out + out.transpose()) * 0.5).eval();
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector vals = svd.singularValues();
  for (Index i = 0; i < vals.size(); ++i) {
    vals(i) = std::max(vals(i) - threshold, 0.0);
  }
  return svd.matrixU() * vals.asDiagonal() * svd.matrixV().transpose();
}

Matrix weighted_soft_threshold(const Matrix& q, const WeightMatrix& weights,
                               double threshold_scale) {
  Matrix out(q.rows(), q.cols());
  for (Index col = 0; col < q.cols(); ++col) {
    for (Index row = 0; row < q.rows(); ++row) {
      const double value = q(row, col);
      const double cut = threshold_scale * weights.entries(row, col);
      const double magnitude = std::abs(value) - cut;
      out(row, col) =
          magnitude > 0.0 ? (value > 0.0 ? magnitude : -magnitude) : 0.0;
    }
  }
  return out;
}

Matrix merge_quadratics(const Matrix& k, const Matrix& l, double step1,
                        double step2) {
  return (step1 * k + step2 * l) / (step1 + step2);
}

std::uint64_t svt_invocation_count() {
  return g_svt_calls.load(std::memory_order_relaxed);
}

void reset_svt_invocation_count() {
  g_svt_calls.store(0, std::memory_order_relaxed);
}

}  // namespace spinner
