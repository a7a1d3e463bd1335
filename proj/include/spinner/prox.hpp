#pragma once

#include <cstdint>

#include "spinner/design.hpp"

namespace spinner {

/// Solves the quadratic block update
///   min_B ||y~ - A~ vec(B)||^2 + step * ||B - anchor||_F^2
/// through the cached SVD. The correction on top of the anchor is
/// symmetric with an exactly zero diagonal, so the anchor's diagonal
/// passes through untouched.
Matrix ridge_update(const DesignContext& context, const Matrix& anchor,
                    double step);

/// Singular value thresholding: the prox of threshold * ||.||_* at M.
/// Inputs symmetric within 1e-8 take an eigendecomposition fast path
/// whose output is exactly symmetric.
Matrix svt(const Matrix& m, double threshold);

/// Entrywise D_ij = sgn(Q_ij) * (|Q_ij| - threshold_scale * W_ij)_+ .
Matrix weighted_soft_threshold(const Matrix& q, const WeightMatrix& weights,
                               double threshold_scale);

/// (step1 * K + step2 * L) / (step1 + step2): the center that merges
/// step1 ||D - K||_F^2 + step2 ||D - L||_F^2 into a single quadratic.
Matrix merge_quadratics(const Matrix& k, const Matrix& l, double step1,
                        double step2);

/// Instrumentation: number of svt calls since the last reset. Used by
/// dispatch-purity tests.
std::uint64_t svt_invocation_count();
void reset_svt_invocation_count();

}  // namespace spinner
