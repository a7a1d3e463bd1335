// Shared generators for randomized tests. All draws go through
// spinner::Rng so fixtures are identical on every platform.
#pragma once

#include <optional>
#include <vector>

#include "spinner/rng.hpp"
#include "spinner/types.hpp"

namespace spinner::testdata {

inline Matrix random_symmetric(Index p, Rng& rng, double scale = 1.0) {
  Matrix b = Matrix::Zero(p, p);
  for (Index col = 1; col < p; ++col) {
    for (Index row = 0; row < col; ++row) {
      const double value = scale * rng.normal();
      b(row, col) = value;
      b(col, row) = value;
    }
  }
  return b;
}

inline std::vector<Matrix> random_stack(Index p, Index n, Rng& rng) {
  std::vector<Matrix> mats;
  mats.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    mats.push_back(random_symmetric(p, rng));
  }
  return mats;
}

struct DatasetSpec {
  Index p = 5;
  Index n = 30;
  double noise = 0.1;
  double signal_scale = 1.0;
  bool covariates = false;
  Index extra_covariates = 1;  // columns beside the intercept
};

/// Random validated dataset with a planted symmetric signal.
inline ConnectivityDataset random_dataset(const DatasetSpec& spec,
                                          Rng& rng) {
  auto mats = random_stack(spec.p, spec.n, rng);
  const Matrix planted = random_symmetric(spec.p, rng, spec.signal_scale);
  Vector y(spec.n);
  std::optional<Matrix> x;
  Vector beta;
  if (spec.covariates) {
    x = Matrix(spec.n, spec.extra_covariates);
    for (Index i = 0; i < spec.n; ++i) {
      for (Index j = 0; j < spec.extra_covariates; ++j) {
        (*x)(i, j) = rng.normal();
      }
    }
    beta = Vector(spec.extra_covariates + 1);
    for (Index j = 0; j < beta.size(); ++j) beta(j) = rng.normal();
  }
  for (Index i = 0; i < spec.n; ++i) {
    y(i) = (mats[static_cast<std::size_t>(i)].array() * planted.array())
               .sum() +
           spec.noise * rng.normal();
    if (spec.covariates) {
      y(i) += beta(0);
      for (Index j = 0; j < spec.extra_covariates; ++j) {
        y(i) += (*x)(i, j) * beta(j + 1);
      }
    }
  }
  return ConnectivityDataset::validate(std::move(mats), std::move(y), x);
}

}  // namespace spinner::testdata
