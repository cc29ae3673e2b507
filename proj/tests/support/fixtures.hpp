#pragma once

// Small random instances shared by the unit tests.

#include <cstdint>
#include <vector>

#include "ife/expansion.hpp"
#include "ife/linalg.hpp"
#include "ife/panel.hpp"
#include "ife/random.hpp"

namespace fixture {

using ife::Index;
using ife::Matrix;
using ife::Vector;

inline Matrix gaussian(ife::Rng& rng, Index rows, Index cols, double mean = 0.0) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal(mean, 1.0);
  }
  return m;
}

inline Matrix symmetric(ife::Rng& rng, Index n) {
  const Matrix a = gaussian(rng, n, n);
  return 0.5 * (a + a.transpose());
}

struct Instance {
  ife::PanelDataset data;
  ife::TrueStructure truth;
};

/// Y = beta0 . X + lambda f' + noise * e. Regressors load on the factors so
/// that pooled OLS is biased, which makes the factor step matter.
inline Instance factor_panel(std::uint64_t seed, Index n, Index t, Index k, Index r0,
                             double noise = 1.0, double factor_scale = 1.0) {
  ife::Rng rng(seed);
  Instance out;
  out.truth.lambda0 = factor_scale * gaussian(rng, n, r0, 1.0);
  out.truth.f0 = gaussian(rng, t, r0);
  out.truth.beta0 = Vector::LinSpaced(k, 1.0, 0.5 + 0.5 * static_cast<double>(k));
  out.truth.error = noise * gaussian(rng, n, t);
  const Matrix common = out.truth.lambda0 * out.truth.f0.transpose();
  std::vector<Matrix> x;
  for (Index j = 0; j < k; ++j) {
    x.push_back(gaussian(rng, n, t) + 0.5 * common / std::max(1.0, factor_scale));
  }
  Matrix y = common + out.truth.error;
  for (Index j = 0; j < k; ++j) y += out.truth.beta0(j) * x[static_cast<std::size_t>(j)];
  out.data = ife::make_panel(std::move(y), std::move(x));
  return out;
}

}  // namespace fixture
