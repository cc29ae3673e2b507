#include "ife/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <lapacke.h>

#include "ife/error.hpp"

namespace ife {

namespace {

// Column-basis of the span of `a`: a V_r D_r^{-1/2}, with V_r, D_r the
// retained eigenpairs of a'a.
Matrix span_basis(const Matrix& a) {
  if (a.cols() == 0 || a.rows() == 0) return Matrix(a.rows(), 0);
  const Matrix gram = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const Vector& d = es.eigenvalues();
  const double top = d.maxCoeff();
  if (!(top > 0.0)) return Matrix(a.rows(), 0);
  const double cutoff = kRankCutoff * top;
  std::vector<Index> keep;
  for (Index j = 0; j < d.size(); ++j) {
    if (d(j) > cutoff) keep.push_back(j);
  }
  Matrix basis(a.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const Index j = keep[c];
    basis.col(static_cast<Index>(c)) = a * es.eigenvectors().col(j) / std::sqrt(d(j));
  }
  return basis;
}

}  // namespace

Matrix orthonormal_basis(const Matrix& a) {
  Matrix q = span_basis(a);
  // One Gram-Schmidt pass via thin QR tightens orthonormality when the
  // eigen route loses digits on ill-conditioned columns.
  if (q.cols() > 0) {
    Eigen::HouseholderQR<Matrix> qr(q);
    q = qr.householderQ() * Matrix::Identity(q.rows(), q.cols());
  }
  return q;
}

Matrix projector_onto(const Matrix& a) {
  const Matrix q = orthonormal_basis(a);
  Matrix p = q * q.transpose();
  return 0.5 * (p + p.transpose());
}

Matrix projector_orthogonal(const Matrix& a) {
  return Matrix::Identity(a.rows(), a.rows()) - projector_onto(a);
}

Matrix apply_orthogonal_left(const Matrix& a, const Matrix& z) {
  if (a.cols() == 0) return z;
  const Matrix q = orthonormal_basis(a);
  return z - q * (q.transpose() * z);
}

Matrix apply_orthogonal_right(const Matrix& z, const Matrix& b) {
  if (b.cols() == 0) return z;
  const Matrix q = orthonormal_basis(b);
  return z - (z * q) * q.transpose();
}

Matrix pinv_symmetric(const Matrix& s) {
  if (s.size() == 0) return s;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
  const Vector& d = es.eigenvalues();
  const double top = d.cwiseAbs().maxCoeff();
  Vector inv = Vector::Zero(d.size());
  if (top > 0.0) {
    for (Index j = 0; j < d.size(); ++j) {
      if (d(j) > kRankCutoff * top) inv(j) = 1.0 / d(j);
    }
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

void require_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  }
  if (a.size() == 0) return;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTolerance * scale)) {
    throw Error(ErrorCode::NotSymmetric,
                "matrix asymmetry " + std::to_string(asym) + " exceeds tolerance");
  }
}

EigenDecomposition sym_eigen(const Matrix& a) {
  require_symmetric(a);
  const Index n = a.rows();
  EigenDecomposition out{Vector(n), Matrix(n, n)};
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::LapackFailure, "symmetric eigensolver did not converge");
  }
  // Solver returns ascending order; flip to descending.
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

EigenDecomposition top_eigen(const Matrix& a, Index k) {
  require_symmetric(a);
  const Index n = a.rows();
  if (k < 0 || k > n) {
    throw Error(ErrorCode::RankArgumentOutOfRange,
                "requested " + std::to_string(k) + " eigenpairs of a " +
                    std::to_string(n) + "-dimensional matrix");
  }
  EigenDecomposition out{Vector(k), Matrix(n, k)};
  if (k == 0) return out;

  Matrix work = 0.5 * (a + a.transpose());
  Vector w(n);
  Matrix z(n, k);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
  lapack_int found = 0;
  const auto ln = static_cast<lapack_int>(n);
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', ln, work.data(), ln, 0.0, 0.0,
      ln - static_cast<lapack_int>(k) + 1, ln, 0.0, &found, w.data(), z.data(), ln,
      support.data());
  if (info != 0 || found != static_cast<lapack_int>(k)) {
    throw Error(ErrorCode::LapackFailure, "dsyevr failed with info " + std::to_string(info));
  }
  for (Index j = 0; j < k; ++j) {
    out.values(j) = w(k - 1 - j);
    out.vectors.col(j) = z.col(k - 1 - j);
  }
  return out;
}

Vector sym_eigenvalues(const Matrix& a) {
  require_symmetric(a);
  if (a.rows() == 0) return Vector(0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()),
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::LapackFailure, "symmetric eigensolver did not converge");
  }
  return es.eigenvalues().reverse();
}

double sum_smallest_eigenvalues(const Matrix& a, Index skip_top) {
  require_symmetric(a);
  const Index n = a.rows();
  if (skip_top < 0 || skip_top > n) {
    throw Error(ErrorCode::RankArgumentOutOfRange,
                "cannot skip " + std::to_string(skip_top) + " eigenvalues of a " +
                    std::to_string(n) + "-dimensional matrix");
  }
  if (skip_top == n) return 0.0;
  if (skip_top == 0) return a.trace();

  const Index keep = n - skip_top;
  Matrix work = 0.5 * (a + a.transpose());
  Vector w(n);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const auto ln = static_cast<lapack_int>(n);
  double dummy_z = 0.0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'N', 'I', 'L', ln, work.data(), ln, 0.0, 0.0, 1,
      static_cast<lapack_int>(keep), 0.0, &found, w.data(), &dummy_z, 1, support.data());
  if (info != 0 || found != static_cast<lapack_int>(keep)) {
    throw Error(ErrorCode::LapackFailure, "dsyevr failed with info " + std::to_string(info));
  }
  return w.head(keep).sum();
}

Vector singular_values(const Matrix& a) {
  if (a.size() == 0) return Vector(0);
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a)(0);
}

Matrix smaller_gram(const Matrix& a) {
  if (a.rows() <= a.cols()) {
    Matrix g = Matrix::Zero(a.rows(), a.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(a);
    return g.selfadjointView<Eigen::Lower>();
  }
  Matrix g = Matrix::Zero(a.cols(), a.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

}  // namespace ife
