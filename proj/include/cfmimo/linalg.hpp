#pragma once

#include <stdexcept>

#include "cfmimo/model.hpp"

namespace cfmimo {

// Factorization of a Hermitian positive-definite matrix. Falls back to LDLT
// (with a relative diagonal jitter) when Cholesky breaks down.
class HermitianSolver {
 public:
  HermitianSolver() = default;
  explicit HermitianSolver(const CMatrix& a) { factor(a); }

  void factor(const CMatrix& a) {
    llt_.compute(a);
    use_ldlt_ = llt_.info() != Eigen::Success;
    if (use_ldlt_) {
      const double scale = std::max(a.diagonal().real().cwiseAbs().maxCoeff(), 1e-300);
      CMatrix reg = a;
      reg.diagonal().array() += 1e-12 * scale;
      ldlt_.compute(reg);
      if (ldlt_.info() != Eigen::Success) throw std::runtime_error("HermitianSolver: factorization failed");
    }
  }

  template <typename Rhs>
  CMatrix solve(const Eigen::MatrixBase<Rhs>& b) const {
    return use_ldlt_ ? CMatrix(ldlt_.solve(b)) : CMatrix(llt_.solve(b));
  }

  // x^H A^{-1} x for a column vector x; real by Hermitian symmetry.
  double quad_inverse(const CVector& x) const {
    const CVector z = use_ldlt_ ? CVector(ldlt_.solve(x)) : CVector(llt_.solve(x));
    return std::max(0.0, x.dot(z).real());
  }

 private:
  Eigen::LLT<CMatrix> llt_;
  Eigen::LDLT<CMatrix> ldlt_;
  bool use_ldlt_ = false;
};

// x^H A^{-1} x with A Hermitian positive definite.
inline double inverse_quadratic_form(const CMatrix& a, const CVector& x) {
  return HermitianSolver(a).quad_inverse(x);
}

// Adds vec * vec^H into acc.
inline void add_outer(CMatrix& acc, const CVector& vec) { acc.noalias() += vec * vec.adjoint(); }

// Dominant right singular vector of h, unit norm. For a single column returns [1].
inline CVector dominant_right_singular(const CMatrix& h) {
  if (h.cols() == 1) return CVector::Ones(1);
  Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeThinV);
  return svd.matrixV().col(0);
}

}  // namespace cfmimo
