#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "sketchnewton/errors.hpp"

namespace sketchnewton {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool is_power_of_two(std::size_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// A failed factorization is retried once with the diagonal shifted by
/// 1e-10 * trace(M) / d; `jitter()` reports the shift that was applied.
class SpdFactorization {
 public:
  SpdFactorization() = default;

  explicit SpdFactorization(const Matrix& m) { factor(m); }

  Eigen::Index dim() const noexcept { return llt_.rows(); }
  double jitter() const noexcept { return jitter_; }
  Matrix lower() const { return llt_.matrixL(); }

  Vector solve(const Vector& b) const {
    if (b.size() != dim()) {
      throw DimensionMismatch("spd_solve: right-hand side has " + std::to_string(b.size()) +
                              " entries, factor is " + std::to_string(dim()) + "x" +
                              std::to_string(dim()));
    }
    return llt_.solve(b);
  }

  Matrix solve(const Matrix& b) const {
    if (b.rows() != dim()) throw DimensionMismatch("spd_solve: row count mismatch");
    return llt_.solve(b);
  }

 private:
  void factor(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("spd_factor: matrix is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (((m - m.transpose()).cwiseAbs().maxCoeff()) > 1e-10 * scale) {
      throw InvalidParams("spd_factor: matrix is not symmetric");
    }
    llt_.compute(m);
    if (llt_.info() == Eigen::Success && finite_factor()) return;

    const auto d = static_cast<double>(m.rows());
    jitter_ = 1e-10 * std::abs(m.trace()) / d;
    if (jitter_ == 0.0) jitter_ = 1e-10;
    Matrix shifted = m;
    shifted.diagonal().array() += jitter_;
    llt_.compute(shifted);
    if (llt_.info() != Eigen::Success || !finite_factor()) {
      throw NotPositiveDefinite("spd_factor: non-positive pivot after jitter retry");
    }
  }

  bool finite_factor() const {
    return llt_.matrixLLT().diagonal().allFinite() &&
           (llt_.matrixLLT().diagonal().array() > 0.0).all();
  }

  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

inline SpdFactorization spd_factor(const Matrix& m) { return SpdFactorization(m); }

inline Vector spd_solve(const SpdFactorization& fac, const Vector& b) { return fac.solve(b); }

/// Solves (B^T B + G) y = r through the m x m capacitance matrix
/// I_m + B G^{-1} B^T, where only the action of G^{-1} is needed.
/// Cost is O(m^2 d) plus m applications of G^{-1}.
class WoodburySolver {
 public:
  WoodburySolver() = default;

  template <typename GInvApply>
  WoodburySolver(Matrix b, GInvApply&& g_inv_apply)
      : b_(std::move(b)), g_inv_(std::forward<GInvApply>(g_inv_apply)) {
    const Eigen::Index m = b_.rows();
    g_inv_bt_.resize(b_.cols(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
      g_inv_bt_.col(i) = g_inv_(Vector(b_.row(i).transpose()));
    }
    Matrix capacitance = b_ * g_inv_bt_;
    capacitance.diagonal().array() += 1.0;
    capacitance = 0.5 * (capacitance + capacitance.transpose()).eval();
    capacitance_ = SpdFactorization(capacitance);
  }

  Eigen::Index dim() const noexcept { return b_.cols(); }

  Vector solve(const Vector& r) const {
    if (r.size() != dim()) throw DimensionMismatch("woodbury_solve: right-hand side size mismatch");
    Vector g_inv_r = g_inv_(r);
    if (b_.rows() == 0) return g_inv_r;
    const Vector inner = capacitance_.solve(Vector(b_ * g_inv_r));
    return g_inv_r - g_inv_bt_ * inner;
  }

 private:
  Matrix b_;
  std::function<Vector(const Vector&)> g_inv_;
  Matrix g_inv_bt_;
  SpdFactorization capacitance_;
};

template <typename GInvApply>
Vector woodbury_solve(const Matrix& b, GInvApply&& g_inv_apply, const Vector& rhs) {
  if (rhs.size() != b.cols()) throw DimensionMismatch("woodbury_solve: right-hand side size mismatch");
  return WoodburySolver(b, std::forward<GInvApply>(g_inv_apply)).solve(rhs);
}

/// Unnormalized Walsh-Hadamard transform in Sylvester (natural) order.
inline void fwht_in_place(std::span<double> v) {
  const std::size_t n = v.size();
  if (!is_power_of_two(n)) {
    throw LengthNotPowerOfTwo("fwht: length " + std::to_string(n) + " is not a power of two");
  }
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double x = v[j];
        const double y = v[j + h];
        v[j] = x + y;
        v[j + h] = x - y;
      }
    }
  }
}

inline void fwht_in_place(Vector& v) { fwht_in_place(std::span<double>(v.data(), static_cast<std::size_t>(v.size()))); }

/// Largest singular value of a symmetric matrix (absolute eigenvalue).
inline double symmetric_spectral_norm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace sketchnewton
