#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sketchnewton/errors.hpp"
#include "sketchnewton/linalg.hpp"
#include "sketchnewton/rng.hpp"

namespace sketchnewton {

enum class SketchKind { SJLT, SRHT, RRS, Identity };

inline std::string_view to_string(SketchKind kind) {
  switch (kind) {
    case SketchKind::SJLT: return "sjlt";
    case SketchKind::SRHT: return "srht";
    case SketchKind::RRS: return "rrs";
    case SketchKind::Identity: return "identity";
  }
  return "unknown";
}

inline SketchKind parse_sketch_kind(std::string_view name) {
  if (name == "sjlt" || name == "SJLT" || name == "countsketch") return SketchKind::SJLT;
  if (name == "srht" || name == "SRHT") return SketchKind::SRHT;
  if (name == "rrs" || name == "RRS" || name == "rss") return SketchKind::RRS;
  if (name == "identity" || name == "none" || name == "exact") return SketchKind::Identity;
  throw InvalidSpec("unknown sketch kind '" + std::string(name) + "'");
}

struct SketchSpec {
  SketchKind kind = SketchKind::SJLT;
  std::int64_t m = 1;
  std::uint64_t seed = 0;
};

/// One realized draw of an m x n embedding.
///
/// SJLT (CountSketch): column j of S has a single entry signs[j] in row rows[j].
/// SRHT: S = sqrt(n_pad / m) * P * (H / sqrt(n_pad)) * D, with D = diag(signs)
///       over the zero-padded length n_pad and P selecting rows[0..m).
/// RRS:  row i of S is sqrt(n / m) * e_{rows[i]}^T.
/// Identity: S = I_n and m == n.
class SketchOperator {
 public:
  SketchKind kind() const noexcept { return kind_; }
  std::int64_t rows() const noexcept { return m_; }
  std::int64_t cols() const noexcept { return n_; }
  std::int64_t padded_length() const noexcept { return n_pad_; }
  const std::vector<std::uint32_t>& row_indices() const noexcept { return rows_; }
  const std::vector<std::int8_t>& signs() const noexcept { return signs_; }

  /// Computes S * B for an n x d matrix B.
  Matrix apply(const Matrix& b) const {
    if (b.rows() != n_) {
      throw DimensionMismatch("sketch apply: operator expects " + std::to_string(n_) +
                              " rows, got " + std::to_string(b.rows()));
    }
    switch (kind_) {
      case SketchKind::Identity:
        return b;
      case SketchKind::SJLT: {
        Matrix out = Matrix::Zero(m_, b.cols());
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
          const double* src = b.col(j).data();
          double* dst = out.col(j).data();
          for (std::int64_t i = 0; i < n_; ++i) {
            const double value = src[i];
            if (value == 0.0) continue;
            dst[rows_[i]] += signs_[i] > 0 ? value : -value;
          }
        }
        return out;
      }
      case SketchKind::SRHT: {
        Matrix out(m_, b.cols());
        Vector work(n_pad_);
        const double scale = 1.0 / std::sqrt(static_cast<double>(m_));
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
          for (std::int64_t i = 0; i < n_; ++i) work[i] = signs_[i] > 0 ? b(i, j) : -b(i, j);
          for (std::int64_t i = n_; i < n_pad_; ++i) work[i] = 0.0;
          fwht_in_place(work);
          for (std::int64_t r = 0; r < m_; ++r) out(r, j) = scale * work[rows_[r]];
        }
        return out;
      }
      case SketchKind::RRS: {
        Matrix out(m_, b.cols());
        const double scale = std::sqrt(static_cast<double>(n_) / static_cast<double>(m_));
        for (std::int64_t r = 0; r < m_; ++r) out.row(r) = scale * b.row(rows_[r]);
        return out;
      }
    }
    return {};
  }

  /// Dense m x n expansion of S; intended for tests and small n.
  Matrix dense() const { return apply(Matrix::Identity(n_, n_)); }

  friend SketchOperator draw_sketch(const SketchSpec& spec, std::int64_t n);
  friend SketchOperator make_sjlt(std::int64_t m, std::vector<std::uint32_t> rows,
                                  std::vector<std::int8_t> signs);

 private:
  SketchKind kind_ = SketchKind::Identity;
  std::int64_t m_ = 0;
  std::int64_t n_ = 0;
  std::int64_t n_pad_ = 0;
  std::vector<std::uint32_t> rows_;
  std::vector<std::int8_t> signs_;
};

/// Draws a fresh operator. Identical (spec, n) always yields the same operator.
inline SketchOperator draw_sketch(const SketchSpec& spec, std::int64_t n) {
  if (n < 1) throw InvalidSpec("draw_sketch: n must be at least 1");
  if (spec.kind != SketchKind::Identity && spec.m < 1) {
    throw InvalidSpec("draw_sketch: sketch size must be at least 1, got " + std::to_string(spec.m));
  }
  SketchOperator op;
  op.kind_ = spec.kind;
  op.n_ = n;
  op.n_pad_ = n;
  op.m_ = spec.kind == SketchKind::Identity ? n : spec.m;
  CounterRng rng(spec.seed, static_cast<std::uint64_t>(spec.kind));
  switch (spec.kind) {
    case SketchKind::Identity:
      break;
    case SketchKind::SJLT:
      op.rows_.resize(n);
      op.signs_.resize(n);
      for (std::int64_t j = 0; j < n; ++j) {
        op.rows_[j] = static_cast<std::uint32_t>(rng.uniform_index(static_cast<std::uint64_t>(op.m_)));
        op.signs_[j] = static_cast<std::int8_t>(rng.rademacher());
      }
      break;
    case SketchKind::SRHT:
      op.n_pad_ = static_cast<std::int64_t>(next_power_of_two(static_cast<std::size_t>(n)));
      op.signs_.resize(n);
      for (std::int64_t j = 0; j < n; ++j) op.signs_[j] = static_cast<std::int8_t>(rng.rademacher());
      op.rows_.resize(op.m_);
      for (std::int64_t r = 0; r < op.m_; ++r) {
        op.rows_[r] = static_cast<std::uint32_t>(rng.uniform_index(static_cast<std::uint64_t>(op.n_pad_)));
      }
      break;
    case SketchKind::RRS:
      op.rows_.resize(op.m_);
      for (std::int64_t r = 0; r < op.m_; ++r) {
        op.rows_[r] = static_cast<std::uint32_t>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      }
      break;
  }
  return op;
}

/// Builds an SJLT operator from an explicit realization (column -> row, sign).
inline SketchOperator make_sjlt(std::int64_t m, std::vector<std::uint32_t> rows,
                                std::vector<std::int8_t> signs) {
  if (m < 1) throw InvalidSpec("make_sjlt: sketch size must be at least 1");
  if (rows.size() != signs.size() || rows.empty()) throw InvalidSpec("make_sjlt: bad realization");
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] >= static_cast<std::uint64_t>(m) || (signs[j] != 1 && signs[j] != -1)) {
      throw InvalidSpec("make_sjlt: entry out of range");
    }
  }
  SketchOperator op;
  op.kind_ = SketchKind::SJLT;
  op.m_ = m;
  op.n_ = static_cast<std::int64_t>(rows.size());
  op.n_pad_ = op.n_;
  op.rows_ = std::move(rows);
  op.signs_ = std::move(signs);
  return op;
}

inline Matrix apply(const SketchOperator& op, const Matrix& b) { return op.apply(b); }

/// ||M^T (S^T S - I) M||_2 given the sketched product SM and M itself.
inline double embedding_quality_from_sketched(const Matrix& sketched, const Matrix& m) {
  if (sketched.cols() != m.cols()) throw DimensionMismatch("embedding_quality: column mismatch");
  Matrix deviation = sketched.transpose() * sketched - m.transpose() * m;
  deviation = 0.5 * (deviation + deviation.transpose()).eval();
  return symmetric_spectral_norm(deviation);
}

/// Spectral deviation ||M^T (S^T S - I) M||_2 of the sketch on the column
/// space of M. With M = B H^{-1/2} this equals ||C_S - I||_2.
inline double embedding_quality(const SketchOperator& op, const Matrix& m) {
  return embedding_quality_from_sketched(op.apply(m), m);
}

}  // namespace sketchnewton
