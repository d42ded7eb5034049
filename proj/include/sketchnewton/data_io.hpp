#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "sketchnewton/errors.hpp"
#include "sketchnewton/linalg.hpp"
#include "sketchnewton/rng.hpp"

namespace sketchnewton {

/// Dense feature matrix with one real label per row.
struct Dataset {
  Matrix features;
  Vector labels;

  Eigen::Index rows() const noexcept { return features.rows(); }
  Eigen::Index feature_count() const noexcept { return features.cols(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline double parse_real(std::string_view token, std::size_t line, const char* what) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

inline std::string format_real(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

}  // namespace detail

/// Parses LIBSVM text: "label idx:val idx:val ...", 1-based strictly
/// increasing indices, '#' comments, blank lines skipped, LF or CRLF.
/// The feature count is the largest observed index unless declared.
inline Dataset parse_libsvm(std::istream& in, std::optional<Eigen::Index> declared_features = std::nullopt) {
  struct Entry {
    Eigen::Index row;
    Eigen::Index col;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<double> labels;
  Eigen::Index max_index = 0;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto row = static_cast<Eigen::Index>(labels.size());
    std::size_t pos = 0;
    auto next_token = [&]() -> std::string_view {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      const std::size_t start = pos;
      while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
      return line.substr(start, pos - start);
    };
    labels.push_back(detail::parse_real(next_token(), line_no, "label"));
    Eigen::Index previous = 0;
    for (std::string_view token = next_token(); !token.empty(); token = next_token()) {
      const auto colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "malformed feature token '" + std::string(token) + "'");
      }
      const std::string_view index_text = token.substr(0, colon);
      long long index = 0;
      const auto [ptr, ec] = std::from_chars(index_text.data(), index_text.data() + index_text.size(), index);
      if (ec != std::errc() || ptr != index_text.data() + index_text.size() || index < 1) {
        throw ParseError(line_no, "invalid feature index '" + std::string(index_text) + "'");
      }
      if (index <= previous) {
        throw ParseError(line_no, "feature indices must be strictly increasing (" + std::to_string(index) +
                                      " after " + std::to_string(previous) + ")");
      }
      previous = static_cast<Eigen::Index>(index);
      const double value = detail::parse_real(token.substr(colon + 1), line_no, "feature value");
      if (declared_features && previous > *declared_features) {
        throw ParseError(line_no, "feature index " + std::to_string(index) + " exceeds declared count " +
                                      std::to_string(*declared_features));
      }
      max_index = std::max(max_index, previous);
      entries.push_back({row, previous - 1, value});
    }
  }
  const Eigen::Index cols = declared_features.value_or(max_index);
  Dataset ds;
  ds.features = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), cols);
  ds.labels = Eigen::Map<const Vector>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  for (const Entry& e : entries) ds.features(e.row, e.col) = e.value;
  return ds;
}

/// Writes the nonzero entries of each row in LIBSVM format; values use the
/// shortest representation that parses back to the same double.
inline void write_libsvm(std::ostream& out, const Dataset& ds) {
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    out << detail::format_real(ds.labels[i]);
    for (Eigen::Index j = 0; j < ds.feature_count(); ++j) {
      const double v = ds.features(i, j);
      if (v != 0.0) out << ' ' << (j + 1) << ':' << detail::format_real(v);
    }
    out << '\n';
  }
}

/// Maps every label through `rule`; labels the rule does not cover raise UnmappedLabel.
inline Dataset binarize_labels(const Dataset& ds, const std::map<double, double>& rule) {
  Dataset out = ds;
  for (Eigen::Index i = 0; i < out.labels.size(); ++i) {
    const auto it = rule.find(out.labels[i]);
    if (it == rule.end()) {
      throw UnmappedLabel("no binary label assigned to " + detail::format_real(out.labels[i]) + " (row " +
                          std::to_string(i) + ")");
    }
    if (it->second != 1.0 && it->second != -1.0) throw UnmappedLabel("rule targets must be -1 or +1");
    out.labels[i] = it->second;
  }
  return out;
}

/// even -> +1, odd -> -1 for integer-valued labels.
inline Dataset binarize_parity(const Dataset& ds) {
  Dataset out = ds;
  for (Eigen::Index i = 0; i < out.labels.size(); ++i) {
    const double label = out.labels[i];
    if (label != std::floor(label)) {
      throw UnmappedLabel("parity rule needs integer labels, got " + detail::format_real(label));
    }
    out.labels[i] = std::fmod(std::abs(label), 2.0) == 0.0 ? 1.0 : -1.0;
  }
  return out;
}

/// Labels >= 0 -> +1, otherwise -1 (sign(0) counts as +1).
inline Dataset binarize_sign(const Dataset& ds) {
  Dataset out = ds;
  out.labels = ds.labels.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
  return out;
}

inline Dataset select_rows(const Dataset& ds, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.feature_count());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = ds.features.row(rows[k]);
    out.labels[static_cast<Eigen::Index>(k)] = ds.labels[rows[k]];
  }
  return out;
}

struct Split {
  Dataset train;
  Dataset test;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

/// Seeded random partition with floor(ratio * n) training rows.
inline Split train_test_split(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidParams("train_test_split: ratio must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(ds.rows());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  CounterRng rng(seed, 0x5b17);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  Split split;
  split.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  split.train = select_rows(ds, split.train_rows);
  split.test = select_rows(ds, split.test_rows);
  return split;
}

/// K[i][j] = (2 pi h)^{-p/2} exp(-||x2_i - x_j||^2 / (2h)) for rows x_j of
/// `x` (n x p) and x2_i of `x2` (n2 x p); returns n2 x n.
inline Matrix gaussian_kernel(const Matrix& x, const Matrix& x2, double h) {
  if (!(h > 0.0)) throw InvalidParams("gaussian_kernel: bandwidth must be positive");
  if (x.cols() != x2.cols()) throw DimensionMismatch("gaussian_kernel: feature dimensions differ");
  const double log_norm = -0.5 * static_cast<double>(x.cols()) * std::log(2.0 * 3.14159265358979323846 * h);
  const Vector sq = x.rowwise().squaredNorm();
  const Vector sq2 = x2.rowwise().squaredNorm();
  Matrix k = x2 * x.transpose();
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      const double dist2 = std::max(0.0, sq2[i] + sq[j] - 2.0 * k(i, j));
      k(i, j) = std::exp(log_norm - dist2 / (2.0 * h));
    }
  }
  return k;
}

enum class SpectrumKind { Polynomial, Exponential, Flat };

struct SyntheticSpec {
  Eigen::Index n = 100;
  Eigen::Index d = 10;
  SpectrumKind spectrum = SpectrumKind::Flat;
  double decay = 1.0;   ///< p for sigma_i = i^{-p}; rho for sigma_i = exp(-rho (i - 1))
  double scale = 1.0;   ///< multiplies every singular value
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (d < 1 || n < d) throw InvalidParams("synthetic: requires n >= d >= 1");
    if (spectrum != SpectrumKind::Flat && !(decay > 0.0)) throw InvalidParams("synthetic: decay must be positive");
    if (!(scale > 0.0)) throw InvalidParams("synthetic: scale must be positive");
    if (!(noise_sd >= 0.0)) throw InvalidParams("synthetic: noise_sd must be non-negative");
  }

  Vector singular_values() const {
    Vector s(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double k = static_cast<double>(i + 1);
      switch (spectrum) {
        case SpectrumKind::Polynomial: s[i] = std::pow(k, -decay); break;
        case SpectrumKind::Exponential: s[i] = std::exp(-decay * (k - 1.0)); break;
        case SpectrumKind::Flat: s[i] = 1.0; break;
      }
    }
    return scale * s;
  }
};

struct SyntheticData {
  Matrix a;
  Vector response;  ///< A x_true + noise
  Vector labels;    ///< sign(A x_true + noise), sign(0) = +1
  Vector x_true;
  Vector singular_values;
};

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
  return g;
}

/// A = U diag(sigma) V^T with U, V orthonormal factors from seeded Gaussian matrices.
inline SyntheticData synth_controlled_spectrum(const SyntheticSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, 0x51ed);
  const Matrix gu = gaussian_matrix(spec.n, spec.d, rng);
  const Matrix gv = gaussian_matrix(spec.d, spec.d, rng);
  const Matrix u = Eigen::HouseholderQR<Matrix>(gu).householderQ() * Matrix::Identity(spec.n, spec.d);
  const Matrix v = Eigen::HouseholderQR<Matrix>(gv).householderQ() * Matrix::Identity(spec.d, spec.d);
  SyntheticData out;
  out.singular_values = spec.singular_values();
  out.a = u * out.singular_values.asDiagonal() * v.transpose();
  out.x_true.resize(spec.d);
  for (Eigen::Index i = 0; i < spec.d; ++i) out.x_true[i] = rng.normal();
  out.response = out.a * out.x_true;
  for (Eigen::Index i = 0; i < spec.n; ++i) out.response[i] += spec.noise_sd * rng.normal();
  out.labels = out.response.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
  return out;
}

}  // namespace sketchnewton
