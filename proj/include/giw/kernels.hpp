#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "giw/errors.hpp"

namespace giw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// How the median heuristic turns pairwise distances into a bandwidth.
enum class MedianMode {
  squared,   // gamma = 1 / median(||a - b||^2)
  distance,  // sigma = median(||a - b||), gamma = 1 / (2 sigma^2)
};

struct KernelConfig {
  std::optional<double> gamma;  // empty: median heuristic on the reference sample
  double ridge = 1e-5;
  MedianMode median_mode = MedianMode::squared;
};

inline constexpr Eigen::Index kGramRowBlock = 64;

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index d = 0; d < a.cols(); ++d) {
    const double diff = a(i, d) - b(j, d);
    s += diff * diff;
  }
  return s;
}

/// K[i][j] = exp(-gamma * ||a_i - b_j||^2). Rows are filled block by block; each
/// entry is an independent fixed-order sum, so any block schedule gives the same bits.
inline Matrix rbf_gram(const Matrix& a, const Matrix& b, double gamma) {
  if (a.cols() != b.cols()) throw ShapeError("rbf_gram operands differ in feature width");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("rbf gamma must be positive and finite");
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index start = 0; start < a.rows(); start += kGramRowBlock) {
    const Eigen::Index stop = std::min(a.rows(), start + kGramRowBlock);
    for (Eigen::Index i = start; i < stop; ++i) {
      for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = std::exp(-gamma * squared_distance(a, i, b, j));
    }
  }
  return k;
}

inline double rbf(const Vector& x, const Vector& y, double gamma) { return std::exp(-gamma * (x - y).squaredNorm()); }

inline double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline double median_heuristic(const Matrix& x, MedianMode mode = MedianMode::squared) {
  if (x.rows() < 2) throw DegenerateInputError("median heuristic needs at least two rows");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(x.rows() * (x.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
      const double sq = squared_distance(x, i, x, j);
      d.push_back(mode == MedianMode::squared ? sq : std::sqrt(sq));
    }
  }
  const double med = median_of(std::move(d));
  if (!(med > 0.0)) throw DegenerateInputError("median pairwise distance is zero");
  return mode == MedianMode::squared ? 1.0 / med : 1.0 / (2.0 * med * med);
}

/// Concrete gamma for `config`, falling back to the median heuristic on `reference`.
inline double resolve_gamma(const KernelConfig& config, const Matrix& reference) {
  if (config.gamma) {
    if (!(*config.gamma > 0.0)) throw DomainError("kernel gamma must be positive");
    return *config.gamma;
  }
  return median_heuristic(reference, config.median_mode);
}

inline Matrix ridge_stabilize(Matrix k, double omega) {
  if (k.rows() != k.cols()) throw ShapeError("ridge_stabilize needs a square matrix");
  if (omega < 0.0) throw DomainError("ridge must be nonnegative");
  k.diagonal().array() += omega;
  return k;
}

}  // namespace giw
