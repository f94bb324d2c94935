#pragma once

// nu-parameterized one-class SVM solved in the dual with SMO pair updates:
//
//   min 0.5 a'Ka   s.t.  sum_i a_i = 1,  0 <= a_i <= 1/(nu n),
//   g(z) = sum_i a_i k(x_i, z) - rho.
//
// Scores are reported raw and as a support-density fraction in [0, 1]:
// (g(z) + rho) / max_train (g + rho), where 0 is the value of a point far from
// every support vector and 1 the densest training point.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "giw/errors.hpp"
#include "giw/kernels.hpp"

namespace giw {

struct OsvmOptions {
  double tolerance = 1e-9;  // maximal-violating-pair gap at termination
  long max_iterations = 10'000'000;
};

struct OsvmModel {
  Matrix support_vectors;
  Vector coefficients;  // dual values of the support vectors
  Vector dual;          // dual values of every training row
  double rho = 0.0;
  double nu = 0.5;
  double gamma = 1.0;
  double upper_bound = 0.0;  // 1 / (nu n)
  double kkt_violation = 0.0;
  double train_density_max = 0.0;  // max over training rows of g + rho
  long iterations = 0;
};

inline double osvm_score(const OsvmModel& model, const Vector& z) {
  if (z.size() != model.support_vectors.cols()) throw ShapeError("score input width mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    s += model.coefficients(i) * std::exp(-model.gamma * (model.support_vectors.row(i).transpose() - z).squaredNorm());
  }
  return s - model.rho;
}

inline Vector osvm_score(const OsvmModel& model, const Matrix& z) {
  if (z.cols() != model.support_vectors.cols()) throw ShapeError("score input width mismatch");
  return rbf_gram(z, model.support_vectors, model.gamma) * model.coefficients - Vector::Constant(z.rows(), model.rho);
}

inline OsvmModel osvm_fit(const Matrix& z, double nu, double gamma, const OsvmOptions& opt = {}) {
  const Eigen::Index n = z.rows();
  if (n < 2) throw DomainError("one-class SVM needs at least two rows");
  if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("nu must lie in (0, 1]");
  if (nu * static_cast<double>(n) < 1.0 - 1e-12) throw DomainError("nu * n < 1 leaves the dual infeasible");

  OsvmModel model;
  model.nu = nu;
  model.gamma = gamma;
  const double c = 1.0 / (nu * static_cast<double>(n));
  model.upper_bound = c;

  const Matrix k = rbf_gram(z, z, gamma);

  // Feasible start: fill coordinates to the bound in order until the mass reaches one.
  Vector a = Vector::Zero(n);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < n && remaining > 0.0; ++i) {
    a(i) = std::min(c, remaining);
    remaining -= a(i);
  }
  Vector g = k * a;

  auto at_upper = [&](Eigen::Index i) { return a(i) >= c; };
  auto at_lower = [&](Eigen::Index i) { return a(i) <= 0.0; };

  long it = 0;
  double gap = 0.0;
  for (; it < opt.max_iterations; ++it) {
    // Move mass from the largest-gradient coordinate that can shrink to the
    // smallest-gradient coordinate that can grow.
    Eigen::Index up = -1, down = -1;
    double g_up = std::numeric_limits<double>::infinity();
    double g_down = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!at_upper(i) && g(i) < g_up) {
        g_up = g(i);
        up = i;
      }
      if (!at_lower(i) && g(i) > g_down) {
        g_down = g(i);
        down = i;
      }
    }
    gap = (up < 0 || down < 0) ? 0.0 : g_down - g_up;
    if (gap <= opt.tolerance) break;

    const double curvature = k(up, up) + k(down, down) - 2.0 * k(up, down);
    double t = std::min(c - a(up), a(down));
    if (curvature > 1e-15) t = std::min(t, gap / curvature);
    if (!(t > 0.0)) break;
    a(up) += t;
    a(down) -= t;
    if (c - a(up) < 1e-15) a(up) = c;
    if (a(down) < 1e-15) a(down) = 0.0;
    g += t * (k.col(up) - k.col(down));
  }
  model.iterations = it;
  model.kkt_violation = std::max(gap, 0.0);

  // rho: gradient on free coordinates, else the middle of the feasible interval.
  double free_sum = 0.0;
  int free_count = 0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a(i) > 0.0 && a(i) < c) {
      free_sum += g(i);
      ++free_count;
    } else if (a(i) >= c) {
      lo = std::max(lo, g(i));
    } else {
      hi = std::min(hi, g(i));
    }
  }
  if (free_count > 0) {
    model.rho = free_sum / free_count;
  } else if (std::isfinite(lo) && std::isfinite(hi)) {
    model.rho = 0.5 * (lo + hi);
  } else {
    model.rho = std::isfinite(lo) ? lo : hi;
  }

  model.dual = a;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a(i) > 0.0) sv.push_back(i);
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), z.cols());
  model.coefficients.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = z.row(sv[s]);
    model.coefficients(static_cast<Eigen::Index>(s)) = a(sv[s]);
  }
  model.train_density_max = g.maxCoeff();
  return model;
}

/// Support-density fraction of each raw score, clipped to [0, 1].
inline Vector rescale_scores(const OsvmModel& model, const Vector& raw) {
  if (!(model.train_density_max > 0.0)) throw NumericError("one-class model has no positive training density");
  return ((raw.array() + model.rho) / model.train_density_max).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

/// Fixed cut on the rescaled axis, or `automatic` for the widest-gap midpoint.
struct SplitThreshold {
  std::optional<double> value;

  static SplitThreshold automatic() { return {}; }
  static SplitThreshold fixed(double v) { return {v}; }
  bool is_automatic() const { return !value.has_value(); }
};

struct SplitResult {
  std::vector<std::size_t> in_training;      // D_v1
  std::vector<std::size_t> out_of_training;  // D_v2
  double alpha_hat = 1.0;
  double threshold = 0.0;
  Vector scores;      // rescaled scores used for the cut
  Vector raw_scores;  // empty when the caller only supplied rescaled scores
};

/// Midpoint of the widest gap in the sorted scores, with 0 (no support) as an
/// extra anchor so a batch lying entirely in-support stays unsplit.
inline double widest_gap_threshold(const Vector& scores) {
  std::vector<double> s(scores.data(), scores.data() + scores.size());
  s.push_back(0.0);
  std::sort(s.begin(), s.end());
  double best_gap = -1.0;
  double cut = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double gap = s[i + 1] - s[i];
    if (gap > best_gap) {
      best_gap = gap;
      cut = 0.5 * (s[i] + s[i + 1]);
    }
  }
  return cut;
}

/// Index i goes to D_v1 iff scores[i] > threshold.
inline SplitResult split_validation(const Vector& scores, const SplitThreshold& threshold) {
  if (scores.size() == 0) throw DomainError("split_validation needs at least one score");
  SplitResult out;
  out.scores = scores;
  out.threshold = threshold.is_automatic() ? widest_gap_threshold(scores) : *threshold.value;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    (scores(i) > out.threshold ? out.in_training : out.out_of_training).push_back(static_cast<std::size_t>(i));
  }
  out.alpha_hat = static_cast<double>(out.in_training.size()) / static_cast<double>(scores.size());
  return out;
}

}  // namespace giw
