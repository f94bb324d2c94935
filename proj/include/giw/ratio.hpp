#pragma once

// Importance-weight estimators: kernel mean matching on mini-batch
// representations, (relative) unconstrained least-squares importance fitting,
// and the exact ratio of a box-density spec.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "giw/box_qp.hpp"
#include "giw/errors.hpp"
#include "giw/kernels.hpp"
#include "giw/synth.hpp"

namespace giw {

inline constexpr double kDefaultWeightBound = 50.0;

struct WeightVector {
  Vector weights;
  double bound = kDefaultWeightBound;
  double kkt_residual = 0.0;  // of the matching QP, when one was solved

  Eigen::Index size() const { return weights.size(); }
  double mean() const { return weights.size() ? weights.mean() : 0.0; }
};

/// Clip to [0, bound], rescale to mean one, clip again so the bound still holds.
inline Vector normalize_batch_weights(Vector w, double bound) {
  w = w.cwiseMax(0.0).cwiseMin(bound);
  const double m = w.size() ? w.mean() : 0.0;
  if (m > 0.0) w /= m;
  return w.cwiseMin(bound);
}

/// Kernel mean matching: weights on `ztr` whose embedded mean matches that of `zval`,
/// subject to 0 <= w_i <= bound. The QP is
///   min 0.5 w'(K + ridge I)w - kappa'w,  kappa_i = (m/n) sum_j k(ztr_i, zval_j),
/// which is the RKHS mean discrepancy scaled by m^2 / 2.
inline WeightVector kmm_match(const Matrix& ztr, const Matrix& zval, const KernelConfig& config,
                              double bound = kDefaultWeightBound, const BoxQpOptions& qp = {}) {
  if (ztr.rows() == 0 || zval.rows() == 0) throw DomainError("kmm_match needs nonempty samples");
  if (ztr.cols() != zval.cols()) throw ShapeError("kmm_match samples differ in width");
  if (bound < 0.0) throw DomainError("weight bound must be nonnegative");
  const Eigen::Index m = ztr.rows();
  WeightVector out;
  out.bound = bound;
  if (bound == 0.0) {
    out.weights = Vector::Zero(m);
    return out;
  }

  double gamma = 1.0;
  if (config.gamma) {
    gamma = resolve_gamma(config, ztr);
  } else {
    Matrix pooled(ztr.rows() + zval.rows(), ztr.cols());
    pooled << ztr, zval;
    for (const Matrix* ref : std::array<const Matrix*, 2>{&ztr, &pooled}) {
      try {
        gamma = median_heuristic(*ref, config.median_mode);
        break;
      } catch (const DegenerateInputError&) {
        // every value identical on this reference; keep looking, else unit bandwidth
      }
    }
  }

  const Matrix k = ridge_stabilize(rbf_gram(ztr, ztr, gamma), config.ridge);
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) throw NumericError("stabilized Gram matrix is not positive definite");
  const Vector kappa =
      rbf_gram(ztr, zval, gamma).rowwise().sum() * (static_cast<double>(m) / static_cast<double>(zval.rows()));

  const Vector start = Vector::Constant(m, std::min(1.0, bound));
  BoxQpResult res = solve_box_qp(k, kappa, 0.0, bound, start, qp);
  if (!res.x.allFinite()) throw NumericError("kernel mean matching diverged");
  out.weights = std::move(res.x);
  out.kkt_residual = res.kkt_residual;
  return out;
}

// ---------------------------------------------------------------------------
// Least-squares importance fitting

enum class RatioVariant { ulsif, rulsif };

struct RatioModel {
  Matrix centers;
  Vector theta;
  double gamma = 1.0;
  double lambda = 0.0;
  double eta = 0.0;
  RatioVariant variant = RatioVariant::ulsif;
};

struct LsifOptions {
  std::optional<double> lambda;  // empty: k-fold cross-validation over `lambda_grid`
  std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1.0};
  std::size_t n_centers = 100;
  std::size_t folds = 5;
  KernelConfig kernel;  // gamma empty: median heuristic on the training sample
  std::uint64_t seed = 0;
};

namespace detail {

struct LsifMoments {
  Matrix h;
  Vector mean_te;
};

inline LsifMoments lsif_moments(const Matrix& phi_tr, const Matrix& phi_te, double eta) {
  LsifMoments mo;
  mo.h = (phi_tr.transpose() * phi_tr) / static_cast<double>(phi_tr.rows());
  if (eta > 0.0) {
    mo.h = (1.0 - eta) * mo.h + eta * (phi_te.transpose() * phi_te) / static_cast<double>(phi_te.rows());
  }
  mo.mean_te = phi_te.colwise().mean().transpose();
  return mo;
}

inline Vector lsif_solve(const LsifMoments& mo, double lambda) {
  Matrix a = mo.h;
  a.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError("LSIF system is singular");
  Vector theta = llt.solve(mo.mean_te);
  if (!theta.allFinite()) throw NumericError("LSIF solution is not finite");
  return theta;
}

inline Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

inline std::vector<Eigen::Index> shuffled_rows(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

inline double choose_lambda(const Matrix& phi_tr, const Matrix& phi_te, double eta, const LsifOptions& opt,
                            std::mt19937_64& rng) {
  const auto folds =
      static_cast<Eigen::Index>(std::min<std::size_t>({opt.folds, static_cast<std::size_t>(phi_tr.rows()),
                                                       static_cast<std::size_t>(phi_te.rows())}));
  if (folds < 2) return opt.lambda_grid[opt.lambda_grid.size() / 2];
  const auto perm_tr = shuffled_rows(phi_tr.rows(), rng);
  const auto perm_te = shuffled_rows(phi_te.rows(), rng);
  auto fold_of = [folds](std::size_t pos) { return static_cast<Eigen::Index>(pos) % folds; };

  double best_lambda = opt.lambda_grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double lambda : opt.lambda_grid) {
    double score = 0.0;
    for (Eigen::Index f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> fit_tr, held_tr, fit_te, held_te;
      for (std::size_t p = 0; p < perm_tr.size(); ++p) (fold_of(p) == f ? held_tr : fit_tr).push_back(perm_tr[p]);
      for (std::size_t p = 0; p < perm_te.size(); ++p) (fold_of(p) == f ? held_te : fit_te).push_back(perm_te[p]);
      const Vector theta =
          lsif_solve(lsif_moments(take_rows(phi_tr, fit_tr), take_rows(phi_te, fit_te), eta), lambda);
      const LsifMoments held = lsif_moments(take_rows(phi_tr, held_tr), take_rows(phi_te, held_te), eta);
      score += 0.5 * theta.dot(held.h * theta) - held.mean_te.dot(theta);
    }
    if (score < best_score) {
      best_score = score;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace detail

/// Fits the eta-relative ratio p_te / (eta p_te + (1 - eta) p_tr); eta = 0 is plain uLSIF.
inline RatioModel rulsif_fit(const Matrix& xtr, const Matrix& xte, double eta, const LsifOptions& opt = {}) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("eta must lie in [0, 1]");
  if (xtr.rows() == 0 || xte.rows() == 0) throw DomainError("LSIF needs nonempty samples");
  if (xtr.cols() != xte.cols()) throw ShapeError("LSIF samples differ in width");
  if (opt.lambda && !(*opt.lambda > 0.0)) throw DomainError("lambda must be positive");
  if (opt.n_centers == 0) throw DomainError("at least one center is required");

  std::mt19937_64 rng(opt.seed);
  RatioModel model;
  model.eta = eta;
  model.variant = eta == 0.0 ? RatioVariant::ulsif : RatioVariant::rulsif;

  const auto n_centers = std::min<Eigen::Index>(static_cast<Eigen::Index>(opt.n_centers), xte.rows());
  auto perm = detail::shuffled_rows(xte.rows(), rng);
  perm.resize(static_cast<std::size_t>(n_centers));
  model.centers = detail::take_rows(xte, perm);

  if (opt.kernel.gamma) {
    model.gamma = resolve_gamma(opt.kernel, xtr);
  } else {
    try {
      model.gamma = median_heuristic(xtr, opt.kernel.median_mode);
    } catch (const DegenerateInputError&) {
      model.gamma = 1.0;
    }
  }

  const Matrix phi_tr = rbf_gram(xtr, model.centers, model.gamma);
  const Matrix phi_te = rbf_gram(xte, model.centers, model.gamma);
  model.lambda = opt.lambda ? *opt.lambda : detail::choose_lambda(phi_tr, phi_te, eta, opt, rng);
  model.theta = detail::lsif_solve(detail::lsif_moments(phi_tr, phi_te, eta), model.lambda);
  return model;
}

inline RatioModel ulsif_fit(const Matrix& xtr, const Matrix& xte, const LsifOptions& opt = {}) {
  return rulsif_fit(xtr, xte, 0.0, opt);
}

/// Unclipped kernel expansion sum_l theta_l k(x, c_l) for every row of `x`.
inline Vector ratio_expansion(const RatioModel& model, const Matrix& x) {
  if (x.cols() != model.centers.cols()) throw ShapeError("ratio input width mismatch");
  return rbf_gram(x, model.centers, model.gamma) * model.theta;
}

/// Estimated ratio, negative outputs clipped to zero.
inline Vector ratio_eval(const RatioModel& model, const Matrix& x) { return ratio_expansion(model, x).cwiseMax(0.0); }

inline double ratio_eval(const RatioModel& model, const Vector& x) {
  return ratio_eval(model, Matrix(x.transpose()))(0);
}

// ---------------------------------------------------------------------------

/// Exact w*(x, y) = p_te / p_tr; empty off the training support.
inline std::optional<double> true_ratio(const SupportSpec& spec, const Point2& x, int y) {
  const double ptr = density(spec, Side::train, x, y);
  if (ptr <= 0.0) return std::nullopt;
  return density(spec, Side::test, x, y) / ptr;
}

}  // namespace giw
