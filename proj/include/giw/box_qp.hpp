#pragma once

// minimize 0.5 x'Hx - c'x  subject to  lo <= x_i <= hi,  H symmetric PSD.
//
// Gradient projection with an Armijo search along the projection arc, followed
// on each iteration by a Newton step restricted to the free coordinates. The
// subspace step makes the method terminate once the active set settles, which
// plain projected gradient does not do on the ill-conditioned Gram matrices
// kernel mean matching produces.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "giw/errors.hpp"

namespace giw {

struct BoxQpOptions {
  int max_iterations = 10000;
  double objective_tolerance = 1e-10;
  double kkt_tolerance = 1e-9;
  double accept_kkt = 1e-6;  // a stalled objective counts as converged only below this residual
};

struct BoxQpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd project_box(Eigen::VectorXd x, double lo, double hi) { return x.cwiseMax(lo).cwiseMin(hi); }

inline double quadratic(const Eigen::MatrixXd& h, const Eigen::VectorXd& c, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(h * x) - c.dot(x);
}

}  // namespace detail

/// Infinity norm of x - P(x - grad): zero exactly at a KKT point.
inline double box_kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& grad, double lo, double hi) {
  if (x.size() == 0) return 0.0;
  return (x - detail::project_box(x - grad, lo, hi)).cwiseAbs().maxCoeff();
}

inline BoxQpResult solve_box_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& c, double lo, double hi,
                                Eigen::VectorXd x0, const BoxQpOptions& opt = {}) {
  using Eigen::VectorXd;
  const Eigen::Index n = c.size();
  if (h.rows() != n || h.cols() != n || x0.size() != n) throw ShapeError("box QP operands disagree in size");
  if (lo > hi) throw DomainError("box QP lower bound exceeds upper bound");

  BoxQpResult out;
  VectorXd x = detail::project_box(std::move(x0), lo, hi);
  VectorXd g = h * x - c;
  double f = detail::quadratic(h, c, x);

  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it;
    const double residual = box_kkt_residual(x, g, lo, hi);
    if (residual <= opt.kkt_tolerance) {
      out.converged = true;
      break;
    }

    // Projected gradient step, initial length from the exact line minimizer.
    const double curvature = g.dot(h * g);
    double t = curvature > 0.0 ? g.squaredNorm() / curvature : 1.0;
    VectorXd xn = x;
    double fn = f;
    for (int k = 0; k < 60; ++k) {
      VectorXd trial = detail::project_box(x - t * g, lo, hi);
      const double ft = detail::quadratic(h, c, trial);
      if (ft <= f + 1e-4 * g.dot(trial - x)) {
        xn = std::move(trial);
        fn = ft;
        break;
      }
      t *= 0.5;
    }

    // Newton step on the coordinates strictly inside the box.
    VectorXd gn = h * xn - c;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (xn(i) > lo && xn(i) < hi) free.push_back(i);
    }
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd hff(nf, nf);
      VectorXd gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf(a) = gn(free[a]);
        for (Eigen::Index b = 0; b < nf; ++b) hff(a, b) = h(free[a], free[b]);
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hff);
      if (ldlt.info() == Eigen::Success) {
        VectorXd df = ldlt.solve(-gf);
        if (df.allFinite()) {
          VectorXd d = VectorXd::Zero(n);
          for (Eigen::Index a = 0; a < nf; ++a) d(free[a]) = df(a);
          double s = 1.0;
          for (int k = 0; k < 40; ++k) {
            VectorXd trial = detail::project_box(xn + s * d, lo, hi);
            const double ft = detail::quadratic(h, c, trial);
            if (ft <= fn + 1e-4 * gn.dot(trial - xn)) {
              xn = std::move(trial);
              fn = ft;
              break;
            }
            s *= 0.5;
          }
        }
      }
    }

    const double change = std::abs(f - fn);
    x = std::move(xn);
    f = fn;
    g = h * x - c;
    if (change <= opt.objective_tolerance * std::max(1.0, std::abs(f)) &&
        box_kkt_residual(x, g, lo, hi) <= opt.accept_kkt) {
      out.iterations = it + 1;
      out.converged = true;
      break;
    }
  }

  out.x = std::move(x);
  out.objective = detail::quadratic(h, c, out.x);
  out.kkt_residual = box_kkt_residual(out.x, h * out.x - c, lo, hi);
  return out;
}

}  // namespace giw
