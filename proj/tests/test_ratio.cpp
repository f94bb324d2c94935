#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "giw/box_qp.hpp"
#include "giw/ratio.hpp"

using namespace giw;

namespace {

Matrix gaussian(int n, double mean, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(mean, 1.0);
  Matrix x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = g(rng);
  return x;
}

// Exact box-QP minimizer by enumerating every (lower, upper, free) assignment.
Vector enumerate_box_qp(const Matrix& h, const Vector& c, double lo, double hi) {
  const int n = static_cast<int>(c.size());
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  double best = std::numeric_limits<double>::infinity();
  Vector best_x;
  for (int code = 0; code < total; ++code) {
    std::vector<int> state(n);
    int rest = code;
    for (int i = 0; i < n; ++i) {
      state[i] = rest % 3;
      rest /= 3;
    }
    Vector x = Vector::Zero(n);
    std::vector<int> freeidx;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) x(i) = lo;
      else if (state[i] == 1) x(i) = hi;
      else freeidx.push_back(i);
    }
    if (!freeidx.empty()) {
      const int nf = static_cast<int>(freeidx.size());
      Matrix hff(nf, nf);
      Vector rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs(a) = c(freeidx[a]);
        for (int j = 0; j < n; ++j) {
          if (state[j] != 2) rhs(a) -= h(freeidx[a], j) * x(j);
        }
        for (int b = 0; b < nf; ++b) hff(a, b) = h(freeidx[a], freeidx[b]);
      }
      const Vector xf = hff.ldlt().solve(rhs);
      bool inside = true;
      for (int a = 0; a < nf; ++a) {
        if (xf(a) < lo - 1e-12 || xf(a) > hi + 1e-12) inside = false;
        x(freeidx[a]) = xf(a);
      }
      if (!inside) continue;
    }
    const Vector g = h * x - c;
    bool kkt = true;
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0 && g(i) < -1e-9) kkt = false;
      if (state[i] == 1 && g(i) > 1e-9) kkt = false;
    }
    if (!kkt) continue;
    const double f = 0.5 * x.dot(h * x) - c.dot(x);
    if (f < best) {
      best = f;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace

TEST(BoxQp, MatchesEnumerationOnRandomProblems) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) a(i, j) = g(rng);
    const Matrix h = a * a.transpose() + 0.01 * Matrix::Identity(6, 6);
    Vector c(6);
    for (int i = 0; i < 6; ++i) c(i) = 3.0 * g(rng);
    const auto res = solve_box_qp(h, c, 0.0, 2.0, Vector::Ones(6));
    EXPECT_TRUE(res.converged);
    EXPECT_LE(res.kkt_residual, 1e-6);
    EXPECT_LT((res.x - enumerate_box_qp(h, c, 0.0, 2.0)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(BoxQp, RejectsMismatchedSizes) {
  EXPECT_THROW(solve_box_qp(Matrix::Identity(3, 3), Vector::Ones(2), 0.0, 1.0, Vector::Ones(2)), ShapeError);
  EXPECT_THROW(solve_box_qp(Matrix::Identity(2, 2), Vector::Ones(2), 1.0, 0.0, Vector::Ones(2)), DomainError);
}

TEST(Kmm, IdenticalSamplesGiveUnitWeights) {
  const Matrix z = gaussian(60, 0.0, 1);
  const auto w = kmm_match(z, z, {});
  EXPECT_LT((w.weights - Vector::Ones(60)).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Kmm, SameDistributionMeanNearOne) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto w = kmm_match(gaussian(128, 0.0, 10 + s), gaussian(128, 0.0, 20 + s), {});
    EXPECT_GE(w.mean(), 0.9);
    EXPECT_LE(w.mean(), 1.1);
    EXPECT_LE(w.kkt_residual, 1e-6);
  }
}

TEST(Kmm, MatchesExactQpOnTwoClusters) {
  // three training points near 0, three near 5; validation only near 0
  Matrix ztr(6, 1), zval(3, 1);
  ztr << -0.2, 0.1, 0.3, 4.8, 5.0, 5.3;
  zval << -0.1, 0.0, 0.2;
  KernelConfig cfg;
  cfg.gamma = 0.5;
  const double bound = 50.0;
  const auto w = kmm_match(ztr, zval, cfg, bound);

  const Matrix h = ridge_stabilize(rbf_gram(ztr, ztr, 0.5), cfg.ridge);
  const Vector kappa = rbf_gram(ztr, zval, 0.5).rowwise().sum() * (6.0 / 3.0);
  const Vector exact = enumerate_box_qp(h, kappa, 0.0, bound);
  EXPECT_LT((w.weights - exact).cwiseAbs().maxCoeff(), 1e-6);
  for (int i = 3; i < 6; ++i) EXPECT_LT(w.weights(i), 1e-3);
  EXPECT_GT(w.weights.head(3).sum(), 5.0);
}

TEST(Kmm, ZeroBoundGivesZeroWeights) {
  const auto w = kmm_match(gaussian(10, 0.0, 1), gaussian(10, 1.0, 2), {}, 0.0);
  EXPECT_EQ(w.weights.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Kmm, WeightsStayInBox) {
  const auto w = kmm_match(gaussian(80, 0.0, 3), gaussian(20, 2.5, 4), {}, 5.0);
  EXPECT_GE(w.weights.minCoeff(), 0.0);
  EXPECT_LE(w.weights.maxCoeff(), 5.0);
}

TEST(Kmm, DegenerateRepresentationFallsBack) {
  // every training loss identical: the median heuristic falls back to the pooled sample
  const Matrix ztr = Matrix::Constant(8, 1, 0.7);
  const auto w = kmm_match(ztr, gaussian(4, 0.7, 5), {});
  EXPECT_TRUE(w.weights.allFinite());
}

TEST(Kmm, RejectsBadInputs) {
  EXPECT_THROW(kmm_match(Matrix(0, 1), gaussian(4, 0.0, 1), {}), DomainError);
  EXPECT_THROW(kmm_match(gaussian(4, 0.0, 1), Matrix::Zero(4, 2), {}), ShapeError);
}

TEST(NormalizeWeights, MeanOneThenBound) {
  Vector w(4);
  w << 1.0, 2.0, 3.0, 6.0;
  const Vector n = normalize_batch_weights(w, 50.0);
  EXPECT_NEAR(n.mean(), 1.0, 1e-15);
  Vector spike(4);
  spike << 0.0, 0.0, 0.0, 1.0;
  const Vector capped = normalize_batch_weights(spike, 2.0);
  EXPECT_EQ(capped.maxCoeff(), 2.0);
  EXPECT_EQ(normalize_batch_weights(Vector::Zero(3), 50.0).cwiseAbs().maxCoeff(), 0.0);
}

namespace {

double gaussian_ratio_rmse(int n, std::uint64_t seed) {
  LsifOptions opt;
  opt.seed = seed;
  const RatioModel m = ulsif_fit(gaussian(n, 0.0, 1000 + seed), gaussian(n, 0.5, 2000 + seed), opt);
  const Matrix grid = Vector::LinSpaced(201, -1.0, 1.0);
  const Vector est = ratio_eval(m, grid);
  double se = 0.0;
  for (int i = 0; i < grid.rows(); ++i) {
    const double truth = std::exp(0.5 * grid(i, 0) - 0.125);
    se += (est(i) - truth) * (est(i) - truth);
  }
  return std::sqrt(se / grid.rows());
}

}  // namespace

TEST(Ulsif, TracksAnalyticGaussianRatio) {
  for (std::uint64_t s = 0; s < 5; ++s) EXPECT_LE(gaussian_ratio_rmse(2000, s), 0.15) << "seed " << s;
}

TEST(Ulsif, ErrorShrinksWithSampleSize) {
  for (std::uint64_t s = 0; s < 5; ++s) EXPECT_LT(gaussian_ratio_rmse(2000, s), gaussian_ratio_rmse(250, s));
}

TEST(Ulsif, SameDistributionMeanNearOne) {
  const Matrix xtr = gaussian(500, 0.0, 1);
  const RatioModel m = ulsif_fit(xtr, gaussian(500, 0.0, 2));
  EXPECT_NEAR(ratio_eval(m, xtr).mean(), 1.0, 0.1);
}

TEST(Ulsif, HugeLambdaFlattensToZero) {
  LsifOptions opt;
  opt.lambda = 1e12;
  const RatioModel m = ulsif_fit(gaussian(100, 0.0, 1), gaussian(100, 0.5, 2), opt);
  EXPECT_LT(ratio_expansion(m, gaussian(20, 0.0, 3)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Ulsif, CentersComeFromTestSample) {
  LsifOptions opt;
  opt.n_centers = 30;
  const Matrix xte = gaussian(50, 0.5, 2);
  const RatioModel m = ulsif_fit(gaussian(80, 0.0, 1), xte, opt);
  ASSERT_EQ(m.centers.rows(), 30);
  ASSERT_EQ(m.theta.size(), 30);
  for (int i = 0; i < 30; ++i) EXPECT_LT((xte.rowwise() - m.centers.row(i)).rowwise().norm().minCoeff(), 1e-15);
}

TEST(Rulsif, EtaZeroIsUlsifBitForBit) {
  LsifOptions opt;
  opt.seed = 17;
  const Matrix xtr = gaussian(300, 0.0, 1), xte = gaussian(300, 0.5, 2);
  const RatioModel a = ulsif_fit(xtr, xte, opt);
  const RatioModel b = rulsif_fit(xtr, xte, 0.0, opt);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ((a.theta - b.theta).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(b.variant, RatioVariant::ulsif);
}

TEST(Rulsif, EtaOneIsFlat) {
  const Matrix xte = gaussian(500, 0.5, 2);
  const RatioModel m = rulsif_fit(gaussian(500, 0.0, 1), xte, 1.0);
  const Vector w = ratio_eval(m, xte);
  EXPECT_NEAR(w.mean(), 1.0, 0.05);
  EXPECT_LT((w.array() - 1.0).abs().mean(), 0.1);
}

TEST(Rulsif, IdenticalDistributionsNearOne) {
  for (double eta : {0.0, 0.3, 0.7}) {
    const Matrix xtr = gaussian(500, 0.0, 5);
    const RatioModel m = rulsif_fit(xtr, gaussian(500, 0.0, 6), eta);
    EXPECT_NEAR(ratio_eval(m, xtr).mean(), 1.0, 0.1) << "eta " << eta;
  }
  EXPECT_THROW(rulsif_fit(gaussian(5, 0.0, 1), gaussian(5, 0.0, 2), 1.5), DomainError);
}

TEST(TrueRatio, AlignedGridTopLeftIsHalf) {
  const SupportSpec spec = make_grid_example(GridVariant::aligned);
  const auto w = true_ratio(spec, Point2(0.5, 1.6), kRed);
  ASSERT_TRUE(w.has_value());
  EXPECT_DOUBLE_EQ(*w, 0.5);
}

TEST(TrueRatio, UndefinedOffTrainingSupport) {
  const SupportSpec spec = make_grid_example(GridVariant::checkerboard);
  EXPECT_FALSE(true_ratio(spec, Point2(1.6, 1.6), kBlue).has_value());
  // right label but wrong class on a training square is also off the joint support
  EXPECT_FALSE(true_ratio(spec, Point2(0.5, 1.6), kBlue).has_value());
}

TEST(TrueRatio, IdenticalSpecsGiveOne) {
  const SupportSpec spec = make_case_spec(SupportCase::i);
  EXPECT_DOUBLE_EQ(true_ratio(spec, Point2(0.5, 0.5), kBlue).value(), 1.0);
  EXPECT_DOUBLE_EQ(true_ratio(spec, Point2(0.5, 1.5), kRed).value(), 1.0);
}
