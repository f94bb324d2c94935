#pragma once

// Monte-Carlo estimates of the test risk R(f), the importance-weighted
// objective J(f), and the generalized objective J_G(f) under a box-density
// spec. Support geometry, alpha and w* are exact; only the loss integrals are
// sampled.
//
// The in-training term of J_G weights training draws by p(x,y | s=1) / p_tr,
// i.e. w* / alpha, so that alpha * E_tr[(w*/alpha) l] + (1 - alpha) E_{s=0}[l]
// equals R(f) for every f.
//
// consistency_report draws the three samples jointly: each test draw reuses the
// paired training draw with probability min(1, p_te / p_tr) (a maximal
// coupling), and each out-of-training draw reuses the paired test draw when
// that lies outside the training support. Every sample keeps its exact
// marginal, the estimates become positively correlated, and
// sqrt(se_a^2 + se_b^2) overstates the spread of their difference.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "giw/errors.hpp"
#include "giw/format.hpp"
#include "giw/netcore.hpp"
#include "giw/ratio.hpp"
#include "giw/synth.hpp"

namespace giw {

/// Anything mapping a feature matrix to a logit matrix.
template <class F>
concept Classifier = requires(const F& f, const Matrix& x) {
  { f(x) } -> std::convertible_to<Matrix>;
};

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline Estimate mean_estimate(const Vector& v) {
  Estimate e;
  e.n = static_cast<std::size_t>(v.size());
  if (v.size() == 0) return e;
  e.mean = v.mean();
  if (v.size() > 1) {
    const double var = (v.array() - e.mean).square().sum() / static_cast<double>(v.size() - 1);
    e.se = std::sqrt(var / static_cast<double>(v.size()));
  }
  return e;
}

inline double combined_se(const Estimate& a, const Estimate& b) { return std::sqrt(a.se * a.se + b.se * b.se); }

inline double exact_alpha(const SupportSpec& spec) {
  double alpha = 0.0;
  for (const auto& b : spec.test) alpha += b.mass * overlap_with_train(spec, b) / b.area();
  return alpha;
}

inline constexpr std::size_t kMinOracleSamples = 1000;
inline constexpr Eigen::Index kOracleChunk = 8192;

namespace detail {

template <Classifier F>
Vector losses(const F& f, const Dataset& d) {
  Vector out(static_cast<Eigen::Index>(d.size()));
  for (Eigen::Index start = 0; start < out.size(); start += kOracleChunk) {
    const Eigen::Index len = std::min(kOracleChunk, out.size() - start);
    const Matrix logits = f(Matrix(d.features.middleRows(start, len)));
    const std::span<const int> labels(d.labels.data() + start, static_cast<std::size_t>(len));
    out.segment(start, len) = cross_entropy(logits, labels);
  }
  return out;
}

inline void require_samples(std::size_t n) {
  if (n < kMinOracleSamples) throw DomainError("Monte-Carlo oracle needs at least 1000 samples");
}

}  // namespace detail

/// Draws from p(x, y | s = 0): test boxes restricted to the out-of-training region.
inline Dataset sample_out_of_training(const SupportSpec& spec, std::size_t n, std::uint64_t seed) {
  if (exact_alpha(spec) >= 1.0 - 1e-12) throw DomainError("spec has no out-of-training mass");
  std::mt19937_64 rng(seed);
  Dataset d;
  d.provenance = Provenance::test;
  d.features.resize(static_cast<Eigen::Index>(n), 2);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n;) {
    auto [x, y] = draw_from_boxes(spec.test, rng);
    if (in_train_support(spec, x, y)) continue;
    d.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
    d.labels[i] = y;
    ++i;
  }
  return d;
}

template <Classifier F>
Estimate mc_risk(const F& f, const SupportSpec& spec, std::size_t n, std::uint64_t seed) {
  detail::require_samples(n);
  return mean_estimate(detail::losses(f, sample(spec, Side::test, n, seed)));
}

template <Classifier F>
Estimate mc_iw_objective(const F& f, const SupportSpec& spec, std::size_t n, std::uint64_t seed) {
  detail::require_samples(n);
  const Dataset d = sample(spec, Side::train, n, seed);
  Vector v = detail::losses(f, d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    v(idx) *= true_ratio(spec, d.features.row(idx).transpose(), d.labels[i]).value();
  }
  return mean_estimate(v);
}

struct GiwEstimate {
  Estimate total;
  Estimate in_training;   // E_tr[(w*/alpha) l]
  Estimate out_training;  // E_{s=0}[l]
  double alpha = 1.0;
};

template <Classifier F>
GiwEstimate mc_giw_objective(const F& f, const SupportSpec& spec, std::size_t n, std::uint64_t seed) {
  detail::require_samples(n);
  GiwEstimate g;
  g.alpha = exact_alpha(spec);
  if (g.alpha > 0.0) {
    const Dataset d = sample(spec, Side::train, n, seed);
    Vector v = detail::losses(f, d);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      v(idx) *= true_ratio(spec, d.features.row(idx).transpose(), d.labels[i]).value() / g.alpha;
    }
    g.in_training = mean_estimate(v);
  }
  if (g.alpha < 1.0 - 1e-12) g.out_training = mean_estimate(detail::losses(f, sample_out_of_training(spec, n, seed)));
  const double a = g.alpha;
  g.total.mean = a * g.in_training.mean + (1.0 - a) * g.out_training.mean;
  g.total.se = std::sqrt(a * a * g.in_training.se * g.in_training.se +
                         (1.0 - a) * (1.0 - a) * g.out_training.se * g.out_training.se);
  g.total.n = n;
  return g;
}

/// Index-aligned samples from p_tr, p_te and p(x, y | s = 0).
struct CoupledSample {
  Dataset train;
  Dataset test;
  Dataset out_of_training;  // empty when alpha = 1
};

inline CoupledSample coupled_sample(const SupportSpec& spec, std::size_t n, std::uint64_t seed) {
  const bool has_oot = exact_alpha(spec) < 1.0 - 1e-12;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CoupledSample out;
  auto init = [n](Dataset& d, Provenance p) {
    d.provenance = p;
    d.features.resize(static_cast<Eigen::Index>(n), 2);
    d.labels.resize(n);
  };
  init(out.train, Provenance::train);
  init(out.test, Provenance::test);
  if (has_oot) init(out.out_of_training, Provenance::test);
  auto put = [](Dataset& d, std::size_t i, const Point2& x, int y) {
    d.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
    d.labels[i] = y;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto [x, y] = draw_from_boxes(spec.train, rng);
    put(out.train, i, x, y);

    Point2 tx = x;
    int ty = y;
    const double keep = density(spec, Side::test, x, y) / density(spec, Side::train, x, y);
    if (unit(rng) >= keep) {
      // residual (p_te - p_tr)_+ by rejection from p_te
      for (;;) {
        auto [z, c] = draw_from_boxes(spec.test, rng);
        const double accept = 1.0 - density(spec, Side::train, z, c) / density(spec, Side::test, z, c);
        if (unit(rng) < accept) {
          tx = z;
          ty = c;
          break;
        }
      }
    }
    put(out.test, i, tx, ty);

    if (has_oot) {
      Point2 ox = tx;
      int oy = ty;
      while (in_train_support(spec, ox, oy)) {
        std::tie(ox, oy) = draw_from_boxes(spec.test, rng);
      }
      put(out.out_of_training, i, ox, oy);
    }
  }
  return out;
}

struct RiskReport {
  std::string case_tag;
  std::size_t samples = 0;
  double alpha = 1.0;
  Estimate risk;
  Estimate iw;
  GiwEstimate giw;
  bool iw_expected_consistent = true;  // alpha == 1: expect J = R, else J < R
  double iw_gap_in_se = 0.0;           // (R - J) / combined SE
  double giw_gap_in_se = 0.0;          // (J_G - R) / combined SE
  bool iw_pass = false;
  bool giw_pass = false;

  bool pass() const { return iw_pass && giw_pass; }
  std::string iw_relation() const { return iw_expected_consistent ? "J≈R" : "J<R"; }
};

inline constexpr double kConsistencySeBound = 3.0;
inline constexpr double kInconsistencySeGap = 5.0;

template <Classifier F>
RiskReport consistency_report(const F& f, const SupportSpec& spec, std::size_t n, std::uint64_t seed,
                              std::string case_tag = {}) {
  RiskReport r;
  r.case_tag = case_tag.empty() ? spec.name : std::move(case_tag);
  r.samples = n;
  detail::require_samples(n);
  r.alpha = exact_alpha(spec);
  const CoupledSample cs = coupled_sample(spec, n, seed);
  const Vector l_tr = detail::losses(f, cs.train);
  const Vector l_te = detail::losses(f, cs.test);
  Vector wl(l_tr.size());
  for (std::size_t i = 0; i < cs.train.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    wl(idx) = true_ratio(spec, cs.train.features.row(idx).transpose(), cs.train.labels[i]).value() * l_tr(idx);
  }
  r.risk = mean_estimate(l_te);
  r.iw = mean_estimate(wl);
  r.giw.alpha = r.alpha;
  if (r.alpha > 0.0) r.giw.in_training = mean_estimate(wl / r.alpha);
  Vector total = wl;
  if (!cs.out_of_training.empty()) {
    const Vector l_oot = detail::losses(f, cs.out_of_training);
    r.giw.out_training = mean_estimate(l_oot);
    total += (1.0 - r.alpha) * l_oot;
  }
  r.giw.total = mean_estimate(total);

  auto z = [](double diff, double se) {
    if (se > 0.0) return diff / se;
    return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  };
  r.iw_expected_consistent = r.alpha >= 1.0 - 1e-12;
  r.iw_gap_in_se = z(r.risk.mean - r.iw.mean, combined_se(r.risk, r.iw));
  r.giw_gap_in_se = z(r.giw.total.mean - r.risk.mean, combined_se(r.risk, r.giw.total));
  r.iw_pass = r.iw_expected_consistent ? std::abs(r.iw_gap_in_se) <= kConsistencySeBound
                                       : r.iw_gap_in_se > kInconsistencySeGap;
  r.giw_pass = std::abs(r.giw_gap_in_se) <= kConsistencySeBound;
  return r;
}

/// Flat key=value record, one pair per line.
inline std::string to_key_value(const RiskReport& r) {
  std::ostringstream os;
  auto kv = [&os](const char* k, const std::string& v) { os << k << '=' << v << '\n'; };
  kv("case", r.case_tag);
  kv("samples", std::to_string(r.samples));
  kv("alpha", format_double(r.alpha));
  kv("R", format_double(r.risk.mean));
  kv("R_se", format_double(r.risk.se));
  kv("J", format_double(r.iw.mean));
  kv("J_se", format_double(r.iw.se));
  kv("J_G", format_double(r.giw.total.mean));
  kv("J_G_se", format_double(r.giw.total.se));
  kv("J_G_in_training", format_double(r.giw.in_training.mean));
  kv("J_G_out_of_training", format_double(r.giw.out_training.mean));
  kv("R_minus_J_in_se", format_double(r.iw_gap_in_se));
  kv("J_G_minus_R_in_se", format_double(r.giw_gap_in_se));
  os << r.iw_relation() << ": " << (r.iw_pass ? "pass" : "fail") << '\n';
  os << "J_G≈R: " << (r.giw_pass ? "pass" : "fail") << '\n';
  return os.str();
}

template <Classifier F>
double test_accuracy(const F& f, const SupportSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("accuracy needs at least one sample");
  const Dataset d = sample(spec, Side::test, n, seed);
  std::size_t hits = 0;
  for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(n); start += kOracleChunk) {
    const Eigen::Index len = std::min(kOracleChunk, static_cast<Eigen::Index>(n) - start);
    const auto pred = predict(f(Matrix(d.features.middleRows(start, len))));
    for (Eigen::Index i = 0; i < len; ++i) hits += pred[static_cast<std::size_t>(i)] == d.labels[static_cast<std::size_t>(start + i)];
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace giw
