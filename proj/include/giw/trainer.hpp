#pragma once

// Generalized importance weighting: the validation split (pretrain, embed,
// one-class SVM, cut, alpha estimate) and the model update loop, plus the
// baselines that share its machinery (DIW, relative-ratio DIW, validation-only
// training, pretrain-then-validation training).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "giw/errors.hpp"
#include "giw/kernels.hpp"
#include "giw/netcore.hpp"
#include "giw/osvm.hpp"
#include "giw/ratio.hpp"
#include "giw/synth.hpp"

namespace giw {

enum class Method { giw, diw, rdiw, val_only, pretrain_val };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::giw: return "giw";
    case Method::diw: return "diw";
    case Method::rdiw: return "rdiw";
    case Method::val_only: return "val_only";
    case Method::pretrain_val: return "pretrain_val";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::giw, Method::diw, Method::rdiw, Method::val_only, Method::pretrain_val}) {
    if (s == to_string(m)) return m;
  }
  throw DomainError("unknown method '" + std::string(s) + "'");
}

/// What the weight estimator matches: per-example loss (-L) or normalized hidden output (-F).
enum class WeightRepresentation { loss, hidden };

/// What the one-class SVM sees: raw inputs or normalized hidden output.
enum class SplitRepresentation { raw, hidden };

/// Fixed input shift baked into the model before training.
enum class InputCentering { none, validation_mean };

struct OsvmSplitConfig {
  double nu = 0.5;
  std::optional<double> gamma;  // empty: gamma_scale * median heuristic on Z_tr
  double gamma_scale = 1.0;
  SplitThreshold threshold = SplitThreshold::automatic();
  SplitRepresentation representation = SplitRepresentation::hidden;
};

struct TrainConfig {
  Method method = Method::giw;
  int num_classes = 2;
  std::vector<int> hidden{32, 32};
  std::size_t batch_train = 64;  // m
  std::size_t batch_it = 16;     // n1
  std::size_t batch_oot = 16;    // n2
  int epochs = 200;              // T
  int pretrain_epochs = 10;
  AdamConfig adam;
  double val_oversampling = 1.0;  // minimum passes over each validation part per epoch
  std::optional<double> alpha_override;
  bool class_prior_shift = false;  // both terms see all of D_v
  WeightRepresentation weight_representation = WeightRepresentation::loss;
  KernelConfig kernel;
  double weight_bound = kDefaultWeightBound;
  bool normalize_weights = true;
  double rulsif_eta = 0.5;
  bool reinit_after_pretrain = false;
  OsvmSplitConfig osvm;
  InputCentering centering = InputCentering::none;
  std::uint64_t seed = 0;
  bool record_steps = false;
  bool record_trajectory = false;

  void validate() const {
    if (batch_train < 1 || epochs < 1) throw DomainError("batch size m and epochs T must be at least 1");
    if (pretrain_epochs < 0) throw DomainError("pretrain epochs must be nonnegative");
    if (!(val_oversampling >= 1.0)) throw DomainError("validation oversampling must be at least 1");
    if (alpha_override && !(*alpha_override >= 0.0 && *alpha_override <= 1.0))
      throw DomainError("alpha override must lie in [0, 1]");
    if (weight_bound < 0.0) throw DomainError("weight bound must be nonnegative");
  }
};

/// Settings for the 2D box toys: the one-class SVM sees raw inputs, inputs are
/// centered on the validation mean, and a larger step than the image defaults.
inline TrainConfig toy_train_config() {
  TrainConfig c;
  c.adam.learning_rate = 1e-2;
  c.osvm.representation = SplitRepresentation::raw;
  c.centering = InputCentering::validation_mean;
  return c;
}

/// Class-prior-shift mode: no split, both terms use all validation data, alpha fixed at 0.5.
inline TrainConfig class_prior_shift_mode(TrainConfig config, bool enable = true) {
  config.class_prior_shift = enable;
  if (enable) {
    config.alpha_override = 0.5;
  } else {
    config.alpha_override.reset();
  }
  return config;
}

struct EpochMetrics {
  int epoch = 0;
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double obj_term1 = 0.0;
  double obj_term2 = 0.0;
  double alpha_hat = 1.0;
};

/// Everything needed to recompute one step's objective.
struct StepRecord {
  int epoch = 0;
  double alpha = 1.0;
  Vector weights;
  Vector train_losses;
  Vector oot_losses;
  double objective = 0.0;
};

/// alpha * mean(w * l_tr) + (1 - alpha) * mean(l_oot); an empty part contributes zero.
inline double giw_batch_objective(double alpha, const Vector& w, const Vector& train_losses, const Vector& oot_losses) {
  double t1 = 0.0, t2 = 0.0;
  if (train_losses.size()) t1 = alpha * w.cwiseProduct(train_losses).mean();
  if (oot_losses.size()) t2 = (1.0 - alpha) * oot_losses.mean();
  return t1 + t2;
}

struct TrainResult {
  Mlp model;
  std::vector<EpochMetrics> epochs;
  std::vector<StepRecord> steps;
  std::vector<Parameters> trajectory;  // parameters after each epoch of the main phase
  std::optional<SplitResult> split;
  std::vector<std::string> warnings;
};

namespace detail {

/// Endless shuffled pass over [0, n); reshuffles on every wrap.
class IndexCycler {
 public:
  IndexCycler(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(&rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    if (order_.empty()) return out;
    out.reserve(count);
    while (out.size() < count) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), *rng_);
    pos_ = 0;
  }
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64* rng_;
};

inline std::size_t steps_per_epoch(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

inline std::size_t validation_batch(std::size_t requested, std::size_t available, double oversampling,
                                     std::size_t steps) {
  if (available == 0) return 0;
  const auto coverage =
      static_cast<std::size_t>(std::ceil(oversampling * static_cast<double>(available) / static_cast<double>(steps)));
  return std::max(std::min(requested, available), coverage);
}

inline double accuracy(const Mlp& model, const Dataset& d) {
  if (d.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto pred = predict(model(d.features));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.size(); ++i) hits += pred[i] == d.labels[i];
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

inline std::vector<int> gather_labels(const Dataset& d, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(d.labels[r]);
  return out;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kInit = 0, kPretrain = 1, kUpdate = 2, kValidationErm = 3, kReinit = 4 };

inline Mlp initial_model(const TrainConfig& cfg, const Dataset& dv, int input_dim, std::uint64_t stream = kInit) {
  std::vector<int> dims{input_dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.num_classes);
  Mlp model = Mlp::he_init(dims, stream_seed(cfg.seed, stream));
  if (cfg.centering == InputCentering::validation_mean && !dv.empty()) {
    model.set_input_offset(dv.features.colwise().mean().transpose());
  }
  return model;
}

/// Plain ERM for `epochs` epochs of ceil(n_ref / m) steps each, batches cycled from `data`.
inline std::vector<EpochMetrics> train_erm(Mlp& model, const Dataset& data, int epochs, std::size_t steps,
                                           const TrainConfig& cfg, std::mt19937_64& rng, const Dataset* eval,
                                           bool validation_objective) {
  std::vector<EpochMetrics> out;
  if (epochs <= 0) return out;
  if (data.empty()) throw DomainError("cannot train on an empty dataset");
  OptimizerState opt = make_optimizer(model, cfg.adam);
  IndexCycler cycler(data.size(), rng);
  const std::size_t batch = std::min(cfg.batch_train, data.size());
  for (int e = 0; e < epochs; ++e) {
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto rows = cycler.next(batch);
      const Matrix x = gather_rows(data.features, rows);
      const auto y = gather_labels(data, rows);
      const auto lg = weighted_cross_entropy(model, x, y, Vector::Ones(x.rows()));
      loss_sum += lg.loss;
      optimizer_step(model, lg.gradient, opt);
    }
    advance_epoch(opt);
    EpochMetrics m;
    m.epoch = e;
    m.test_acc = eval ? accuracy(model, *eval) : std::numeric_limits<double>::quiet_NaN();
    const double mean_loss = loss_sum / static_cast<double>(steps);
    m.obj_term1 = validation_objective ? 0.0 : mean_loss;
    m.obj_term2 = validation_objective ? mean_loss : 0.0;
    m.alpha_hat = validation_objective ? 0.0 : 1.0;
    out.push_back(m);
  }
  return out;
}

inline Matrix representation(const Mlp& model, const Matrix& x, const std::vector<int>& y, WeightRepresentation rep) {
  if (rep == WeightRepresentation::hidden) return normalize_rows(hidden_features(model, x));
  const Vector l = cross_entropy(model(x), y);
  return Matrix(l);
}

}  // namespace detail

/// Pretraining on D_tr alone, before the split.
inline void pretrain(Mlp& model, const Dataset& dtr, const TrainConfig& cfg) {
  std::mt19937_64 rng(detail::stream_seed(cfg.seed, detail::kPretrain));
  detail::train_erm(model, dtr, cfg.pretrain_epochs, detail::steps_per_epoch(dtr.size(), cfg.batch_train), cfg, rng,
                    nullptr, false);
}

/// Embeds D_tr and D_v, fits a one-class SVM on the training embedding, and cuts D_v.
inline SplitResult val_data_split(const Mlp& model, const Dataset& dtr, const Dataset& dv,
                                  const OsvmSplitConfig& config) {
  if (dv.empty()) throw DomainError("validation set is empty");
  if (dtr.size() < 2) throw DomainError("need at least two training rows to fit the one-class SVM");
  auto embed = [&](const Matrix& x) {
    return config.representation == SplitRepresentation::raw ? x : normalize_rows(hidden_features(model, x));
  };
  const Matrix ztr = embed(dtr.features);
  const Matrix zv = embed(dv.features);
  const double gamma = config.gamma ? *config.gamma : config.gamma_scale * median_heuristic(ztr);
  const OsvmModel svm = osvm_fit(ztr, config.nu, gamma);
  const Vector raw = osvm_score(svm, zv);
  SplitResult split = split_validation(rescale_scores(svm, raw), config.threshold);
  split.raw_scores = raw;
  return split;
}

/// Mini-batch loop minimizing alpha * mean(w l_tr) + (1 - alpha) * mean(l_oot).
inline TrainResult model_update(Mlp model, const Dataset& dtr, const Dataset& dv1, const Dataset& dv2,
                                double alpha_hat, const TrainConfig& cfg, const Dataset* eval = nullptr) {
  cfg.validate();
  if (dtr.empty()) throw DomainError("training set is empty");
  if (!(alpha_hat >= 0.0 && alpha_hat <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  TrainResult result;

  const bool weighted = cfg.method == Method::giw || cfg.method == Method::diw || cfg.method == Method::rdiw;
  double alpha = alpha_hat;
  if (weighted && dv1.empty()) {
    result.warnings.push_back("D_v1 is empty: training-data term dropped, optimizing the OOT term only");
    alpha = 0.0;
  }
  if (dv2.empty() && alpha < 1.0) {
    if (alpha == 0.0) throw DomainError("both validation parts are empty");
    result.warnings.push_back("D_v2 is empty: OOT term vanishes");
  }

  std::mt19937_64 rng(detail::stream_seed(cfg.seed, detail::kUpdate));
  OptimizerState opt = make_optimizer(model, cfg.adam);
  const std::size_t steps = detail::steps_per_epoch(dtr.size(), cfg.batch_train);
  const std::size_t n1 = detail::validation_batch(cfg.batch_it, dv1.size(), cfg.val_oversampling, steps);
  const std::size_t n2 = detail::validation_batch(cfg.batch_oot, dv2.size(), cfg.val_oversampling, steps);
  detail::IndexCycler cyc1(dv1.size(), rng);
  detail::IndexCycler cyc2(dv2.size(), rng);
  std::vector<std::size_t> order(dtr.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step_counter = 0;

  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double term1_sum = 0.0, term2_sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s, ++step_counter) {
      const std::size_t begin = s * cfg.batch_train;
      const std::size_t end = std::min(dtr.size(), begin + cfg.batch_train);
      const std::vector<std::size_t> tr_rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                             order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto v1_rows = cyc1.next(n1);
      const auto v2_rows = cyc2.next(n2);

      const Matrix xtr = detail::gather_rows(dtr.features, tr_rows);
      const auto ytr = detail::gather_labels(dtr, tr_rows);
      const Matrix xoot = detail::gather_rows(dv2.features, v2_rows);
      const auto yoot = detail::gather_labels(dv2, v2_rows);
      const auto m = static_cast<Eigen::Index>(tr_rows.size());
      const auto k = static_cast<Eigen::Index>(v2_rows.size());

      Vector w = Vector::Ones(m);
      if (weighted && !v1_rows.empty() && alpha > 0.0) {
        const Matrix xv1 = detail::gather_rows(dv1.features, v1_rows);
        const auto yv1 = detail::gather_labels(dv1, v1_rows);
        const Matrix ztr = detail::representation(model, xtr, ytr, cfg.weight_representation);
        const Matrix zv1 = detail::representation(model, xv1, yv1, cfg.weight_representation);
        if (cfg.method == Method::rdiw) {
          LsifOptions lo;
          lo.kernel = cfg.kernel;
          lo.seed = detail::stream_seed(cfg.seed, 1000 + step_counter);
          w = ratio_eval(rulsif_fit(ztr, zv1, cfg.rulsif_eta, lo), ztr);
        } else {
          w = kmm_match(ztr, zv1, cfg.kernel, cfg.weight_bound).weights;
        }
        w = cfg.normalize_weights ? normalize_batch_weights(std::move(w), cfg.weight_bound)
                                  : Vector(w.cwiseMax(0.0).cwiseMin(cfg.weight_bound));
      }

      const bool use_oot = k > 0 && alpha < 1.0;
      const Eigen::Index rows = (alpha > 0.0 ? m : 0) + (use_oot ? k : 0);
      Matrix x(rows, dtr.features.cols());
      std::vector<int> y;
      y.reserve(static_cast<std::size_t>(rows));
      Vector coeff(rows);
      if (alpha > 0.0) {
        x.topRows(m) = xtr;
        y.insert(y.end(), ytr.begin(), ytr.end());
        coeff.head(m) = (alpha * w) / static_cast<double>(m);
      }
      if (use_oot) {
        x.bottomRows(k) = xoot;
        y.insert(y.end(), yoot.begin(), yoot.end());
        coeff.tail(k).setConstant((1.0 - alpha) / static_cast<double>(k));
      }
      const LossAndGradient lg = coefficient_loss(model, x, y, coeff);

      const Vector ltr = alpha > 0.0 ? Vector(lg.per_example.head(m)) : cross_entropy(model(xtr), ytr);
      const Vector loot = use_oot ? Vector(lg.per_example.tail(k)) : Vector();
      const double t1 = alpha > 0.0 ? alpha * w.cwiseProduct(ltr).mean() : 0.0;
      const double t2 = use_oot ? (1.0 - alpha) * loot.mean() : 0.0;
      term1_sum += t1;
      term2_sum += t2;
      if (cfg.record_steps) {
        result.steps.push_back({e, alpha, w, ltr, loot, lg.loss});
      }
      optimizer_step(model, lg.gradient, opt);
    }
    advance_epoch(opt);
    EpochMetrics em;
    em.epoch = e;
    em.test_acc = eval ? detail::accuracy(model, *eval) : std::numeric_limits<double>::quiet_NaN();
    em.obj_term1 = term1_sum / static_cast<double>(steps);
    em.obj_term2 = term2_sum / static_cast<double>(steps);
    em.alpha_hat = alpha_hat;
    result.epochs.push_back(em);
    if (cfg.record_trajectory) result.trajectory.push_back(model.params());
  }
  result.model = std::move(model);
  return result;
}

/// Full GIW run: pretrain, split (or class-prior mode), model update.
/// `forced_split` replaces the one-class SVM cut when given.
inline TrainResult train_giw(const Dataset& dtr, const Dataset& dv, const TrainConfig& cfg,
                             const Dataset* eval = nullptr, std::optional<SplitResult> forced_split = {}) {
  cfg.validate();
  if (dv.empty()) throw DomainError("validation set is empty");
  Mlp model = detail::initial_model(cfg, dv, static_cast<int>(dtr.features.cols()));
  pretrain(model, dtr, cfg);

  SplitResult split;
  if (cfg.class_prior_shift) {
    split.in_training.resize(dv.size());
    std::iota(split.in_training.begin(), split.in_training.end(), std::size_t{0});
    split.out_of_training = split.in_training;
    split.alpha_hat = 0.5;
  } else if (forced_split) {
    split = std::move(*forced_split);
  } else {
    split = val_data_split(model, dtr, dv, cfg.osvm);
  }
  const double alpha = cfg.alpha_override ? *cfg.alpha_override : split.alpha_hat;
  const Dataset dv1 = dv.subset(split.in_training);
  const Dataset dv2 = dv.subset(split.out_of_training);

  if (cfg.reinit_after_pretrain) model = detail::initial_model(cfg, dv, static_cast<int>(dtr.features.cols()), detail::kReinit);
  TrainConfig update_cfg = cfg;
  update_cfg.method = Method::giw;
  TrainResult res = model_update(std::move(model), dtr, dv1, dv2, alpha, update_cfg, eval);
  res.split = std::move(split);
  return res;
}

inline TrainResult train_baseline(Method method, const Dataset& dtr, const Dataset& dv, const TrainConfig& cfg,
                                  const Dataset* eval = nullptr) {
  cfg.validate();
  if (dv.empty()) throw DomainError("validation set is empty");
  TrainConfig c = cfg;
  c.method = method;
  Mlp model = detail::initial_model(c, dv, static_cast<int>(dtr.features.cols()));
  const std::size_t steps = detail::steps_per_epoch(dtr.size(), c.batch_train);
  switch (method) {
    case Method::val_only:
    case Method::pretrain_val: {
      if (method == Method::pretrain_val) pretrain(model, dtr, c);
      std::mt19937_64 rng(detail::stream_seed(c.seed, detail::kValidationErm));
      TrainResult res;
      res.epochs = detail::train_erm(model, dv, c.epochs, steps, c, rng, eval, true);
      res.model = std::move(model);
      return res;
    }
    case Method::diw:
    case Method::rdiw: {
      pretrain(model, dtr, c);
      return model_update(std::move(model), dtr, dv, Dataset{}, 1.0, c, eval);
    }
    case Method::giw: break;
  }
  throw DomainError("train_baseline does not handle '" + to_string(method) + "'");
}

/// Dispatches to train_giw or train_baseline.
inline TrainResult train(Method method, const Dataset& dtr, const Dataset& dv, const TrainConfig& cfg,
                         const Dataset* eval = nullptr) {
  if (method == Method::giw) {
    TrainConfig c = cfg;
    c.method = Method::giw;
    return train_giw(dtr, dv, c, eval);
  }
  return train_baseline(method, dtr, dv, cfg, eval);
}

}  // namespace giw
