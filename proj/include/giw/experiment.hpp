#pragma once

// Experiment harness behind the command-line tool: a flat `key = value` config
// with [sections], seeded dataset construction, per-run artifacts (metrics,
// decision-boundary lattice, one-class score histogram), a summary table, and
// consistency reports from the Monte-Carlo oracle.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "giw/errors.hpp"
#include "giw/format.hpp"
#include "giw/oracle.hpp"
#include "giw/synth.hpp"
#include "giw/trainer.hpp"

namespace giw {

// ---------------------------------------------------------------------------
// Config text

/// Raw `section.key -> value` entries with their source lines.
class ConfigText {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static ConfigText parse(std::istream& in) {
    ConfigText c;
    std::string section;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string_view s = raw;
      if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
      s = trim(s);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(line, "unterminated section header");
        section = std::string(trim(s.substr(1, s.size() - 2)));
        if (section.empty()) throw ConfigError(line, "empty section name");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) throw ConfigError(line, "expected 'key = value'");
      const std::string key = std::string(trim(s.substr(0, eq)));
      if (key.empty()) throw ConfigError(line, "missing key before '='");
      const std::string full = section.empty() ? key : section + "." + key;
      if (c.entries_.count(full)) throw ConfigError(line, "duplicate key '" + full + "'");
      c.entries_[full] = {std::string(trim(s.substr(eq + 1))), line};
    }
    return c;
  }

  static ConfigText parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config file '" + path.string() + "'");
    return parse(in);
  }

  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  /// Every key that was never looked up is an error.
  void reject_unknown() const {
    for (const auto& [key, e] : entries_) {
      if (!used_.count(key)) throw ConfigError(e.line, "unknown key '" + key + "'");
    }
  }

 private:
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> used_;
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class F>
auto convert(const ConfigText::Entry& e, const std::string& key, F&& f) {
  try {
    return f(e.value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(e.line, key + ": " + ex.what());
  }
}

class Reader {
 public:
  explicit Reader(const ConfigText& c) : c_(c) {}

  void real(const std::string& key, double& out) const {
    if (auto* e = c_.find(key)) out = convert(*e, key, [](const std::string& v) { return parse_double(v); });
  }
  void integer(const std::string& key, long& out) const {
    if (auto* e = c_.find(key)) out = convert(*e, key, [](const std::string& v) { return parse_long(v); });
  }
  template <class T>
  void count(const std::string& key, T& out, long min) const {
    if (auto* e = c_.find(key)) {
      const long v = convert(*e, key, [](const std::string& s) { return parse_long(s); });
      if (v < min) throw ConfigError(e->line, key + " must be at least " + std::to_string(min));
      out = static_cast<T>(v);
    }
  }
  void flag(const std::string& key, bool& out) const {
    if (auto* e = c_.find(key)) {
      if (e->value == "true") out = true;
      else if (e->value == "false") out = false;
      else throw ConfigError(e->line, key + " must be true or false");
    }
  }
  /// `median` (or `auto`) leaves the value empty.
  void optional_real(const std::string& key, std::optional<double>& out) const {
    if (auto* e = c_.find(key)) {
      if (e->value == "median" || e->value == "auto") {
        out.reset();
      } else {
        out = convert(*e, key, [](const std::string& v) { return parse_double(v); });
      }
    }
  }
  template <class T>
  void choice(const std::string& key, T& out, std::initializer_list<std::pair<const char*, T>> options) const {
    if (auto* e = c_.find(key)) {
      for (const auto& [name, value] : options) {
        if (e->value == name) {
          out = value;
          return;
        }
      }
      throw ConfigError(e->line, key + ": unrecognized value '" + e->value + "'");
    }
  }
  const ConfigText::Entry* raw(const std::string& key) const { return c_.find(key); }

 private:
  const ConfigText& c_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment config

enum class Corruption { none, label_noise, class_prior_shift };

struct ExperimentConfig {
  std::string scenario = "grid-checkerboard";
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;
  std::size_t n_train = 200;
  std::size_t n_test = 2000;
  std::size_t validation_per_box = 1;  // case-* scenarios; grids use the 4-point toy set
  Corruption corruption = Corruption::none;
  double noise_rate = 0.0;
  double prior_ratio = 1.0;
  std::vector<int> minority_classes;  // empty: upper half of the classes
  std::size_t boundary_resolution = 100;
  std::size_t histogram_bins = 20;
  std::string output_dir = "giw_out";
  TrainConfig train = toy_train_config();

  // verification
  std::vector<SupportCase> cases{SupportCase::i, SupportCase::ii, SupportCase::iii, SupportCase::iv};
  std::size_t classifiers = 10;
  std::size_t samples = 100'000;
  std::uint64_t verify_seed = 0;
};

inline SupportSpec scenario_spec(const std::string& scenario) {
  if (scenario == "grid-aligned") return make_grid_example(GridVariant::aligned);
  if (scenario == "grid-checkerboard") return make_grid_example(GridVariant::checkerboard);
  for (SupportCase c : {SupportCase::i, SupportCase::ii, SupportCase::iii, SupportCase::iv}) {
    if (scenario == "case-" + to_string(c)) return make_case_spec(c);
  }
  throw DomainError("unknown scenario '" + scenario + "'");
}

inline SupportCase parse_case(std::string_view s) {
  if (s.substr(0, 5) == "case-") s = s.substr(5);
  for (SupportCase c : {SupportCase::i, SupportCase::ii, SupportCase::iii, SupportCase::iv}) {
    if (s == to_string(c)) return c;
  }
  throw DomainError("unknown case '" + std::string(s) + "'");
}

/// Reads every section; `require_runs` demands methods and seeds.
inline ExperimentConfig load_experiment(const ConfigText& text, bool require_runs) {
  ExperimentConfig cfg;
  detail::Reader r(text);

  if (auto* e = r.raw("experiment.scenario")) {
    cfg.scenario = e->value;
    detail::convert(*e, "scenario", [](const std::string& v) { return scenario_spec(v); });
  }
  if (auto* e = r.raw("experiment.methods")) {
    for (const auto& m : detail::split_list(e->value)) {
      cfg.methods.push_back(detail::convert(*e, "methods", [&m](const std::string&) { return parse_method(m); }));
    }
  }
  if (auto* e = r.raw("experiment.seeds")) {
    for (const auto& s : detail::split_list(e->value)) {
      const long v = detail::convert(*e, "seeds", [&s](const std::string&) { return parse_long(s); });
      if (v < 0) throw ConfigError(e->line, "seeds must be nonnegative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }
  if (require_runs) {
    if (cfg.methods.empty()) {
      const auto* e = r.raw("experiment.methods");
      throw ConfigError(e ? e->line : 0, "at least one method is required");
    }
    if (cfg.seeds.empty()) {
      const auto* e = r.raw("experiment.seeds");
      throw ConfigError(e ? e->line : 0, "at least one seed is required");
    }
  }
  r.count("experiment.n_train", cfg.n_train, 2);
  r.count("experiment.n_test", cfg.n_test, 1);
  r.count("experiment.validation_per_box", cfg.validation_per_box, 1);
  r.choice("experiment.corruption", cfg.corruption,
           {{"none", Corruption::none}, {"label-noise", Corruption::label_noise},
            {"class-prior-shift", Corruption::class_prior_shift}});
  r.real("experiment.noise_rate", cfg.noise_rate);
  if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate < 1.0)) {
    throw ConfigError(r.raw("experiment.noise_rate")->line, "noise_rate must lie in [0, 1)");
  }
  r.real("experiment.prior_ratio", cfg.prior_ratio);
  if (!(cfg.prior_ratio >= 1.0)) throw ConfigError(r.raw("experiment.prior_ratio")->line, "prior_ratio must be at least 1");
  if (auto* e = r.raw("experiment.minority_classes")) {
    for (const auto& s : detail::split_list(e->value)) {
      cfg.minority_classes.push_back(
          static_cast<int>(detail::convert(*e, "minority_classes", [&s](const std::string&) { return parse_long(s); })));
    }
  }
  r.count("experiment.boundary_resolution", cfg.boundary_resolution, 16);
  r.count("experiment.histogram_bins", cfg.histogram_bins, 1);
  if (auto* e = r.raw("experiment.out")) cfg.output_dir = e->value;

  TrainConfig& t = cfg.train;
  r.count("train.epochs", t.epochs, 1);
  r.count("train.pretrain_epochs", t.pretrain_epochs, 0);
  r.count("train.batch_train", t.batch_train, 1);
  r.count("train.batch_it", t.batch_it, 0);
  r.count("train.batch_oot", t.batch_oot, 0);
  r.real("train.oversampling", t.val_oversampling);
  r.real("train.learning_rate", t.adam.learning_rate);
  r.real("train.weight_decay", t.adam.weight_decay);
  r.count("train.decay_every", t.adam.decay_every, 0);
  r.real("train.decay_factor", t.adam.decay_factor);
  if (auto* e = r.raw("train.hidden")) {
    t.hidden.clear();
    for (const auto& s : detail::split_list(e->value)) {
      const long v = detail::convert(*e, "hidden", [&s](const std::string&) { return parse_long(s); });
      if (v < 1) throw ConfigError(e->line, "hidden widths must be positive");
      t.hidden.push_back(static_cast<int>(v));
    }
  }
  r.choice("train.weight_representation", t.weight_representation,
           {{"loss", WeightRepresentation::loss}, {"hidden", WeightRepresentation::hidden}});
  r.real("train.weight_bound", t.weight_bound);
  r.flag("train.normalize_weights", t.normalize_weights);
  r.optional_real("train.kernel_gamma", t.kernel.gamma);
  r.real("train.ridge", t.kernel.ridge);
  r.choice("train.median_mode", t.kernel.median_mode,
           {{"squared", MedianMode::squared}, {"distance", MedianMode::distance}});
  r.real("train.rulsif_eta", t.rulsif_eta);
  r.real("train.osvm_nu", t.osvm.nu);
  r.optional_real("train.osvm_gamma", t.osvm.gamma);
  r.real("train.osvm_gamma_scale", t.osvm.gamma_scale);
  r.optional_real("train.osvm_threshold", t.osvm.threshold.value);
  r.choice("train.osvm_representation", t.osvm.representation,
           {{"raw", SplitRepresentation::raw}, {"hidden", SplitRepresentation::hidden}});
  r.choice("train.centering", t.centering,
           {{"none", InputCentering::none}, {"validation_mean", InputCentering::validation_mean}});
  r.flag("train.reinit_after_pretrain", t.reinit_after_pretrain);
  bool prior_mode = false;
  r.flag("train.class_prior_mode", prior_mode);
  if (prior_mode) t = class_prior_shift_mode(t);
  if (auto* e = r.raw("train.alpha")) {
    t.alpha_override = detail::convert(*e, "alpha", [](const std::string& v) { return parse_double(v); });
  }
  try {
    t.validate();
  } catch (const DomainError& ex) {
    throw ConfigError(0, std::string("[train]: ") + ex.what());
  }

  if (auto* e = r.raw("verify.cases")) {
    cfg.cases.clear();
    for (const auto& s : detail::split_list(e->value)) {
      cfg.cases.push_back(detail::convert(*e, "cases", [&s](const std::string&) { return parse_case(s); }));
    }
  }
  r.count("verify.classifiers", cfg.classifiers, 1);
  r.count("verify.samples", cfg.samples, static_cast<long>(kMinOracleSamples));
  r.count("verify.seed", cfg.verify_seed, 0);

  text.reject_unknown();
  return cfg;
}

inline ExperimentConfig load_experiment_file(const std::filesystem::path& path, bool require_runs) {
  return load_experiment(ConfigText::parse_file(path), require_runs);
}

// ---------------------------------------------------------------------------
// Data

struct ExperimentData {
  SupportSpec spec;
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Every method run under one seed sees the same three datasets.
inline ExperimentData make_experiment_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentData d;
  d.spec = scenario_spec(cfg.scenario);
  d.train = sample(d.spec, Side::train, cfg.n_train, detail::stream_seed(seed, 101));
  d.validation = cfg.scenario.rfind("grid-", 0) == 0
                     ? make_toy_validation(d.spec, detail::stream_seed(seed, 102))
                     : make_case_validation(d.spec, cfg.validation_per_box, detail::stream_seed(seed, 102));
  d.test = sample(d.spec, Side::test, cfg.n_test, detail::stream_seed(seed, 103));
  switch (cfg.corruption) {
    case Corruption::none: break;
    case Corruption::label_noise:
      d.train = apply_label_noise(d.train, cfg.noise_rate, cfg.train.num_classes, detail::stream_seed(seed, 104));
      break;
    case Corruption::class_prior_shift: {
      std::vector<int> minority = cfg.minority_classes;
      if (minority.empty()) {
        for (int c = cfg.train.num_classes / 2; c < cfg.train.num_classes; ++c) minority.push_back(c);
      }
      d.train = apply_class_prior_shift(d.train, cfg.prior_ratio, minority, detail::stream_seed(seed, 105));
      break;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Artifacts

inline std::string metrics_csv(const std::vector<EpochMetrics>& epochs, Method method, std::uint64_t seed) {
  std::ostringstream os;
  os << "epoch,method,seed,test_acc,obj_term1,obj_term2,alpha_hat\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << to_string(method) << ',' << seed << ',' << format_double(e.test_acc) << ','
       << format_double(e.obj_term1) << ',' << format_double(e.obj_term2) << ',' << format_double(e.alpha_hat) << '\n';
  }
  return os.str();
}

/// Test-box bounding box with 5% padding per axis.
inline std::pair<Point2, Point2> padded_test_bounds(const SupportSpec& spec) {
  if (spec.test.empty()) throw DomainError("spec has no test boxes");
  Point2 lo = spec.test.front().lower, hi = spec.test.front().upper;
  for (const auto& b : spec.test) {
    lo = lo.cwiseMin(b.lower);
    hi = hi.cwiseMax(b.upper);
  }
  const Point2 pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

/// Lattice points, x1 varying slowest.
inline Matrix boundary_lattice(const SupportSpec& spec, std::size_t resolution) {
  if (resolution < 16) throw DomainError("boundary resolution must be at least 16");
  const auto [lo, hi] = padded_test_bounds(spec);
  const auto r = static_cast<Eigen::Index>(resolution);
  Matrix pts(r * r, 2);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double x1 = lo(0) + (hi(0) - lo(0)) * static_cast<double>(i) / static_cast<double>(r - 1);
    for (Eigen::Index j = 0; j < r; ++j) {
      const double x2 = lo(1) + (hi(1) - lo(1)) * static_cast<double>(j) / static_cast<double>(r - 1);
      pts(i * r + j, 0) = x1;
      pts(i * r + j, 1) = x2;
    }
  }
  return pts;
}

template <Classifier F>
std::string boundary_grid(const F& f, const SupportSpec& spec, std::size_t resolution) {
  const Matrix pts = boundary_lattice(spec, resolution);
  const auto pred = predict(f(pts));
  std::ostringstream os;
  os << "x1,x2,predicted_class\n";
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    os << format_double(pts(i, 0)) << ',' << format_double(pts(i, 1)) << ',' << pred[static_cast<std::size_t>(i)]
       << '\n';
  }
  return os.str();
}

/// Equal-width bins on [0, 1]; the last bin is closed.
inline std::string score_histogram(const Vector& scores, std::size_t bins) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  std::vector<std::size_t> counts(bins, 0);
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores(i), 0.0, 1.0);
    auto b = static_cast<std::size_t>(s * static_cast<double>(bins));
    counts[std::min(b, bins - 1)]++;
  }
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < bins; ++b) {
    os << format_double(static_cast<double>(b) / static_cast<double>(bins)) << ','
       << format_double(static_cast<double>(b + 1) / static_cast<double>(bins)) << ',' << counts[b] << '\n';
  }
  return os.str();
}

inline std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes through a temporary and rename; leaves the file untouched when the content already matches.
/// Returns whether the file changed.
inline bool write_if_changed(const std::filesystem::path& p, const std::string& content) {
  if (auto cur = read_file(p); cur && *cur == content) return false;
  const auto tmp = std::filesystem::path(p.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, p);
  return true;
}

struct RunPaths {
  std::filesystem::path metrics, boundary, scores;  // scores empty unless giw
};

inline RunPaths run_paths(const std::filesystem::path& dir, Method method, std::uint64_t seed) {
  const std::string tag = to_string(method) + "_seed" + std::to_string(seed);
  RunPaths p;
  p.metrics = dir / ("metrics_" + tag + ".csv");
  p.boundary = dir / ("boundary_" + tag + ".csv");
  if (method == Method::giw) p.scores = dir / ("scores_" + tag + ".csv");
  return p;
}

inline bool run_complete(const RunPaths& p) {
  namespace fs = std::filesystem;
  return fs::exists(p.metrics) && fs::exists(p.boundary) && (p.scores.empty() || fs::exists(p.scores));
}

/// Last-`window` mean of the test_acc column of a metrics CSV.
inline double last_epochs_accuracy(const std::string& csv, std::size_t window = 10) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<double> acc;
  while (std::getline(in, line)) {
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) pos = line.find(',', pos) + 1;
    acc.push_back(parse_double(line.substr(pos, line.find(',', pos) - pos)));
  }
  if (acc.empty()) throw DomainError("metrics file has no epochs");
  const std::size_t n = std::min(window, acc.size());
  double s = 0.0;
  for (std::size_t i = acc.size() - n; i < acc.size(); ++i) s += acc[i];
  return s / static_cast<double>(n);
}

struct SummaryRow {
  Method method = Method::giw;
  double mean = 0.0;
  double std = 0.0;
  std::size_t seeds = 0;
};

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "method,mean_last10_acc,std_last10_acc,n_seeds\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << format_double(r.mean) << ',' << format_double(r.std) << ',' << r.seeds << '\n';
  }
  return os.str();
}

struct RunStats {
  std::size_t trained = 0;
  std::size_t skipped = 0;
  std::size_t files_changed = 0;
  std::vector<SummaryRow> summary;
};

/// Trains every (method, seed) not already on disk, then rewrites the summary.
inline RunStats run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                               std::uint64_t seed_offset = 0) {
  std::filesystem::create_directories(out_dir);
  RunStats stats;
  std::map<std::uint64_t, ExperimentData> data;
  for (Method method : cfg.methods) {
    SummaryRow row;
    row.method = method;
    std::vector<double> per_seed;
    for (std::uint64_t s : cfg.seeds) {
      const std::uint64_t seed = s + seed_offset;
      const RunPaths paths = run_paths(out_dir, method, seed);
      if (run_complete(paths)) {
        ++stats.skipped;
      } else {
        if (!data.count(seed)) data.emplace(seed, make_experiment_data(cfg, seed));
        const ExperimentData& d = data.at(seed);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        tc.method = method;
        const TrainResult res = train(method, d.train, d.validation, tc, &d.test);
        if (!paths.scores.empty() && res.split) {
          stats.files_changed += write_if_changed(paths.scores, score_histogram(res.split->scores, cfg.histogram_bins));
        }
        stats.files_changed += write_if_changed(paths.boundary, boundary_grid(res.model, d.spec, cfg.boundary_resolution));
        // metrics last: its presence marks the run complete
        stats.files_changed += write_if_changed(paths.metrics, metrics_csv(res.epochs, method, seed));
        ++stats.trained;
      }
      per_seed.push_back(last_epochs_accuracy(read_file(paths.metrics).value()));
    }
    row.seeds = per_seed.size();
    for (double a : per_seed) row.mean += a;
    row.mean /= static_cast<double>(per_seed.size());
    if (per_seed.size() > 1) {
      double ss = 0.0;
      for (double a : per_seed) ss += (a - row.mean) * (a - row.mean);
      row.std = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
    }
    stats.summary.push_back(row);
  }
  stats.files_changed += write_if_changed(out_dir / "summary.csv", summary_csv(stats.summary));
  return stats;
}

// ---------------------------------------------------------------------------
// Verification

struct CaseVerdict {
  SupportCase which = SupportCase::i;
  std::vector<RiskReport> reports;
  std::filesystem::path file;
  bool pass() const {
    return std::all_of(reports.begin(), reports.end(), [](const RiskReport& r) { return r.pass(); });
  }
};

/// Random He-initialized networks of the configured shape serve as the classifiers.
inline std::vector<CaseVerdict> verify_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<int> dims{2};
  dims.insert(dims.end(), cfg.train.hidden.begin(), cfg.train.hidden.end());
  dims.push_back(cfg.train.num_classes);
  std::vector<CaseVerdict> out;
  for (SupportCase c : cfg.cases) {
    CaseVerdict v;
    v.which = c;
    const SupportSpec spec = make_case_spec(c);
    std::ostringstream os;
    for (std::size_t k = 0; k < cfg.classifiers; ++k) {
      const Mlp f = Mlp::he_init(dims, detail::stream_seed(cfg.verify_seed, 200 + k));
      const auto mc_seed = detail::stream_seed(cfg.verify_seed, 10'000 + 100 * static_cast<std::uint64_t>(c) + k);
      v.reports.push_back(consistency_report(f, spec, cfg.samples, mc_seed, "case-" + to_string(c)));
      os << "classifier=" << k << '\n' << to_key_value(v.reports.back()) << '\n';
    }
    os << "overall: " << (v.pass() ? "pass" : "fail") << '\n';
    v.file = out_dir / ("report_case-" + to_string(c) + ".txt");
    write_if_changed(v.file, os.str());
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace giw
