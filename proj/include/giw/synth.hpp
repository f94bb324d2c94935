#pragma once

// Piecewise-uniform joint densities over labeled axis-aligned boxes, the 2x2
// grid toys, the four support-relationship layouts, samplers, validation-set
// builders, and the label-noise / class-prior-shift corruptions.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "giw/errors.hpp"
#include "giw/format.hpp"

namespace giw {

using Matrix = Eigen::MatrixXd;
using Point2 = Eigen::Vector2d;

enum class Side { train, test };
enum class Provenance { train, validation, test };

struct BoxRegion {
  Point2 lower;
  Point2 upper;
  int label = 0;
  double mass = 0.0;

  double area() const { return (upper - lower).prod(); }
  Point2 center() const { return 0.5 * (lower + upper); }
  bool contains(const Point2& x) const {
    return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
  }
  double density() const { return mass / area(); }
};

inline double intersection_area(const BoxRegion& a, const BoxRegion& b) {
  const Point2 lo = a.lower.cwiseMax(b.lower);
  const Point2 hi = a.upper.cwiseMin(b.upper);
  const Point2 ext = (hi - lo).cwiseMax(0.0);
  return ext.prod();
}

struct SupportSpec {
  std::string name;
  std::vector<BoxRegion> train;
  std::vector<BoxRegion> test;
  int num_classes = 2;

  const std::vector<BoxRegion>& side(Side s) const { return s == Side::train ? train : test; }

  void validate() const {
    for (Side s : {Side::train, Side::test}) {
      const auto& boxes = side(s);
      if (boxes.empty()) throw DomainError(name + ": empty side");
      double total = 0.0;
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        if (!(b.lower.array() < b.upper.array()).all()) throw DomainError(name + ": box with empty extent");
        if (b.mass < 0.0) throw DomainError(name + ": negative box mass");
        if (b.label < 0 || b.label >= num_classes) throw DomainError(name + ": box label out of range");
        total += b.mass;
        for (std::size_t j = 0; j < i; ++j) {
          if (intersection_area(b, boxes[j]) > 0.0) throw DomainError(name + ": overlapping boxes on one side");
        }
      }
      if (std::abs(total - 1.0) > 1e-12) throw DomainError(name + ": box masses do not sum to one");
    }
  }
};

/// Joint density p(x, y) on one side of the spec.
inline double density(const SupportSpec& spec, Side side, const Point2& x, int y) {
  for (const auto& b : spec.side(side)) {
    if (b.label == y && b.mass > 0.0 && b.contains(x)) return b.density();
  }
  return 0.0;
}

inline bool in_train_support(const SupportSpec& spec, const Point2& x, int y) {
  return density(spec, Side::train, x, y) > 0.0;
}

/// Area of `box` covered by same-label training boxes of positive mass.
inline double overlap_with_train(const SupportSpec& spec, const BoxRegion& box) {
  double a = 0.0;
  for (const auto& t : spec.train) {
    if (t.label == box.label && t.mass > 0.0) a += intersection_area(box, t);
  }
  return a;
}

struct Dataset {
  Matrix features;
  std::vector<int> labels;
  Provenance provenance = Provenance::train;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.provenance = provenance;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(rows[k]));
      out.labels.push_back(labels[rows[k]]);
    }
    return out;
  }
};

inline Dataset concatenate(const Dataset& a, const Dataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.features.cols() != b.features.cols()) throw ShapeError("datasets differ in feature width");
  Dataset out;
  out.provenance = a.provenance;
  out.features.resize(a.features.rows() + b.features.rows(), a.features.cols());
  out.features << a.features, b.features;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

// ---------------------------------------------------------------------------
// Grid geometry: unit squares separated by a 0.1 margin.

inline constexpr double kSquareSide = 1.0;
inline constexpr double kGridMargin = 0.1;
inline constexpr int kRed = 1;
inline constexpr int kBlue = 0;

/// Unit square in column `col` (0 = left) and row `row` (0 = bottom).
inline BoxRegion grid_square(int col, int row, int label, double mass) {
  const double step = kSquareSide + kGridMargin;
  BoxRegion b;
  b.lower = Point2(col * step, row * step);
  b.upper = b.lower + Point2(kSquareSide, kSquareSide);
  b.label = label;
  b.mass = mass;
  return b;
}

/// Center of the full 2x2 grid.
inline Point2 grid_center() { return Point2::Constant(kSquareSide + 0.5 * kGridMargin); }

enum class GridVariant { aligned, checkerboard };

inline SupportSpec make_grid_example(GridVariant variant) {
  SupportSpec spec;
  spec.name = variant == GridVariant::aligned ? "grid-aligned" : "grid-checkerboard";
  spec.train = {grid_square(0, 1, kRed, 0.5), grid_square(0, 0, kBlue, 0.5)};
  const bool flip = variant == GridVariant::checkerboard;
  spec.test = {grid_square(0, 1, kRed, 0.25), grid_square(0, 0, kBlue, 0.25),
               grid_square(1, 1, flip ? kBlue : kRed, 0.25), grid_square(1, 0, flip ? kRed : kBlue, 0.25)};
  return spec;
}

enum class SupportCase { i, ii, iii, iv };

inline std::string to_string(SupportCase c) {
  switch (c) {
    case SupportCase::i: return "i";
    case SupportCase::ii: return "ii";
    case SupportCase::iii: return "iii";
    case SupportCase::iv: return "iv";
  }
  return "?";
}

inline SupportSpec make_case_spec(SupportCase c) {
  SupportSpec spec;
  spec.name = "case-" + to_string(c);
  const double third = 1.0 / 3.0;
  switch (c) {
    case SupportCase::i:
      spec.train = {grid_square(0, 1, kRed, 0.5), grid_square(0, 0, kBlue, 0.5)};
      spec.test = spec.train;
      break;
    case SupportCase::ii:
      spec.train = {grid_square(0, 1, kRed, 0.25), grid_square(0, 0, kBlue, 0.25), grid_square(1, 1, kRed, 0.25),
                    grid_square(1, 0, kBlue, 0.25)};
      spec.test = {grid_square(0, 1, kRed, 0.5), grid_square(0, 0, kBlue, 0.5)};
      break;
    case SupportCase::iii:
      spec = make_grid_example(GridVariant::aligned);
      spec.name = "case-iii";
      break;
    case SupportCase::iv:
      // Bottom-left is the train-only square; the right column is test-only.
      spec.train = {grid_square(0, 1, kRed, 0.5), grid_square(0, 0, kBlue, 0.5)};
      spec.test = {grid_square(0, 1, kRed, third), grid_square(1, 1, kRed, third), grid_square(1, 0, kBlue, third)};
      break;
  }
  return spec;
}

/// Draws one labeled point from a box mixture.
template <class Rng>
std::pair<Point2, int> draw_from_boxes(const std::vector<BoxRegion>& boxes, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  std::size_t pick = boxes.size() - 1;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    acc += boxes[k].mass;
    if (u < acc && boxes[k].mass > 0.0) {
      pick = k;
      break;
    }
  }
  const auto& b = boxes[pick];
  Point2 x;
  x(0) = b.lower(0) + (b.upper(0) - b.lower(0)) * unit(rng);
  x(1) = b.lower(1) + (b.upper(1) - b.lower(1)) * unit(rng);
  return {x, b.label};
}

inline Dataset sample(const SupportSpec& spec, Side side, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample size must be positive");
  std::mt19937_64 rng(seed);
  Dataset d;
  d.provenance = side == Side::train ? Provenance::train : Provenance::test;
  d.features.resize(static_cast<Eigen::Index>(n), 2);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [x, y] = draw_from_boxes(spec.side(side), rng);
    d.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
    d.labels[i] = y;
  }
  return d;
}

namespace detail {

inline Point2 uniform_in(const BoxRegion& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Point2 x;
  x(0) = b.lower(0) + (b.upper(0) - b.lower(0)) * unit(rng);
  x(1) = b.lower(1) + (b.upper(1) - b.lower(1)) * unit(rng);
  return x;
}

inline int test_label_at(const SupportSpec& spec, const Point2& x, int fallback) {
  for (const auto& b : spec.test) {
    if (b.contains(x)) return b.label;
  }
  return fallback;
}

inline Dataset from_points(const std::vector<std::pair<Point2, int>>& pts, Provenance prov) {
  Dataset d;
  d.provenance = prov;
  d.features.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d.features.row(static_cast<Eigen::Index>(i)) = pts[i].first.transpose();
    d.labels.push_back(pts[i].second);
  }
  return d;
}

}  // namespace detail

/// One uniform point per training box plus the center of every test-only box.
inline Dataset make_toy_validation(const SupportSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Point2, int>> pts;
  for (const auto& b : spec.train) {
    const Point2 x = detail::uniform_in(b, rng);
    pts.emplace_back(x, detail::test_label_at(spec, x, b.label));
  }
  for (const auto& b : spec.test) {
    if (overlap_with_train(spec, b) == 0.0) pts.emplace_back(b.center(), b.label);
  }
  return detail::from_points(pts, Provenance::validation);
}

/// `per_box` uniform points from every test box.
inline Dataset make_case_validation(const SupportSpec& spec, std::size_t per_box, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Point2, int>> pts;
  for (const auto& b : spec.test) {
    if (b.mass <= 0.0) continue;
    for (std::size_t k = 0; k < per_box; ++k) pts.emplace_back(detail::uniform_in(b, rng), b.label);
  }
  return detail::from_points(pts, Provenance::validation);
}

// ---------------------------------------------------------------------------
// Corruptions

inline Dataset apply_label_noise(const Dataset& data, double rate, int num_classes, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("noise rate must lie in [0, 1)");
  if (num_classes < 2) throw DomainError("label noise needs at least two classes");
  Dataset out = data;
  if (rate == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, num_classes - 2);
  for (int& y : out.labels) {
    if (unit(rng) < rate) {
      const int k = other(rng);
      y = k >= y ? k + 1 : k;
    }
  }
  return out;
}

/// Keeps floor(n_c / rho) examples of every minority class c; row order is preserved.
inline Dataset apply_class_prior_shift(const Dataset& data, double rho, const std::vector<int>& minority,
                                       std::uint64_t seed) {
  if (!(rho >= 1.0)) throw DomainError("class-prior ratio must be at least 1");
  const std::set<int> minor(minority.begin(), minority.end());
  std::mt19937_64 rng(seed);
  std::vector<bool> keep(data.size(), true);
  for (int c : minor) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == c) rows.push_back(i);
    }
    if (rows.empty()) continue;
    const auto target = static_cast<std::size_t>(std::floor(static_cast<double>(rows.size()) / rho));
    if (target == 0) throw DomainError("class " + std::to_string(c) + " would be emptied by the prior shift");
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t k = target; k < rows.size(); ++k) keep[rows[k]] = false;
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (keep[i]) kept.push_back(i);
  }
  return data.subset(kept);
}

// ---------------------------------------------------------------------------
// CSV: header x1,...,xd,label

inline void write_dataset_csv(const Dataset& d, std::ostream& os) {
  for (Eigen::Index c = 0; c < d.features.cols(); ++c) os << 'x' << (c + 1) << ',';
  os << "label\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (Eigen::Index c = 0; c < d.features.cols(); ++c) {
      os << format_double(d.features(static_cast<Eigen::Index>(i), c)) << ',';
    }
    os << d.labels[i] << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& is, Provenance prov = Provenance::train) {
  std::string line;
  if (!std::getline(is, line)) throw DomainError("empty dataset file");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  std::vector<std::vector<double>> rows;
  Dataset d;
  d.provenance = prov;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<Eigen::Index>(cells.size()) != cols + 1) throw ShapeError("ragged dataset row");
    for (Eigen::Index c = 0; c < cols; ++c) row.push_back(parse_double(trim(cells[static_cast<std::size_t>(c)])));
    rows.push_back(std::move(row));
    d.labels.push_back(static_cast<int>(parse_long(trim(cells.back()))));
  }
  d.features.resize(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) d.features(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  }
  return d;
}

}  // namespace giw
