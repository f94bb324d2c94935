#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "giw/experiment.hpp"

using namespace giw;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text, bool require_runs = true) {
  std::istringstream in(text);
  return load_experiment(ConfigText::parse(in), require_runs);
}

int error_line(const std::string& text, bool require_runs = true) {
  try {
    parse(text, require_runs);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("giw_test_" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path()).value();
  return out;
}

const char* kSmall = R"(# tiny run
[experiment]
scenario = grid-checkerboard
methods = giw
seeds = 0
n_test = 300
boundary_resolution = 20

[train]
epochs = 3
pretrain_epochs = 1
hidden = 8
)";

}  // namespace

TEST(ConfigParse, ReadsSectionsAndLists) {
  const ExperimentConfig c = parse(
      "[experiment]\nscenario = case-iv\nmethods = giw, diw ,rdiw\nseeds = 3,4\nn_train = 50\n"
      "corruption = label-noise\nnoise_rate = 0.2\n[train]\nhidden = 16, 8\nosvm_threshold = 0.4\n"
      "kernel_gamma = median\nclass_prior_mode = true\n[verify]\ncases = i, case-iii\nsamples = 5000\n");
  EXPECT_EQ(c.scenario, "case-iv");
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::giw, Method::diw, Method::rdiw}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(c.n_train, 50u);
  EXPECT_EQ(c.corruption, Corruption::label_noise);
  EXPECT_EQ(c.train.hidden, (std::vector<int>{16, 8}));
  EXPECT_EQ(c.train.osvm.threshold.value.value(), 0.4);
  EXPECT_FALSE(c.train.kernel.gamma.has_value());
  EXPECT_EQ(c.train.alpha_override.value(), 0.5);
  EXPECT_EQ(c.cases, (std::vector<SupportCase>{SupportCase::i, SupportCase::iii}));
  EXPECT_EQ(c.samples, 5000u);
}

TEST(ConfigParse, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("[experiment]\nmethods = giw\nseeds = 0\nbogus = 1\n"), 4);
  EXPECT_EQ(error_line("[experiment]\nmethods = giw\nseeds = 0\nmethods = diw\n"), 4);
  EXPECT_EQ(error_line("[experiment]\nmethods = giw, magic\nseeds = 0\n"), 2);
  EXPECT_EQ(error_line("[experiment]\nmethods = giw\nseeds = 0\n\nnoise_rate = 1.0\n"), 5);
  EXPECT_EQ(error_line("[experiment]\nmethods = giw\nseeds = 0\nscenario = case-v\n"), 4);
  EXPECT_EQ(error_line("[experiment]\nmethods = giw\nseeds = 0\n[train]\nepochs = zero\n"), 5);
  EXPECT_EQ(error_line("[experiment]\nmethods = giw\nseeds = 0\nthis line has no equals\n"), 4);
  EXPECT_EQ(error_line("[experiment]\nmethods = giw\nseeds = 0\nboundary_resolution = 8\n"), 4);
  EXPECT_EQ(error_line("[experiment]\nseeds = 0\n"), 0);
  EXPECT_EQ(error_line("[experiment]\nseeds = 0\n", false), -1);
}

TEST(Boundary, LatticeSizeAndPadding) {
  const SupportSpec s = make_grid_example(GridVariant::aligned);
  const Matrix pts = boundary_lattice(s, 100);
  EXPECT_EQ(pts.rows(), 10000);
  const auto [lo, hi] = padded_test_bounds(s);
  EXPECT_NEAR(lo(0), -0.105, 1e-12);
  EXPECT_NEAR(hi(0), 2.205, 1e-12);
  EXPECT_NEAR(pts.col(0).minCoeff(), lo(0), 1e-15);
  EXPECT_NEAR(pts.col(1).maxCoeff(), hi(1), 1e-15);
  const std::string csv = boundary_grid([](const Matrix& x) { return Matrix(Matrix::Zero(x.rows(), 2)); }, s, 100);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10001);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x1,x2,predicted_class");
}

TEST(Boundary, InvertedModelIsRowwiseComplement) {
  const SupportSpec s = make_grid_example(GridVariant::checkerboard);
  const Mlp net = Mlp::he_init({2, 8, 2}, 3);
  Mlp neg = net;
  neg.params().back().weight *= -1.0;
  neg.params().back().bias *= -1.0;
  std::istringstream a(boundary_grid(net, s, 30)), b(boundary_grid(neg, s, 30));
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  int rows = 0;
  while (std::getline(a, la) && std::getline(b, lb)) {
    EXPECT_EQ(la.substr(0, la.rfind(',')), lb.substr(0, lb.rfind(',')));
    const int pa = la.back() - '0', pb = lb.back() - '0';
    // ties would give class 0 both times; a random net has none on this lattice
    EXPECT_EQ(pa + pb, 1);
    ++rows;
  }
  EXPECT_EQ(rows, 900);
}

TEST(Boundary, BayesRuleMatchesBoxLabels) {
  const SupportSpec s = make_grid_example(GridVariant::aligned);
  auto bayes = [](const Matrix& x) {
    Matrix l = Matrix::Zero(x.rows(), 2);
    for (Eigen::Index i = 0; i < x.rows(); ++i) l(i, x(i, 1) > grid_center()(1) ? kRed : kBlue) = 1.0;
    return l;
  };
  const Matrix pts = boundary_lattice(s, 60);
  const auto pred = predict(bayes(pts));
  int interior = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Point2 x = pts.row(i).transpose();
    for (const auto& b : s.test) {
      if ((x.array() > b.lower.array()).all() && (x.array() < b.upper.array()).all()) {
        EXPECT_EQ(pred[static_cast<std::size_t>(i)], b.label);
        ++interior;
      }
    }
  }
  EXPECT_GT(interior, 1000);
}

TEST(Histogram, BinsAndClosedLastBin) {
  Vector s(5);
  s << 0.0, 0.05, 0.5, 0.99, 1.0;
  const std::string h = score_histogram(s, 10);
  EXPECT_NE(h.find("bin_lo,bin_hi,count\n0,0.10000000000000001,2\n"), std::string::npos);
  EXPECT_NE(h.find("0.90000000000000002,1,2\n"), std::string::npos);
  EXPECT_THROW(score_histogram(s, 0), DomainError);
}

TEST(Metrics, HeaderAndLastTen) {
  std::vector<EpochMetrics> e(12);
  for (int i = 0; i < 12; ++i) {
    e[i].epoch = i;
    e[i].test_acc = i < 2 ? 0.0 : 0.5 + 0.01 * i;
  }
  const std::string csv = metrics_csv(e, Method::diw, 7);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,method,seed,test_acc,obj_term1,obj_term2,alpha_hat");
  EXPECT_NEAR(last_epochs_accuracy(csv), 0.5 + 0.01 * 6.5, 1e-12);
}

TEST(Data, CorruptionsApplied) {
  ExperimentConfig c = parse("[experiment]\nmethods = giw\nseeds = 0\nscenario = case-iii\nvalidation_per_box = 2\n"
                             "corruption = class-prior-shift\nprior_ratio = 4\nn_train = 400\n");
  const ExperimentData d = make_experiment_data(c, 1);
  EXPECT_EQ(d.validation.size(), 8u);
  int red = 0;
  for (int y : d.train.labels) red += y == kRed;
  EXPECT_LT(red, 80);
  EXPECT_GT(red, 20);
}

TEST(Run, ArtifactsSummaryAndIdempotence) {
  const fs::path dir = scratch("run");
  const ExperimentConfig c = parse(kSmall);
  const RunStats first = run_experiment(c, dir);
  EXPECT_EQ(first.trained, 1u);
  const auto files = snapshot(dir);
  EXPECT_EQ(files.size(), 4u);  // 3 run artifacts plus the summary
  EXPECT_TRUE(files.count("metrics_giw_seed0.csv"));
  EXPECT_TRUE(files.count("boundary_giw_seed0.csv"));
  EXPECT_TRUE(files.count("scores_giw_seed0.csv"));
  const std::string summary = files.at("summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 2);
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "method,mean_last10_acc,std_last10_acc,n_seeds");

  const auto t0 = fs::last_write_time(dir / "metrics_giw_seed0.csv");
  const RunStats second = run_experiment(c, dir);
  EXPECT_EQ(second.trained, 0u);
  EXPECT_EQ(second.skipped, 1u);
  EXPECT_EQ(second.files_changed, 0u);
  EXPECT_EQ(fs::last_write_time(dir / "metrics_giw_seed0.csv"), t0);
  EXPECT_EQ(snapshot(dir), files);
  fs::remove_all(dir);
}

TEST(Run, FreshRerunIsByteIdentical) {
  const fs::path a = scratch("a"), b = scratch("b");
  const ExperimentConfig two = parse(
      "[experiment]\nscenario = grid-aligned\nmethods = giw, diw, val_only\nseeds = 0, 1\nn_test = 200\n"
      "boundary_resolution = 16\n[train]\nepochs = 2\npretrain_epochs = 1\nhidden = 8\n");
  const RunStats ra = run_experiment(two, a);
  run_experiment(two, b);
  EXPECT_EQ(ra.summary.size(), 3u);
  EXPECT_EQ(snapshot(a), snapshot(b));
  EXPECT_EQ(snapshot(a).size(), 2u * 3u * 2u + 2u + 1u);  // giw adds a score file per seed
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Run, SeedOffsetShiftsFileNames) {
  const fs::path dir = scratch("offset");
  run_experiment(parse(kSmall), dir, 5);
  EXPECT_TRUE(fs::exists(dir / "metrics_giw_seed5.csv"));
  fs::remove_all(dir);
}

TEST(Verify, ReportsPerCase) {
  const fs::path dir = scratch("verify");
  const ExperimentConfig c = parse("[verify]\nclassifiers = 2\nsamples = 20000\n", false);
  const auto v = verify_experiment(c, dir);
  ASSERT_EQ(v.size(), 4u);
  for (const auto& cv : v) {
    EXPECT_TRUE(cv.pass()) << to_string(cv.which);
    EXPECT_TRUE(fs::exists(cv.file));
  }
  const std::string i = read_file(dir / "report_case-i.txt").value();
  EXPECT_NE(i.find("J≈R: pass"), std::string::npos);
  const std::string iii = read_file(dir / "report_case-iii.txt").value();
  EXPECT_NE(iii.find("J<R: pass"), std::string::npos);
  EXPECT_NE(iii.find("J_G≈R: pass"), std::string::npos);
  EXPECT_NE(iii.find("overall: pass"), std::string::npos);
  fs::remove_all(dir);
}
