// giw_cli run <config> | verify <config>  [--out <dir>] [--seed-offset <k>]
//
// Exit status: 0 success, 2 configuration error, 3 a certified relation failed.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "giw/experiment.hpp"

namespace {

constexpr int kConfigFailure = 2;
constexpr int kVerifyFailure = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized importance weighting experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_offset = 0;

  auto* run = app.add_subcommand("run", "train every configured (method, seed) and write artifacts");
  run->add_option("config", config_path, "experiment config")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--seed-offset", seed_offset, "added to every configured seed");

  auto* verify = app.add_subcommand("verify", "certify risk consistency on the configured case specs");
  verify->add_option("config", config_path, "experiment config")->required();
  verify->add_option("--out", out_dir, "output directory (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }

  giw::ExperimentConfig cfg;
  try {
    cfg = giw::load_experiment_file(config_path, run->parsed());
  } catch (const giw::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kConfigFailure;
  }
  const std::filesystem::path dir = out_dir.empty() ? cfg.output_dir : out_dir;

  try {
    if (run->parsed()) {
      const auto stats = giw::run_experiment(cfg, dir, seed_offset);
      std::cout << "trained " << stats.trained << ", skipped " << stats.skipped << ", files changed "
                << stats.files_changed << '\n';
      for (const auto& r : stats.summary) {
        std::cout << giw::to_string(r.method) << ": last-10 accuracy " << giw::format_double(r.mean) << " (std "
                  << giw::format_double(r.std) << ", " << r.seeds << " seeds)\n";
      }
      return 0;
    }
    bool ok = true;
    for (const auto& v : giw::verify_experiment(cfg, dir)) {
      std::cout << v.file.filename().string() << ": " << (v.pass() ? "pass" : "fail") << '\n';
      ok = ok && v.pass();
    }
    return ok ? 0 : kVerifyFailure;
  } catch (const giw::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
