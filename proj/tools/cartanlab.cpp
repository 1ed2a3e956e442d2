#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cartanlab/lab/experiments.hpp"
#include "cartanlab/lab/report.hpp"

namespace {

using cartanlab::ErrorCode;

// Problems with the input rather than with the numerics.
bool is_input_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config:
    case ErrorCode::Io:
    case ErrorCode::InvalidInput:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonCommuting:
    case ErrorCode::NotCartanEligible:
    case ErrorCode::ProportionalExponents:
    case ErrorCode::WordTooLong:
      return true;
    default:
      return false;
  }
}

int run_subcommand(const std::string& sub, const std::string& config_path, std::optional<std::uint64_t> seed,
                   std::optional<std::string> out) {
  namespace lab = cartanlab::lab;
  auto cfg = lab::load_config(config_path, lab::Overrides{seed, out});
  auto result = lab::run(sub, cfg);
  result.artifacts.write(cfg.out);
  for (const auto& c : result.checks) std::cout << c.line() << '\n';
  std::cout << "artifacts written to " << cfg.out << '\n';
  if (result.ok()) return 0;
  std::cerr << "cartanlab: numerical failure in";
  for (const auto& f : result.failing()) std::cerr << ' ' << f << ';';
  std::cerr << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for perturbed Cartan actions on tori"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  const char* runs[][2] = {
      {"gen-action", "build the linear action and print its spectrum"},
      {"weyl", "enumerate Weyl chambers and property (C) witnesses"},
      {"perturb", "build the perturbed action and check commutation, orientation and density"},
      {"semiconj", "solve for the semiconjugacy to the linear action"},
      {"lyapunov", "estimate Lyapunov exponents"},
      {"linearize", "trace stable leaves and build leafwise linearizing charts"},
      {"verify", "run every acceptance check"},
  };
  for (auto& r : runs) {
    auto* s = app.add_subcommand(r[0], r[1]);
    s->add_option("--config", config_path, "experiment config (JSON)")->required();
    s->add_option("--seed", seed, "64-bit seed, overrides the config");
    s->add_option("--out", out, "output directory, overrides the config");
  }
  std::string report_dir;
  auto* rep = app.add_subcommand("report", "summarize an output directory");
  rep->add_option("dir", report_dir, "output directory");
  rep->add_option("--out", report_dir, "output directory");
  rep->add_option("--config", config_path, "ignored; accepted for symmetry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (sub == "report") {
      if (report_dir.empty()) {
        std::cerr << "cartanlab: report needs an output directory\n";
        return 2;
      }
      std::cout << cartanlab::lab::render_report(report_dir);
      return 0;
    }
    return run_subcommand(sub, config_path, seed, out);
  } catch (const cartanlab::LabError& e) {
    std::cerr << "cartanlab: " << e.what() << '\n';
    return is_input_error(e.code()) ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "cartanlab: config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cartanlab: " << e.what() << '\n';
    return 1;
  }
}
