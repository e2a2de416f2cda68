// semimix: simulate, fit, compare and profile latent-class regressions.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numerical failure. Failures print a JSON object on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "semimix/error.hpp"

using nlohmann::json;
using namespace semimix;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return 1;
    case ErrorKind::Io:
    case ErrorKind::Schema:
    case ErrorKind::InvalidLevel:
    case ErrorKind::LengthMismatch:
    case ErrorKind::UnsupportedColumnType: return 2;
    case ErrorKind::SingularDesign:
    case ErrorKind::DegenerateComponent:
    case ErrorKind::NoRoot: return 3;
  }
  return 3;
}

int report(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-class regression with proxy variables"};
  app.require_subcommand(1);
  std::string config_path, out;
  std::uint64_t seed = 0;
  int jobs = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed (overrides the config)");
    sub->add_option("--out", out, "Output directory (overrides the config)");
    sub->add_option("--jobs", jobs, "Worker threads for replications")->check(CLI::PositiveNumber);
  };
  CLI::App* simulate = app.add_subcommand("simulate", "Write simulated datasets with schema sidecars");
  CLI::App* fit = app.add_subcommand("fit", "Fit one estimator and write a fit artifact");
  CLI::App* experiment = app.add_subcommand("experiment", "Replicated comparison of estimators");
  CLI::App* select_k = app.add_subcommand("select-k", "Smoothed log-likelihood and CV error by K");
  CLI::App* profile = app.add_subcommand("profile", "Per-class profiles of the proxy variables");
  for (CLI::App* sub : {simulate, fit, experiment, select_k, profile}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return report("Usage", e.what(), 1);
  }

  try {
    cli::Common common;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        common.config = json::parse(in);
      } catch (const json::exception& e) {
        return report("Usage", "config: " + std::string(e.what()), 1);
      }
    }
    for (CLI::App* sub : app.get_subcommands()) {
      if (sub->count("--seed")) common.seed = seed;
      if (sub->count("--out")) common.out = out;
    }
    common.jobs = jobs;
    if (simulate->parsed()) return cli::cmd_simulate(common);
    if (fit->parsed()) return cli::cmd_fit(common);
    if (experiment->parsed()) return cli::cmd_experiment(common);
    if (select_k->parsed()) return cli::cmd_select_k(common);
    if (profile->parsed()) return cli::cmd_profile(common);
  } catch (const Error& e) {
    return report(to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const json::exception& e) {
    return report("Usage", std::string("config: ") + e.what(), 1);
  } catch (const std::filesystem::filesystem_error& e) {
    return report("Io", e.what(), 2);
  }
  return 1;
}
