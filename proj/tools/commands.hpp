#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "semimix/fit_result.hpp"
#include "semimix/parametric_em.hpp"
#include "semimix/semiparametric_mm.hpp"
#include "semimix/two_step.hpp"

namespace semimix::cli {

// Settings shared by every subcommand; flags override the config file.
struct Common {
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  int jobs = 1;

  std::uint64_t seed_or(std::uint64_t fallback) const;
  std::filesystem::path out_dir() const;  // created on demand
};

enum class Mode { SimultaneousParametric, SimultaneousSemiParametric, TwoStepParametric, TwoStepSemiParametric };

Mode parse_mode(const std::string& text);
std::string to_string(Mode mode);

struct MethodOptions {
  std::uint64_t seed = 0;
  int n_starts = 5;
  KernelConfig kernel;
  bool hard = false;
};

struct MethodOutput {
  FitResult result;
  std::optional<SemiParamModel> semi;
  std::optional<ParametricModel> parametric;
};

// `clustering` replaces the X-only clustering for the two-step and as the
// first start of the simultaneous semi-parametric fit.
MethodOutput run_method(const Dataset& data, std::size_t k, const LossSpec& loss, Mode mode,
                        const MethodOptions& options, const std::optional<ClusterResult>& clustering = {});

int cmd_simulate(const Common& common);
int cmd_fit(const Common& common);
int cmd_experiment(const Common& common);
int cmd_select_k(const Common& common);
int cmd_profile(const Common& common);

}  // namespace semimix::cli
