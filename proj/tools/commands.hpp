#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>

#include <fmt/core.h>

#include "fvtree/config.hpp"

namespace fvtree::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfigError = 2,
  kInfeasible = 3,
  kEstimationFailure = 4,
};

struct Paths {
  std::filesystem::path out_dir{"."};
  std::optional<std::filesystem::path> tail;
  std::optional<std::filesystem::path> tree;
  std::optional<std::filesystem::path> solution;
};

// Each command writes into paths.out_dir and returns an exit code. Library
// exceptions propagate; run_command maps them to exit codes.
int cmd_estimate_tail(const RunConfig& config, const Paths& paths);
int cmd_build_tree(const RunConfig& config, const Paths& paths);
int cmd_solve(const RunConfig& config, const Paths& paths, bool export_lp);
int cmd_evaluate(const RunConfig& config, const Paths& paths);
int cmd_reproduce_table(const RunConfig& config, const Paths& paths);

std::filesystem::path tree_file_name(TreeMode mode);

// Maps ConfigError -> 2, EstimationError -> 4, anything else -> 1.
template <typename Fn>
int run_command(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& ex) {
    fmt::print(stderr, "config error: {}\n", ex.what());
    return kConfigError;
  } catch (const EstimationError& ex) {
    fmt::print(stderr, "estimation failure: {}\n", ex.what());
    return kEstimationFailure;
  } catch (const std::exception& ex) {
    fmt::print(stderr, "error: {}\n", ex.what());
    return kFailure;
  }
}

}  // namespace fvtree::cli
