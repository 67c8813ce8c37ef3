#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fvtree/dispatch_solver.hpp"
#include "fvtree/fv_tail.hpp"
#include "fvtree/scenario_tree.hpp"
#include "fvtree/stochastic_models.hpp"

namespace fvtree {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a pipeline run needs. Defaults are the five-stage, 20-branch
// desk setup (W0 = 10 GW, D = 6 GW, p_max = 400 GW, a = 2, c = 3).
//
// TOML schema (every key optional):
//
//   seed = 1                       # master seed
//   threads = 1
//   [ar]         phi1, phi2, innovation_std
//   [tail]       a, c_threshold, inner_edge, inner_count, exit_mass_steps
//   [fv]         n_particles, burn_in, n_steps
//   [tree]       horizon, branching, w0, mode ("benchmark" | "biased"), rare_fraction
//   [costs]      c_start, c_operate, c_stop, c_per_gw, p_max,
//                demand (number, or array with one entry per stage)
//   [solver]     allowed_root (array of "idle" | "starting" | "operating" | "stopping"),
//                shortfall_tolerance
//   [evaluation] q (array), n_realizations
struct RunConfig {
  double phi1{0.90};
  double phi2{0.05};
  double innovation_std{1.0};

  double a{2.0};
  double c_threshold{3.0};
  double inner_edge{9.0};
  int inner_count{5};
  std::size_t exit_mass_steps{1'000'000};

  std::size_t n_particles{1000};
  std::size_t burn_in{100};
  std::size_t n_steps{10'000};

  int horizon{5};
  int branching{20};
  double w0{10.0};
  TreeMode mode{TreeMode::Benchmark};
  double rare_fraction{0.5};

  CostParams costs{};
  SolveOptions solver{};

  std::vector<double> q_values{0.0, 0.05, 0.10};
  std::size_t n_realizations{100};

  std::uint64_t master_seed{1};
  unsigned threads{1};

  // Re-runs every module-level check; throws ConfigError.
  void validate() const;

  ARModel ar_model() const;
  TailPartition partition() const;
  FVConfig fv_config() const;
  TreeConfig tree_config(TreeMode tree_mode) const;

  // Stage seeds, all derived from master_seed.
  std::uint64_t fv_seed() const;
  std::uint64_t exit_mass_seed() const;
  std::uint64_t tree_seed() const;
  std::uint64_t realization_seed() const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::string_view toml_text);

}  // namespace fvtree
