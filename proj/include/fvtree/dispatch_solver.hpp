#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fvtree/scenario_tree.hpp"

namespace fvtree {

// Coal plant commitment state; the integer values are the ones used in files.
enum class PlantState : int { Idle = 1, Starting = 2, Operating = 3, Stopping = 4 };

inline constexpr std::array<PlantState, 4> kPlantStates = {
    PlantState::Idle, PlantState::Starting, PlantState::Operating, PlantState::Stopping};

constexpr int to_int(PlantState s) { return static_cast<int>(s); }
constexpr std::size_t index_of(PlantState s) { return static_cast<std::size_t>(s) - 1; }
PlantState plant_state_from_int(int value);
std::string_view to_string(PlantState s);
PlantState parse_plant_state(std::string_view text);

// One-stage transitions:
//   Idle      -> Idle | Starting
//   Starting  -> Operating | Stopping
//   Operating -> Operating | Stopping
//   Stopping  -> Idle | Starting
std::array<PlantState, 2> successor_states(PlantState s);
bool is_transition_allowed(PlantState from, PlantState to);

struct CostParams {
  double c_start{3.0};
  double c_operate{5.0};
  double c_stop{2.0};
  double c_per_gw{20.0};
  double p_max{400.0};
  // Demand per stage (GW). Stages past the end reuse the last entry.
  std::vector<double> demand{6.0};

  void validate() const;
  double demand_at(int stage) const;
};

// min(p_max, max(demand - wind, 0))
double shortfall_power(double demand, double wind, double p_max);

// Idle: 0, Starting: c_start, Operating: c_operate + c_per_gw * p, Stopping: c_stop.
double stage_cost(PlantState state, double p, const CostParams& params);

struct SolveOptions {
  std::vector<PlantState> allowed_root{PlantState::Idle, PlantState::Starting};
  // A node is forced to Operating when its shortfall exceeds this value.
  double shortfall_tolerance{0.0};
};

struct Solution {
  std::vector<PlantState> states;
  double objective{0.0};
  bool feasible{false};
  // For infeasible instances: a node whose forcing cannot be met.
  std::optional<std::size_t> witness;
};

// Exact minimum of sum_n B^{-stage(n)} stage_cost(x_n, p_n) over one state per
// node, subject to the transitions on every tree edge, x_n = Operating
// wherever p_n > tolerance, and x_root in allowed_root. Bottom-up value
// recursion over the breadth-first layout; ties prefer the lower state value.
// The reported objective is the node-order sum of the extracted assignment,
// so verify_solution reproduces it exactly.
Solution solve_tree_dp(const ScenarioTree& tree, const CostParams& params,
                       const SolveOptions& options = {});

struct Verification {
  bool feasible{false};
  double objective{0.0};
  std::string violation;  // empty when feasible
  std::optional<std::size_t> node;
  std::optional<std::size_t> parent;
};

// Independent re-check of the single-state, transition, forcing and root
// constraints, plus the node-order objective.
Verification verify_solution(const ScenarioTree& tree, const CostParams& params,
                             const Solution& solution, const SolveOptions& options = {});

// Objective of an arbitrary assignment (summed in node-id order).
double assignment_cost(const ScenarioTree& tree, const CostParams& params,
                       const std::vector<PlantState>& states);

struct LpStats {
  std::size_t variables{0};
  std::size_t constraints{0};
  std::size_t forcing_rows{0};
};

// Writes the equivalent binary program in CPLEX LP syntax. Variables are
// x_<node>_<state>. Rows:
//   s_n: one single-state equality per node;
//   t_m: one row per edge (parent n, child m),
//          x_n_2 + x_n_3 - x_m_3 - x_m_4 = 0,
//        which together with the single-state rows is equivalent to the four
//        transition inequalities (Idle/Stopping lead to Idle/Starting,
//        Starting/Operating lead to Operating/Stopping);
//   f_n: x_n_3 = 1 for every shortfall node;
//   r_0: disallowed root states sum to 0 (omitted if every state is allowed).
LpStats export_lp(const ScenarioTree& tree, const CostParams& params, const SolveOptions& options,
                  std::ostream& out);

// Solution CSV (node_id,state) and JSON sidecar {objective, feasible, root_state}.
void write_solution_csv(const Solution& solution, std::ostream& out);
nlohmann::json solution_summary(const Solution& solution);
Solution read_solution(std::istream& csv, const nlohmann::json& summary);

}  // namespace fvtree
