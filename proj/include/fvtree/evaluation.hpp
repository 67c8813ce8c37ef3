#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fvtree/dispatch_solver.hpp"
#include "fvtree/fv_tail.hpp"
#include "fvtree/scenario_tree.hpp"
#include "fvtree/stochastic_models.hpp"

namespace fvtree {

// Root-to-leaf path that follows, stage by stage, the child whose wind power
// is closest to the realized value (ties go to the lowest id).
std::vector<std::size_t> closest_path(const ScenarioTree& tree, const Realization& realization);

struct DispatchTrace {
  std::vector<std::size_t> path;
  std::vector<PlantState> states;
  std::vector<double> coal_power;
  std::vector<double> stage_costs;
  std::vector<double> unmet;
  double cost{0.0};
  bool satisfied{true};
};

// Open-loop lookup of the plan along the closest path, charged against the
// realized wind: coal power min(p_max, [D - Y]_+) only where the plan says
// Operating, and whatever is left of [D - Y]_+ is unmet.
DispatchTrace realized_dispatch(const Solution& solution, const ScenarioTree& tree,
                                const Realization& realization, const CostParams& params);

struct EvaluationReport {
  std::size_t n_realizations{0};
  std::size_t n_rare{0};
  double avg_cost{0.0};
  double pct_realizations_unsatisfied{0.0};
  double pct_unmet_power_all{0.0};
  // Not applicable (nullopt) when the batch has no rare realization.
  std::optional<double> pct_rare_realizations_unsatisfied;
  std::optional<double> pct_unmet_power_rare;
  // Unmet energy as a share of the energy the plant was needed for,
  // sum of [D - Y]_+, instead of total demand. 0 when nothing was needed.
  double pct_unmet_of_needed_all{0.0};
  std::optional<double> pct_unmet_of_needed_rare;
};

EvaluationReport summarize(std::span<const DispatchTrace> traces,
                           std::span<const Realization> realizations, const CostParams& params);

EvaluationReport evaluate_batch(const Solution& solution, const ScenarioTree& tree,
                                std::span<const Realization> realizations,
                                const CostParams& params);

nlohmann::json to_json(const EvaluationReport& report);

// Seeds are derived as derive_seed(master, "realization", i) and do not depend
// on q, so batches for different q share their randomness.
std::vector<Realization> generate_batch(double q, std::size_t n, int horizon, double y0,
                                        std::uint64_t master, const ARModel& model,
                                        const RareSampler& rare, unsigned threads = 1);

// realization_id,stage,y,node_id,state,coal_power,unmet,cost
void write_traces_csv(std::span<const DispatchTrace> traces,
                      std::span<const Realization> realizations, std::ostream& out);

struct TableSetup {
  ARModel model;
  TreeConfig tree;  // mode is overridden per method
  CostParams costs;
  SolveOptions solve;
  std::vector<double> q_values{0.0, 0.05, 0.10};
  std::size_t n_realizations{100};
  std::uint64_t realization_seed{0};
  unsigned threads{1};
};

struct TableColumn {
  double q{0.0};
  TreeMode method{TreeMode::Benchmark};
  EvaluationReport report;
};

struct TrajectoryRow {
  TreeMode method;
  double q;
  std::size_t realization_id;
  int stage;
  double y;
  double closest_w;
};

struct TableReport {
  std::vector<TableColumn> columns;  // q-major, Benchmark before Biased
  std::vector<double> objectives;    // planning objective per method (Benchmark, Biased)
  std::vector<TrajectoryRow> trajectories;

  const TableColumn& column(double q, TreeMode method) const;
};

// Builds and solves both trees, then evaluates both plans against one shared
// realization batch per q value.
TableReport reproduce_table(const TableSetup& setup, const TailEstimate& tail);

nlohmann::json to_json(const TableReport& report);
// Plain-text results table: one column per (method, q), one row per metric.
void write_table_text(const TableReport& report, std::ostream& out);
// method,q,realization_id,stage,y,closest_w
void write_trajectories_csv(std::span<const TrajectoryRow> rows, std::ostream& out);

}  // namespace fvtree
