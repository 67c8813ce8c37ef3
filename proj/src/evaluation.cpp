#include "fvtree/evaluation.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fvtree/format.hpp"
#include "fvtree/parallel.hpp"

namespace fvtree {

std::vector<std::size_t> closest_path(const ScenarioTree& tree, const Realization& realization) {
  if (realization.y.size() != static_cast<std::size_t>(tree.horizon()))
    throw std::invalid_argument(fmt::format("realization has {} stages, tree has {}",
                                            realization.y.size(), tree.horizon()));
  std::vector<std::size_t> path{0};
  path.reserve(realization.y.size());
  for (std::size_t h = 1; h < realization.y.size(); ++h) {
    const IdRange kids = tree.children(path.back());
    std::size_t best = kids.begin_id();
    double best_dist = std::abs(realization.y[h] - tree.node(best).w);
    for (std::size_t m = best + 1; m < kids.end_id(); ++m) {
      const double d = std::abs(realization.y[h] - tree.node(m).w);
      if (d < best_dist) {
        best = m;
        best_dist = d;
      }
    }
    path.push_back(best);
  }
  return path;
}

DispatchTrace realized_dispatch(const Solution& solution, const ScenarioTree& tree,
                                const Realization& realization, const CostParams& params) {
  if (solution.states.size() != tree.size())
    throw std::invalid_argument("solution does not cover the tree");
  DispatchTrace t;
  t.path = closest_path(tree, realization);
  const std::size_t H = t.path.size();
  t.states.resize(H);
  t.coal_power.resize(H);
  t.stage_costs.resize(H);
  t.unmet.resize(H);
  for (std::size_t h = 0; h < H; ++h) {
    const PlantState s = solution.states[t.path[h]];
    const double demand = params.demand_at(static_cast<int>(h));
    const double gap = std::max(demand - realization.y[h], 0.0);
    t.states[h] = s;
    t.coal_power[h] = s == PlantState::Operating ? std::min(params.p_max, gap) : 0.0;
    t.stage_costs[h] = stage_cost(s, t.coal_power[h], params);
    t.unmet[h] = std::max(gap - t.coal_power[h], 0.0);
    t.cost += t.stage_costs[h];
    if (t.unmet[h] > 0.0) t.satisfied = false;
  }
  return t;
}

EvaluationReport summarize(std::span<const DispatchTrace> traces,
                           std::span<const Realization> realizations, const CostParams& params) {
  if (traces.empty()) throw std::invalid_argument("cannot summarize an empty batch");
  if (traces.size() != realizations.size())
    throw std::invalid_argument("traces and realizations differ in length");

  EvaluationReport r;
  r.n_realizations = traces.size();
  double cost = 0.0, unmet_all = 0.0, demand_all = 0.0, unmet_rare = 0.0, demand_rare = 0.0;
  double needed_all = 0.0, needed_rare = 0.0;
  std::size_t unsat_all = 0, unsat_rare = 0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    double unmet = 0.0, demand = 0.0, needed = 0.0;
    for (std::size_t h = 0; h < t.unmet.size(); ++h) {
      unmet += t.unmet[h];
      demand += params.demand_at(static_cast<int>(h));
      needed += t.coal_power[h] + t.unmet[h];
    }
    cost += t.cost;
    unmet_all += unmet;
    demand_all += demand;
    needed_all += needed;
    if (!t.satisfied) ++unsat_all;
    if (realizations[i].is_rare) {
      ++r.n_rare;
      unmet_rare += unmet;
      demand_rare += demand;
      needed_rare += needed;
      if (!t.satisfied) ++unsat_rare;
    }
  }
  const auto n = static_cast<double>(r.n_realizations);
  auto pct = [](double num, double den) { return den > 0.0 ? 100.0 * num / den : 0.0; };
  r.avg_cost = cost / n;
  r.pct_realizations_unsatisfied = 100.0 * static_cast<double>(unsat_all) / n;
  r.pct_unmet_power_all = pct(unmet_all, demand_all);
  r.pct_unmet_of_needed_all = pct(unmet_all, needed_all);
  if (r.n_rare > 0) {
    r.pct_rare_realizations_unsatisfied =
        100.0 * static_cast<double>(unsat_rare) / static_cast<double>(r.n_rare);
    r.pct_unmet_power_rare = pct(unmet_rare, demand_rare);
    r.pct_unmet_of_needed_rare = pct(unmet_rare, needed_rare);
  }
  return r;
}

EvaluationReport evaluate_batch(const Solution& solution, const ScenarioTree& tree,
                                std::span<const Realization> realizations,
                                const CostParams& params) {
  std::vector<DispatchTrace> traces;
  traces.reserve(realizations.size());
  for (const auto& r : realizations) traces.push_back(realized_dispatch(solution, tree, r, params));
  return summarize(traces, realizations, params);
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["n_realizations"] = r.n_realizations;
  j["n_rare"] = r.n_rare;
  j["avg_cost"] = r.avg_cost;
  j["pct_realizations_unsatisfied"] = r.pct_realizations_unsatisfied;
  j["pct_unmet_power_all"] = r.pct_unmet_power_all;
  j["pct_rare_realizations_unsatisfied"] =
      r.pct_rare_realizations_unsatisfied ? nlohmann::json(*r.pct_rare_realizations_unsatisfied)
                                          : nlohmann::json(nullptr);
  j["pct_unmet_power_rare"] =
      r.pct_unmet_power_rare ? nlohmann::json(*r.pct_unmet_power_rare) : nlohmann::json(nullptr);
  j["pct_unmet_of_needed_all"] = r.pct_unmet_of_needed_all;
  j["pct_unmet_of_needed_rare"] = r.pct_unmet_of_needed_rare
                                      ? nlohmann::json(*r.pct_unmet_of_needed_rare)
                                      : nlohmann::json(nullptr);
  return j;
}

std::vector<Realization> generate_batch(double q, std::size_t n, int horizon, double y0,
                                        std::uint64_t master, const ARModel& model,
                                        const RareSampler& rare, unsigned threads) {
  std::vector<Realization> batch(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const RealizationConfig cfg{q, horizon, y0, derive_seed(master, "realization", i)};
    batch[i] = generate_realization(cfg, model, ARState{}, rare);
  });
  return batch;
}

void write_traces_csv(std::span<const DispatchTrace> traces,
                      std::span<const Realization> realizations, std::ostream& out) {
  out << "realization_id,stage,y,node_id,state,coal_power,unmet,cost\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    for (std::size_t h = 0; h < t.path.size(); ++h)
      out << i << ',' << h << ',' << fmt17(realizations[i].y[h]) << ',' << t.path[h] << ','
          << to_int(t.states[h]) << ',' << fmt17(t.coal_power[h]) << ',' << fmt17(t.unmet[h])
          << ',' << fmt17(t.stage_costs[h]) << '\n';
  }
}

const TableColumn& TableReport::column(double q, TreeMode method) const {
  for (const auto& c : columns)
    if (c.q == q && c.method == method) return c;
  throw std::out_of_range(fmt::format("no column for q = {} / {}", q, to_string(method)));
}

TableReport reproduce_table(const TableSetup& setup, const TailEstimate& tail) {
  const RareSampler rare = tail.sampler();
  TableReport report;

  struct Plan {
    TreeMode mode;
    ScenarioTree tree;
    Solution solution;
  };
  std::vector<Plan> plans;
  for (auto mode : {TreeMode::Benchmark, TreeMode::Biased}) {
    TreeConfig cfg = setup.tree;
    cfg.mode = mode;
    ScenarioTree tree = build_tree(cfg, setup.model, rare, setup.threads);
    Solution sol = solve_tree_dp(tree, setup.costs, setup.solve);
    if (!sol.feasible)
      throw std::runtime_error(fmt::format("{} tree: planning problem is infeasible (node {})",
                                           to_string(mode), sol.witness.value_or(0)));
    report.objectives.push_back(sol.objective);
    plans.push_back(Plan{mode, std::move(tree), std::move(sol)});
  }

  for (double q : setup.q_values) {
    const auto batch = generate_batch(q, setup.n_realizations, setup.tree.horizon, setup.tree.w0,
                                      setup.realization_seed, setup.model, rare, setup.threads);
    for (const auto& plan : plans) {
      std::vector<DispatchTrace> traces(batch.size());
      parallel_for(batch.size(), setup.threads, [&](std::size_t i) {
        traces[i] = realized_dispatch(plan.solution, plan.tree, batch[i], setup.costs);
      });
      report.columns.push_back(TableColumn{q, plan.mode, summarize(traces, batch, setup.costs)});
      for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t h = 0; h < traces[i].path.size(); ++h)
          report.trajectories.push_back(TrajectoryRow{plan.mode, q, i, static_cast<int>(h),
                                                      batch[i].y[h],
                                                      plan.tree.node(traces[i].path[h]).w});
    }
  }
  return report;
}

nlohmann::json to_json(const TableReport& report) {
  nlohmann::json j;
  j["objectives"] = {{"benchmark", report.objectives.at(0)}, {"biased", report.objectives.at(1)}};
  auto cols = nlohmann::json::array();
  for (const auto& c : report.columns) {
    auto col = to_json(c.report);
    col["q"] = c.q;
    col["method"] = std::string(to_string(c.method));
    cols.push_back(std::move(col));
  }
  j["columns"] = std::move(cols);
  return j;
}

void write_table_text(const TableReport& report, std::ostream& out) {
  auto pct = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.1f}%", *v) : std::string("---");
  };
  out << fmt::format("{:<44}", "metric (n = " +
                                   std::to_string(report.columns.empty()
                                                      ? 0
                                                      : report.columns.front().report.n_realizations) +
                                   ")");
  for (const auto& c : report.columns)
    out << fmt::format("{:>12}", fmt::format("{}@{:g}%", c.method == TreeMode::Benchmark ? "BM" : "Biased",
                                             100.0 * c.q));
  out << '\n';
  auto row = [&](const char* name, auto&& cell) {
    out << fmt::format("{:<44}", name);
    for (const auto& c : report.columns) out << fmt::format("{:>12}", cell(c.report));
    out << '\n';
  };
  row("n rare realizations", [](const EvaluationReport& r) { return std::to_string(r.n_rare); });
  row("1 average observed cost", [](const EvaluationReport& r) { return fmt::format("{:.1f}", r.avg_cost); });
  row("2 % realizations with unsatisfied demand",
      [&](const EvaluationReport& r) { return pct(r.pct_realizations_unsatisfied); });
  row("3 % unsatisfied power, all realizations",
      [&](const EvaluationReport& r) { return pct(r.pct_unmet_power_all); });
  row("4 % rare realizations with unsatisfied demand",
      [&](const EvaluationReport& r) { return pct(r.pct_rare_realizations_unsatisfied); });
  row("5 % unsatisfied power, rare realizations",
      [&](const EvaluationReport& r) { return pct(r.pct_unmet_power_rare); });
  row("  unmet share of needed backup, all",
      [&](const EvaluationReport& r) { return pct(r.pct_unmet_of_needed_all); });
  row("  unmet share of needed backup, rare",
      [&](const EvaluationReport& r) { return pct(r.pct_unmet_of_needed_rare); });
}

void write_trajectories_csv(std::span<const TrajectoryRow> rows, std::ostream& out) {
  out << "method,q,realization_id,stage,y,closest_w\n";
  for (const auto& r : rows)
    out << to_string(r.method) << ',' << fmt17(r.q) << ',' << r.realization_id << ',' << r.stage
        << ',' << fmt17(r.y) << ',' << fmt17(r.closest_w) << '\n';
}

}  // namespace fvtree
