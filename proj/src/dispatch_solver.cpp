#include "fvtree/dispatch_solver.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fvtree/format.hpp"

namespace fvtree {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> stage_weights(const ScenarioTree& tree) {
  std::vector<double> w(static_cast<std::size_t>(tree.horizon()));
  for (std::size_t h = 0; h < w.size(); ++h)
    w[h] = 1.0 / std::pow(static_cast<double>(tree.branching()), static_cast<double>(h));
  return w;
}

double node_shortfall(const ScenarioTree& tree, const CostParams& params, std::size_t id) {
  const auto& n = tree.node(id);
  return shortfall_power(params.demand_at(n.stage), n.w, params.p_max);
}

bool root_allowed(const SolveOptions& options, PlantState s) {
  for (auto a : options.allowed_root)
    if (a == s) return true;
  return false;
}

}  // namespace

PlantState plant_state_from_int(int value) {
  if (value < 1 || value > 4) throw std::invalid_argument(fmt::format("invalid plant state {}", value));
  return static_cast<PlantState>(value);
}

std::string_view to_string(PlantState s) {
  switch (s) {
    case PlantState::Idle: return "idle";
    case PlantState::Starting: return "starting";
    case PlantState::Operating: return "operating";
    case PlantState::Stopping: return "stopping";
  }
  return "?";
}

PlantState parse_plant_state(std::string_view text) {
  for (auto s : kPlantStates)
    if (to_string(s) == text) return s;
  throw std::invalid_argument(fmt::format("unknown plant state '{}'", text));
}

std::array<PlantState, 2> successor_states(PlantState s) {
  switch (s) {
    case PlantState::Idle:
    case PlantState::Stopping: return {PlantState::Idle, PlantState::Starting};
    case PlantState::Starting:
    case PlantState::Operating: return {PlantState::Operating, PlantState::Stopping};
  }
  throw std::invalid_argument("invalid plant state");
}

bool is_transition_allowed(PlantState from, PlantState to) {
  const auto next = successor_states(from);
  return next[0] == to || next[1] == to;
}

void CostParams::validate() const {
  for (double c : {c_start, c_operate, c_stop, c_per_gw})
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("costs must be finite and >= 0");
  if (!(p_max > 0.0)) throw std::invalid_argument("p_max must be > 0");
  if (demand.empty()) throw std::invalid_argument("demand sequence is empty");
  for (double d : demand)
    if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("demand must be finite and >= 0");
}

double CostParams::demand_at(int stage) const {
  if (demand.empty()) throw std::invalid_argument("demand sequence is empty");
  const auto s = static_cast<std::size_t>(std::max(stage, 0));
  return demand[std::min(s, demand.size() - 1)];
}

double shortfall_power(double demand, double wind, double p_max) {
  return std::min(p_max, std::max(demand - wind, 0.0));
}

double stage_cost(PlantState state, double p, const CostParams& params) {
  switch (state) {
    case PlantState::Idle: return 0.0;
    case PlantState::Starting: return params.c_start;
    case PlantState::Operating: return params.c_operate + params.c_per_gw * p;
    case PlantState::Stopping: return params.c_stop;
  }
  throw std::invalid_argument("invalid plant state");
}

double assignment_cost(const ScenarioTree& tree, const CostParams& params,
                       const std::vector<PlantState>& states) {
  const auto weights = stage_weights(tree);
  double total = 0.0;
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const auto stage = static_cast<std::size_t>(tree.node(id).stage);
    total += weights[stage] * stage_cost(states[id], node_shortfall(tree, params, id), params);
  }
  return total;
}

Solution solve_tree_dp(const ScenarioTree& tree, const CostParams& params,
                       const SolveOptions& options) {
  params.validate();
  if (options.allowed_root.empty()) throw std::invalid_argument("allowed_root is empty");

  const std::size_t V = tree.size();
  const auto weights = stage_weights(tree);
  std::vector<std::array<double, 4>> value(V);
  std::vector<char> forced(V);

  for (std::size_t id = V; id-- > 0;) {
    const auto& node = tree.node(id);
    const double p = node_shortfall(tree, params, id);
    forced[id] = p > options.shortfall_tolerance;
    const IdRange kids = tree.children(id);
    for (auto s : kPlantStates) {
      double v = kInf;
      if (!forced[id] || s == PlantState::Operating) {
        v = weights[static_cast<std::size_t>(node.stage)] * stage_cost(s, p, params);
        const auto next = successor_states(s);
        for (std::size_t m = kids.begin_id(); m < kids.end_id() && v < kInf; ++m)
          v += std::min(value[m][index_of(next[0])], value[m][index_of(next[1])]);
      }
      value[id][index_of(s)] = v;
    }
  }

  Solution sol;
  sol.states.assign(V, PlantState::Idle);

  double best = kInf;
  std::optional<PlantState> root_state;
  for (auto s : kPlantStates) {
    if (!root_allowed(options, s)) continue;
    if (value[0][index_of(s)] < best) {
      best = value[0][index_of(s)];
      root_state = s;
    }
  }

  if (!root_state) {
    // Walk down to a node whose forcing cannot be met by any reachable state.
    std::vector<PlantState> candidates;
    for (auto s : kPlantStates)
      if (root_allowed(options, s) && (!forced[0] || s == PlantState::Operating))
        candidates.push_back(s);
    std::size_t id = 0;
    while (!candidates.empty()) {
      const auto s = candidates.front();
      const auto next = successor_states(s);
      const IdRange kids = tree.children(id);
      std::size_t m = kids.begin_id();
      while (m < kids.end_id() && std::min(value[m][index_of(next[0])], value[m][index_of(next[1])]) < kInf)
        ++m;
      if (m == kids.end_id()) break;  // cannot happen: an infinite value has a cause below
      id = m;
      candidates.clear();
      for (auto c : next)
        if (!forced[id] || c == PlantState::Operating) candidates.push_back(c);
    }
    sol.feasible = false;
    sol.objective = kInf;
    sol.witness = id;
    return sol;
  }

  sol.states[0] = *root_state;
  for (std::size_t id = 1; id < V; ++id) {
    const auto parent = *tree.node(id).parent;
    const auto next = successor_states(sol.states[parent]);
    sol.states[id] = value[id][index_of(next[1])] < value[id][index_of(next[0])] ? next[1] : next[0];
  }
  sol.feasible = true;
  sol.objective = assignment_cost(tree, params, sol.states);
  return sol;
}

Verification verify_solution(const ScenarioTree& tree, const CostParams& params,
                             const Solution& solution, const SolveOptions& options) {
  Verification v;
  if (solution.states.size() != tree.size()) {
    v.violation = fmt::format("solution has {} states for {} nodes", solution.states.size(), tree.size());
    return v;
  }
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const int raw = to_int(solution.states[id]);
    if (raw < 1 || raw > 4) {
      v.violation = fmt::format("node {} has invalid state {}", id, raw);
      v.node = id;
      return v;
    }
  }
  if (!root_allowed(options, solution.states[0])) {
    v.violation = fmt::format("root state {} is not allowed", to_string(solution.states[0]));
    v.node = 0;
    return v;
  }
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const auto& node = tree.node(id);
    if (node.parent && !is_transition_allowed(solution.states[*node.parent], solution.states[id])) {
      v.violation = fmt::format("forbidden transition {} -> {} on edge {} -> {}",
                                to_string(solution.states[*node.parent]),
                                to_string(solution.states[id]), *node.parent, id);
      v.node = id;
      v.parent = node.parent;
      return v;
    }
    const double p = node_shortfall(tree, params, id);
    if (p > options.shortfall_tolerance && solution.states[id] != PlantState::Operating) {
      v.violation = fmt::format("node {} has shortfall {} GW but state {}", id, p,
                                to_string(solution.states[id]));
      v.node = id;
      return v;
    }
  }
  v.feasible = true;
  v.objective = assignment_cost(tree, params, solution.states);
  return v;
}

LpStats export_lp(const ScenarioTree& tree, const CostParams& params, const SolveOptions& options,
                  std::ostream& out) {
  params.validate();
  const auto weights = stage_weights(tree);
  LpStats stats;
  stats.variables = 4 * tree.size();

  out << "\\ Coal plant commitment over a scenario tree (B = " << tree.branching()
      << ", H = " << tree.horizon() << ", V = " << tree.size() << ")\n";
  out << "Minimize\n obj:";
  bool any = false;
  auto term = [&](double coef, std::size_t id, int state) {
    if (coef == 0.0) return;
    out << "\n " << (any ? "+ " : "") << fmt17(coef) << " x_" << id << '_' << state;
    any = true;
  };
  for (std::size_t id = 0; id < tree.size(); ++id) {
    const double w = weights[static_cast<std::size_t>(tree.node(id).stage)];
    const double p = node_shortfall(tree, params, id);
    term(w * params.c_start, id, 2);
    term(w * (params.c_operate + params.c_per_gw * p), id, 3);
    term(w * params.c_stop, id, 4);
  }
  if (!any) out << " 0 x_0_1";
  out << "\nSubject To\n";

  for (std::size_t id = 0; id < tree.size(); ++id) {
    out << " s_" << id << ": x_" << id << "_1 + x_" << id << "_2 + x_" << id << "_3 + x_" << id
        << "_4 = 1\n";
    ++stats.constraints;
  }
  for (std::size_t id = 1; id < tree.size(); ++id) {
    const auto p = *tree.node(id).parent;
    out << " t_" << id << ": x_" << p << "_2 + x_" << p << "_3 - x_" << id << "_3 - x_" << id
        << "_4 = 0\n";
    ++stats.constraints;
  }
  for (std::size_t id = 0; id < tree.size(); ++id) {
    if (node_shortfall(tree, params, id) > options.shortfall_tolerance) {
      out << " f_" << id << ": x_" << id << "_3 = 1\n";
      ++stats.constraints;
      ++stats.forcing_rows;
    }
  }
  std::vector<int> banned;
  for (auto s : kPlantStates)
    if (!root_allowed(options, s)) banned.push_back(to_int(s));
  if (!banned.empty()) {
    out << " r_0:";
    for (std::size_t k = 0; k < banned.size(); ++k)
      out << (k ? " + " : " ") << "x_0_" << banned[k];
    out << " = 0\n";
    ++stats.constraints;
  }

  out << "Binary\n";
  for (std::size_t id = 0; id < tree.size(); ++id)
    for (int j = 1; j <= 4; ++j) out << " x_" << id << '_' << j << '\n';
  out << "End\n";
  return stats;
}

void write_solution_csv(const Solution& solution, std::ostream& out) {
  out << "node_id,state\n";
  for (std::size_t id = 0; id < solution.states.size(); ++id)
    out << id << ',' << to_int(solution.states[id]) << '\n';
}

nlohmann::json solution_summary(const Solution& solution) {
  nlohmann::json j;
  j["feasible"] = solution.feasible;
  if (solution.feasible) {
    j["objective"] = solution.objective;
    j["root_state"] = to_int(solution.states.front());
  } else {
    j["objective"] = nullptr;
    j["root_state"] = nullptr;
    if (solution.witness) j["witness_node"] = *solution.witness;
  }
  return j;
}

Solution read_solution(std::istream& csv, const nlohmann::json& summary) {
  Solution sol;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(csv, line) || line != "node_id,state")
    throw ParseError(1, "expected header 'node_id,state'");
  ++line_no;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t id = 0;
    char comma = 0;
    int state = 0;
    if (!(fields >> id >> comma >> state) || comma != ',' || id != sol.states.size())
      throw ParseError(line_no, fmt::format("malformed solution row '{}'", line));
    try {
      sol.states.push_back(plant_state_from_int(state));
    } catch (const std::invalid_argument& ex) {
      throw ParseError(line_no, ex.what());
    }
  }
  sol.feasible = summary.at("feasible").get<bool>();
  sol.objective = sol.feasible ? summary.at("objective").get<double>() : kInf;
  return sol;
}

}  // namespace fvtree
