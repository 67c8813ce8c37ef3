#include "commands.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fvtree/evaluation.hpp"

namespace fvtree::cli {

namespace fs = std::filesystem;

namespace {

void log(const std::string& line) { fmt::print(stderr, "[fvtree] {}\n", line); }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path.string()));
  return in;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

TailEstimate read_tail(const fs::path& path) {
  auto in = open_in(path);
  try {
    return tail_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& ex) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), ex.what()));
  }
}

ScenarioTree read_tree(const fs::path& path) {
  auto in = open_in(path);
  try {
    return deserialize(in);
  } catch (const ParseError& ex) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), ex.what()));
  }
}

TailEstimate run_estimate(const RunConfig& config) {
  log(fmt::format("estimating tail: N = {}, steps = {}, exit-mass steps = {}", config.n_particles,
                  config.n_steps, config.exit_mass_steps));
  return estimate_tail(config.ar_model(), config.partition(), config.fv_config(),
                       config.exit_mass_steps, config.exit_mass_seed());
}

std::string q_label(double q) { return fmt::format("{:g}", q); }

}  // namespace

fs::path tree_file_name(TreeMode mode) { return fmt::format("tree_{}.csv", to_string(mode)); }

int cmd_estimate_tail(const RunConfig& config, const Paths& paths) {
  const TailEstimate tail = run_estimate(config);
  write_json(paths.out_dir / "tail.json", to_json(tail));
  log(fmt::format("wrote {}", (paths.out_dir / "tail.json").string()));
  return kSuccess;
}

int cmd_build_tree(const RunConfig& config, const Paths& paths) {
  RareSampler rare;
  if (config.mode == TreeMode::Biased) {
    if (!paths.tail) throw ConfigError("biased trees need --tail <tail.json> (run estimate-tail first)");
    rare = read_tail(*paths.tail).sampler();
  }
  const ScenarioTree tree =
      build_tree(config.tree_config(config.mode), config.ar_model(), rare, config.threads);
  const fs::path out_path = paths.out_dir / tree_file_name(config.mode);
  auto out = open_out(out_path);
  serialize(tree, out);
  log(fmt::format("wrote {} ({} nodes, {} scenarios)", out_path.string(), tree.size(),
                  tree.leaf_count()));
  return kSuccess;
}

int cmd_solve(const RunConfig& config, const Paths& paths, bool export_lp_file) {
  if (!paths.tree) throw ConfigError("solve needs --tree <tree file>");
  const ScenarioTree tree = read_tree(*paths.tree);
  const Solution sol = solve_tree_dp(tree, config.costs, config.solver);

  {
    auto out = open_out(paths.out_dir / "solution.csv");
    write_solution_csv(sol, out);
  }
  write_json(paths.out_dir / "solution.json", solution_summary(sol));
  if (export_lp_file) {
    auto out = open_out(paths.out_dir / "model.lp");
    const LpStats stats = export_lp(tree, config.costs, config.solver, out);
    log(fmt::format("wrote model.lp ({} binaries, {} rows)", stats.variables, stats.constraints));
  }

  if (!sol.feasible) {
    log(fmt::format("infeasible: forcing cannot be met at node {}", sol.witness.value_or(0)));
    return kInfeasible;
  }
  const Verification check = verify_solution(tree, config.costs, sol, config.solver);
  if (!check.feasible || check.objective != sol.objective)
    throw std::runtime_error(fmt::format("solution failed verification: {}", check.violation));
  log(fmt::format("objective {:.6f}, root {}", sol.objective, to_string(sol.states.front())));
  return kSuccess;
}

int cmd_evaluate(const RunConfig& config, const Paths& paths) {
  if (!paths.tree || !paths.solution)
    throw ConfigError("evaluate needs --tree <tree file> and --solution <solution.csv>");
  const ScenarioTree tree = read_tree(*paths.tree);
  Solution sol;
  {
    auto csv = open_in(*paths.solution);
    fs::path sidecar = *paths.solution;
    sidecar.replace_extension(".json");
    auto js = open_in(sidecar);
    sol = read_solution(csv, nlohmann::json::parse(js));
  }
  if (sol.states.size() != tree.size())
    throw std::runtime_error("solution and tree sizes differ");

  RareSampler rare;
  bool needs_rare = false;
  for (double q : config.q_values) needs_rare = needs_rare || q > 0.0;
  if (paths.tail) {
    rare = read_tail(*paths.tail).sampler();
  } else if (needs_rare) {
    throw ConfigError("evaluating with q > 0 needs --tail <tail.json>");
  }

  const auto mode = tree.config().mode;
  nlohmann::json report = nlohmann::json::array();
  std::vector<TrajectoryRow> trajectories;
  for (double q : config.q_values) {
    const auto batch = generate_batch(q, config.n_realizations, tree.horizon(), tree.config().w0,
                                      config.realization_seed(), config.ar_model(), rare,
                                      config.threads);
    std::vector<DispatchTrace> traces;
    traces.reserve(batch.size());
    for (const auto& r : batch) traces.push_back(realized_dispatch(sol, tree, r, config.costs));
    auto entry = to_json(summarize(traces, batch, config.costs));
    entry["q"] = q;
    entry["method"] = std::string(to_string(mode));
    report.push_back(std::move(entry));

    auto out = open_out(paths.out_dir / fmt::format("traces_q{}.csv", q_label(q)));
    write_traces_csv(traces, batch, out);
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t h = 0; h < traces[i].path.size(); ++h)
        trajectories.push_back(TrajectoryRow{mode, q, i, static_cast<int>(h), batch[i].y[h],
                                             tree.node(traces[i].path[h]).w});
  }
  write_json(paths.out_dir / "report.json", report);
  auto out = open_out(paths.out_dir / "trajectories.csv");
  write_trajectories_csv(trajectories, out);
  log(fmt::format("wrote report.json for {} q values", config.q_values.size()));
  return kSuccess;
}

int cmd_reproduce_table(const RunConfig& config, const Paths& paths) {
  const TailEstimate tail = run_estimate(config);
  write_json(paths.out_dir / "tail.json", to_json(tail));

  TableSetup setup{config.ar_model(),     config.tree_config(config.mode), config.costs,
                   config.solver,         config.q_values,                 config.n_realizations,
                   config.realization_seed(), config.threads};
  log(fmt::format("building and solving B = {}, H = {} trees", config.branching, config.horizon));
  const TableReport table = reproduce_table(setup, tail);

  write_json(paths.out_dir / "table.json", to_json(table));
  {
    auto out = open_out(paths.out_dir / "trajectories.csv");
    write_trajectories_csv(table.trajectories, out);
  }
  std::ostringstream text;
  write_table_text(table, text);
  {
    auto out = open_out(paths.out_dir / "table.txt");
    out << text.str();
  }
  fmt::print("{}", text.str());
  return kSuccess;
}

}  // namespace fvtree::cli
