#include <CLI11.hpp>

#include "commands.hpp"

using namespace fvtree;

int main(int argc, char** argv) {
  CLI::App app{"Rare-event-aware scenario trees for coal plant commitment under wind uncertainty"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<unsigned> threads;
  std::string out_dir = ".";
  std::string tail, tree, solution;
  bool export_lp = false;

  app.add_option("--config", config_path, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--mode", mode, "Tree mode")->check(CLI::IsMember({"benchmark", "biased"}));
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);

  auto* estimate = app.add_subcommand("estimate-tail", "Estimate rare-change interval probabilities");
  auto* build = app.add_subcommand("build-tree", "Build a benchmark or biased scenario tree");
  build->add_option("--tail", tail, "tail.json from estimate-tail (required for biased trees)");
  auto* solve = app.add_subcommand("solve", "Solve the commitment problem on a tree");
  solve->add_option("--tree", tree, "Tree file")->required();
  solve->add_flag("--export-lp", export_lp, "Also write model.lp");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a solved tree on mixture realizations");
  evaluate->add_option("--tree", tree, "Tree file")->required();
  evaluate->add_option("--solution", solution, "solution.csv (solution.json must sit next to it)")
      ->required();
  evaluate->add_option("--tail", tail, "tail.json (required when any q > 0)");
  auto* table = app.add_subcommand("reproduce-table", "Run the full pipeline and print the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  return cli::run_command([&]() -> int {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) config.master_seed = *seed;
    if (mode) config.mode = parse_tree_mode(*mode);
    if (threads) config.threads = *threads;
    config.validate();

    cli::Paths paths;
    paths.out_dir = out_dir;
    if (!tail.empty()) paths.tail = tail;
    if (!tree.empty()) paths.tree = tree;
    if (!solution.empty()) paths.solution = solution;

    if (*estimate) return cli::cmd_estimate_tail(config, paths);
    if (*build) return cli::cmd_build_tree(config, paths);
    if (*solve) return cli::cmd_solve(config, paths, export_lp);
    if (*evaluate) return cli::cmd_evaluate(config, paths);
    if (*table) return cli::cmd_reproduce_table(config, paths);
    return cli::kFailure;
  });
}
