#include "fvtree/config.hpp"

#include <fstream>
#include <sstream>

#include <toml.hpp>

#include <fmt/format.h>

namespace fvtree {

namespace {

template <typename T>
void read(const toml::table& tbl, std::string_view section, std::string_view key, T& out) {
  const toml::node* node = section.empty() ? tbl.get(key) : nullptr;
  if (!section.empty()) {
    if (const auto* sub = tbl.get_as<toml::table>(section)) node = sub->get(key);
  }
  if (!node) return;
  const auto where = section.empty() ? std::string(key) : fmt::format("{}.{}", section, key);
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) {
      out = *v;
      return;
    }
  } else {
    if (auto v = node->value<std::int64_t>()) {
      if (*v < 0) throw ConfigError(fmt::format("{} must be non-negative", where));
      out = static_cast<T>(*v);
      return;
    }
  }
  throw ConfigError(fmt::format("{} has the wrong type", where));
}

std::vector<double> read_numbers(const toml::node& node, std::string_view where) {
  std::vector<double> out;
  if (auto v = node.value<double>()) {
    out.push_back(*v);
    return out;
  }
  const auto* arr = node.as_array();
  if (!arr) throw ConfigError(fmt::format("{} must be a number or an array of numbers", where));
  for (const auto& item : *arr) {
    auto v = item.value<double>();
    if (!v) throw ConfigError(fmt::format("{} must contain numbers only", where));
    out.push_back(*v);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  try {
    ar_model();
    partition();
    fv_config().validate();
    if (exit_mass_steps < 1) throw std::invalid_argument("tail.exit_mass_steps must be >= 1");
    tree_config(TreeMode::Benchmark).validate();
    tree_config(TreeMode::Biased).validate();
    costs.validate();
    if (solver.allowed_root.empty()) throw std::invalid_argument("solver.allowed_root is empty");
    if (!(solver.shortfall_tolerance >= 0.0))
      throw std::invalid_argument("solver.shortfall_tolerance must be >= 0");
    if (q_values.empty()) throw std::invalid_argument("evaluation.q is empty");
    for (double q : q_values) RealizationConfig{q, horizon, w0, 0}.validate();
    if (n_realizations < 1) throw std::invalid_argument("evaluation.n_realizations must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(ex.what());
  }
}

ARModel RunConfig::ar_model() const { return ARModel(phi1, phi2, innovation_std); }

TailPartition RunConfig::partition() const {
  return build_partition(a, c_threshold, inner_edge, inner_count);
}

FVConfig RunConfig::fv_config() const { return FVConfig{n_particles, n_steps, burn_in, fv_seed()}; }

TreeConfig RunConfig::tree_config(TreeMode tree_mode) const {
  return TreeConfig{horizon, branching, w0, tree_mode, rare_fraction, tree_seed()};
}

std::uint64_t RunConfig::fv_seed() const { return derive_seed(master_seed, "fv"); }
std::uint64_t RunConfig::exit_mass_seed() const { return derive_seed(master_seed, "exit-mass"); }
std::uint64_t RunConfig::tree_seed() const { return derive_seed(master_seed, "tree"); }
std::uint64_t RunConfig::realization_seed() const { return derive_seed(master_seed, "realizations"); }

RunConfig parse_config(std::string_view toml_text) {
  toml::table tbl;
  try {
    tbl = toml::parse(toml_text);
  } catch (const toml::parse_error& err) {
    throw ConfigError(fmt::format("config parse error at line {}: {}", err.source().begin.line,
                                  err.description()));
  }

  RunConfig c;
  read(tbl, "", "seed", c.master_seed);
  read(tbl, "", "threads", c.threads);

  read(tbl, "ar", "phi1", c.phi1);
  read(tbl, "ar", "phi2", c.phi2);
  read(tbl, "ar", "innovation_std", c.innovation_std);

  read(tbl, "tail", "a", c.a);
  read(tbl, "tail", "c_threshold", c.c_threshold);
  read(tbl, "tail", "inner_edge", c.inner_edge);
  read(tbl, "tail", "inner_count", c.inner_count);
  read(tbl, "tail", "exit_mass_steps", c.exit_mass_steps);

  read(tbl, "fv", "n_particles", c.n_particles);
  read(tbl, "fv", "burn_in", c.burn_in);
  read(tbl, "fv", "n_steps", c.n_steps);

  read(tbl, "tree", "horizon", c.horizon);
  read(tbl, "tree", "branching", c.branching);
  read(tbl, "tree", "w0", c.w0);
  std::string mode(to_string(c.mode));
  read(tbl, "tree", "mode", mode);
  try {
    c.mode = parse_tree_mode(mode);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  read(tbl, "tree", "rare_fraction", c.rare_fraction);

  read(tbl, "costs", "c_start", c.costs.c_start);
  read(tbl, "costs", "c_operate", c.costs.c_operate);
  read(tbl, "costs", "c_stop", c.costs.c_stop);
  read(tbl, "costs", "c_per_gw", c.costs.c_per_gw);
  read(tbl, "costs", "p_max", c.costs.p_max);
  if (const auto* node = tbl.at_path("costs.demand").node())
    c.costs.demand = read_numbers(*node, "costs.demand");

  if (const auto* arr = tbl.at_path("solver.allowed_root").as_array()) {
    c.solver.allowed_root.clear();
    for (const auto& item : *arr) {
      auto name = item.value<std::string>();
      if (!name) throw ConfigError("solver.allowed_root must list state names");
      try {
        c.solver.allowed_root.push_back(parse_plant_state(*name));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
      }
    }
  }
  read(tbl, "solver", "shortfall_tolerance", c.solver.shortfall_tolerance);

  if (const auto* node = tbl.at_path("evaluation.q").node())
    c.q_values = read_numbers(*node, "evaluation.q");
  read(tbl, "evaluation", "n_realizations", c.n_realizations);

  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace fvtree
