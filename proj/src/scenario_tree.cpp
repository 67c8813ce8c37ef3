#include "fvtree/scenario_tree.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fvtree/format.hpp"
#include "fvtree/parallel.hpp"

namespace fvtree {

std::string_view to_string(TreeMode mode) {
  return mode == TreeMode::Benchmark ? "benchmark" : "biased";
}

TreeMode parse_tree_mode(std::string_view text) {
  if (text == "benchmark") return TreeMode::Benchmark;
  if (text == "biased") return TreeMode::Biased;
  throw std::invalid_argument(fmt::format("unknown tree mode '{}'", text));
}

void TreeConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("tree horizon must be >= 2");
  if (branching < 1) throw std::invalid_argument("tree branching must be >= 1");
  if (!(w0 >= 0.0) || !std::isfinite(w0)) throw std::invalid_argument("tree w0 must be >= 0");
  if (mode == TreeMode::Biased) {
    const double rare = branching * rare_fraction;
    if (!(rare_fraction > 0.0 && rare_fraction <= 1.0) || rare != std::round(rare) || rare < 1.0)
      throw std::invalid_argument(
          fmt::format("B * rare_fraction must be a positive integer (B = {}, rare_fraction = {})",
                      branching, rare_fraction));
  }
  node_count(static_cast<std::uint64_t>(branching), static_cast<std::uint64_t>(horizon));
}

int TreeConfig::rare_children() const {
  if (mode == TreeMode::Benchmark) return 0;
  return static_cast<int>(std::lround(branching * rare_fraction));
}

std::uint64_t node_count(std::uint64_t branching, std::uint64_t horizon) {
  if (branching < 1 || horizon < 1) throw std::invalid_argument("node_count needs B >= 1, H >= 1");
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 53;
  std::uint64_t total = 0;
  std::uint64_t level = 1;
  for (std::uint64_t h = 0; h < horizon; ++h) {
    if (h > 0) {
      if (level > kLimit / branching) throw std::overflow_error("scenario tree node count overflows");
      level *= branching;
    }
    total += level;
    if (total > kLimit) throw std::overflow_error("scenario tree node count overflows");
  }
  return total;
}

ScenarioTree::ScenarioTree(TreeConfig config, std::vector<TreeNode> nodes)
    : config_(config), nodes_(std::move(nodes)) {
  config_.validate();
  const auto B = static_cast<std::size_t>(config_.branching);
  const auto expected = node_count(B, static_cast<std::uint64_t>(config_.horizon));
  if (nodes_.size() != expected)
    throw std::invalid_argument(
        fmt::format("tree has {} nodes, expected {}", nodes_.size(), expected));

  stage_first_.resize(static_cast<std::size_t>(config_.horizon) + 1);
  std::size_t first = 0, level = 1;
  for (int h = 0; h <= config_.horizon; ++h) {
    stage_first_[static_cast<std::size_t>(h)] = first;
    first += level;
    level *= B;
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.id != i) throw std::invalid_argument(fmt::format("node {} has id {}", i, n.id));
    if (!(n.w >= 0.0) || !std::isfinite(n.w))
      throw std::invalid_argument(fmt::format("node {} has invalid wind power {}", i, n.w));
    if (i == 0) {
      if (n.parent || n.stage != 0 || n.w != config_.w0)
        throw std::invalid_argument("root must have stage 0, no parent and w = w0");
      continue;
    }
    const std::size_t parent = (i - 1) / B;
    if (n.parent != parent)
      throw std::invalid_argument(fmt::format("node {} must have parent {}", i, parent));
    if (n.stage != nodes_[parent].stage + 1)
      throw std::invalid_argument(fmt::format("node {} has stage {}, parent stage {}", i, n.stage,
                                              nodes_[parent].stage));
  }
}

const TreeNode& ScenarioTree::node(std::size_t id) const {
  if (id >= nodes_.size()) throw std::out_of_range(fmt::format("node id {} out of range", id));
  return nodes_[id];
}

IdRange ScenarioTree::children(std::size_t id) const {
  if (is_leaf(id)) return {0, 0};
  return {id * branching() + 1, branching()};
}

IdRange ScenarioTree::stage_range(int stage) const {
  if (stage < 0 || stage >= config_.horizon) throw std::out_of_range("stage out of range");
  const auto s = static_cast<std::size_t>(stage);
  return {stage_first_[s], stage_first_[s + 1] - stage_first_[s]};
}

bool operator==(const ScenarioTree& lhs, const ScenarioTree& rhs) {
  const auto& a = lhs.config_;
  const auto& b = rhs.config_;
  return a.horizon == b.horizon && a.branching == b.branching && a.w0 == b.w0 &&
         a.mode == b.mode && a.rare_fraction == b.rare_fraction && a.seed == b.seed &&
         lhs.nodes_ == rhs.nodes_;
}

ScenarioTree build_tree(const TreeConfig& config, const ARModel& model, const RareSampler& rare,
                        unsigned threads) {
  config.validate();
  if (config.mode == TreeMode::Biased && !rare)
    throw std::invalid_argument("biased trees need tail probabilities");

  const auto B = static_cast<std::size_t>(config.branching);
  const auto total = node_count(B, static_cast<std::uint64_t>(config.horizon));
  const auto n_rare = static_cast<std::size_t>(config.rare_children());

  std::vector<TreeNode> nodes(total);
  nodes[0] = TreeNode{0, std::nullopt, 0, config.w0, ARState{}, false};

  std::size_t first = 0, level = 1;
  for (int h = 0; h + 1 < config.horizon; ++h) {
    parallel_for(level, threads, [&](std::size_t k) {
      const std::size_t id = first + k;
      const TreeNode& parent = nodes[id];
      Rng rng(derive_seed(config.seed, "node", id));
      for (std::size_t j = 0; j < B; ++j) {
        const bool is_rare = j >= B - n_rare;
        const double change = is_rare ? rare(rng) : ar_step(model, parent.ar_state, rng).z;
        const std::size_t child = id * B + 1 + j;
        nodes[child] = TreeNode{child, id, h + 1, apply_change(parent.w, change),
                                advance(parent.ar_state, change), is_rare};
      }
    });
    first += level;
    level *= B;
  }
  return ScenarioTree(config, std::move(nodes));
}

double node_weight(const ScenarioTree& tree, std::size_t id) {
  return 1.0 / std::pow(static_cast<double>(tree.branching()), tree.node(id).stage);
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("line {}: {}", line, what)), line_(line) {}

void serialize(const ScenarioTree& tree, std::ostream& out) {
  const auto& c = tree.config();
  // Hand-written so that doubles use the fixed 17-digit format.
  out << "{\"B\":" << c.branching << ",\"H\":" << c.horizon << ",\"w0\":" << fmt17(c.w0)
      << ",\"mode\":\"" << to_string(c.mode) << "\",\"rare_fraction\":" << fmt17(c.rare_fraction)
      << ",\"seed\":" << c.seed << ",\"count\":" << tree.size() << "}\n";
  for (const auto& n : tree.nodes()) {
    out << n.id << ',';
    if (n.parent)
      out << *n.parent;
    else
      out << -1;
    out << ',' << n.stage << ',' << fmt17(n.w) << ',' << fmt17(n.ar_state.z_lag1) << ','
        << fmt17(n.ar_state.z_lag2) << ',' << (n.rare_branch ? 1 : 0) << '\n';
  }
}

namespace {

template <typename T>
T parse_field(std::string_view text, std::size_t line, const char* name) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(line, fmt::format("invalid {} '{}'", name, text));
  return value;
}

}  // namespace

ScenarioTree deserialize(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");

  TreeConfig config;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    config.branching = header.at("B").get<int>();
    config.horizon = header.at("H").get<int>();
    config.w0 = header.at("w0").get<double>();
    config.mode = parse_tree_mode(header.at("mode").get<std::string>());
    config.rare_fraction = header.value("rare_fraction", 0.5);
    config.seed = header.at("seed").get<std::uint64_t>();
    count = header.at("count").get<std::size_t>();
  } catch (const std::exception& ex) {
    throw ParseError(1, fmt::format("bad header: {}", ex.what()));
  }

  std::vector<TreeNode> nodes;
  nodes.reserve(count);
  std::size_t line_no = 1;
  while (nodes.size() < count && std::getline(in, line)) {
    ++line_no;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 7) throw ParseError(line_no, fmt::format("expected 7 fields, got {}", f.size()));

    TreeNode n;
    n.id = parse_field<std::size_t>(f[0], line_no, "id");
    const auto parent = parse_field<long long>(f[1], line_no, "parent");
    if (parent >= 0) n.parent = static_cast<std::size_t>(parent);
    n.stage = parse_field<int>(f[2], line_no, "stage");
    n.w = parse_field<double>(f[3], line_no, "w");
    n.ar_state.z_lag1 = parse_field<double>(f[4], line_no, "z_lag1");
    n.ar_state.z_lag2 = parse_field<double>(f[5], line_no, "z_lag2");
    const auto flag = parse_field<int>(f[6], line_no, "rare_flag");
    if (flag != 0 && flag != 1) throw ParseError(line_no, "rare_flag must be 0 or 1");
    n.rare_branch = flag == 1;
    nodes.push_back(n);
  }
  if (nodes.size() != count)
    throw ParseError(line_no + 1,
                     fmt::format("truncated tree file: expected {} nodes, got {}", count, nodes.size()));

  try {
    return ScenarioTree(config, std::move(nodes));
  } catch (const std::invalid_argument& ex) {
    throw ParseError(line_no, ex.what());
  }
}

}  // namespace fvtree
