#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fvtree/stochastic_models.hpp"

namespace fvtree {

enum class TreeMode { Benchmark, Biased };

std::string_view to_string(TreeMode mode);
TreeMode parse_tree_mode(std::string_view text);

struct TreeConfig {
  int horizon{5};
  int branching{20};
  double w0{10.0};
  TreeMode mode{TreeMode::Benchmark};
  double rare_fraction{0.5};
  std::uint64_t seed{0};

  void validate() const;
  // Children per sibling group drawn from the rare sampler (0 in Benchmark mode).
  int rare_children() const;
};

struct TreeNode {
  std::size_t id{0};
  std::optional<std::size_t> parent;
  int stage{0};
  double w{0.0};
  // Z history along the path; z_lag1 is the (unclamped) change into this node.
  ARState ar_state;
  bool rare_branch{false};

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct IdRange {
  std::size_t first{0};
  std::size_t count{0};

  std::size_t begin_id() const { return first; }
  std::size_t end_id() const { return first + count; }
};

// Complete order-B tree over stages 0..H-1 in breadth-first id order. The
// children of node n are ids n*B + 1 .. n*B + B.
class ScenarioTree {
 public:
  // Validates the breadth-first layout and node invariants.
  ScenarioTree(TreeConfig config, std::vector<TreeNode> nodes);

  const TreeConfig& config() const { return config_; }
  std::span<const TreeNode> nodes() const { return nodes_; }
  const TreeNode& node(std::size_t id) const;
  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const { return stage_range(config_.horizon - 1).count; }
  int horizon() const { return config_.horizon; }
  std::size_t branching() const { return static_cast<std::size_t>(config_.branching); }

  bool is_leaf(std::size_t id) const { return node(id).stage == config_.horizon - 1; }
  IdRange children(std::size_t id) const;
  IdRange stage_range(int stage) const;

  friend bool operator==(const ScenarioTree& lhs, const ScenarioTree& rhs);

 private:
  TreeConfig config_;
  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> stage_first_;
};

// Sum_{h=0}^{H-1} B^h; throws std::overflow_error beyond 2^53 (the exact
// integer range of the node weights' double arithmetic).
std::uint64_t node_count(std::uint64_t branching, std::uint64_t horizon);

// Breadth-first construction. The children of node n are drawn from a stream
// seeded by derive_seed(config.seed, "node", n), so the result does not depend
// on `threads`. In Biased mode the first B(1 - rare_fraction) children use the
// AR model and the rest use `rare`; both kinds feed the drawn change into the
// child's AR history. `rare` is ignored in Benchmark mode.
ScenarioTree build_tree(const TreeConfig& config, const ARModel& model, const RareSampler& rare,
                        unsigned threads = 1);

// B^{-stage}: fraction of scenarios passing through the node.
double node_weight(const ScenarioTree& tree, std::size_t id);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Line 1: JSON {"B","H","w0","mode","rare_fraction","seed","count"}; then
// "id,parent,stage,w,z_lag1,z_lag2,rare_flag" per node (root parent = -1),
// doubles with 17 significant digits.
void serialize(const ScenarioTree& tree, std::ostream& out);
ScenarioTree deserialize(std::istream& in);

}  // namespace fvtree
