#pragma once

#include <functional>
#include <random>
#include <vector>

#include "fvtree/scenario_tree.hpp"

namespace testing_helpers {

// Complete order-B tree with wind power chosen per node id.
inline fvtree::ScenarioTree make_tree(int B, int H, const std::function<double(std::size_t)>& w,
                                      double w0 = 10.0) {
  fvtree::TreeConfig cfg;
  cfg.branching = B;
  cfg.horizon = H;
  cfg.w0 = w0;
  const auto total = fvtree::node_count(static_cast<std::uint64_t>(B), static_cast<std::uint64_t>(H));
  std::vector<fvtree::TreeNode> nodes(total);
  for (std::size_t i = 0; i < total; ++i) {
    auto& n = nodes[i];
    n.id = i;
    if (i == 0) {
      n.w = w0;
      continue;
    }
    n.parent = (i - 1) / static_cast<std::size_t>(B);
    n.stage = nodes[*n.parent].stage + 1;
    n.w = w(i);
    n.ar_state = {n.w - nodes[*n.parent].w, nodes[*n.parent].ar_state.z_lag1};
  }
  return fvtree::ScenarioTree(cfg, std::move(nodes));
}

// Dyadic values keep every float sum exact, so exact equality checks are meaningful.
inline double dyadic(std::mt19937_64& gen, int lo_halves, int hi_halves) {
  std::uniform_int_distribution<int> d(lo_halves, hi_halves);
  return 0.5 * d(gen);
}

}  // namespace testing_helpers
