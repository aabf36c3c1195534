#pragma once

// Gibbs weights of full configurations on T u dT.

#include <cmath>

#include "treegibbs/model.hpp"
#include "treegibbs/tree.hpp"

namespace treegibbs {

// log of exp(-sum U - sum W) over the edges of T (plus the edges into dT when
// the boundary is fixed) and the internal sites; -inf for invalid configurations.
// Boundary spins are read from `config`, which must agree with `boundary`.
inline double log_gibbs_weight(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
                               const Configuration& config) {
  if (config.size() != tree.total_count()) throw InvalidArgument("configuration size does not match the tree");
  const bool free = boundary.is_free();
  if (!free) {
    for (VertexId w = tree.internal_count(); w < tree.total_count(); ++w) {
      if (config[w] != boundary.spin(tree, w)) throw InvalidArgument("configuration disagrees with the boundary");
    }
  }
  double total = 0.0;
  for (VertexId v = 0; v < tree.internal_count(); ++v) {
    const Spin s = config[v];
    if (s >= model.spin_count()) throw InvalidArgument("spin index out of range");
    total += model.singleton_log_factor(s);
    auto ch = tree.children(v);
    if (free && tree.is_leaf(v)) continue;
    for (VertexId c = ch.begin; c < ch.end; ++c) {
      double lf = model.pair_log_factor(s, config[c]);
      if (lf == kNegInf) return kNegInf;
      total += lf;
    }
  }
  return total;
}

inline double gibbs_weight(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
                           const Configuration& config) {
  return std::exp(log_gibbs_weight(model, tree, boundary, config));
}

inline bool is_valid(const SpinModel& model, const TreeTopology& tree, const BoundaryCondition& boundary,
                     const Configuration& config) {
  return log_gibbs_weight(model, tree, boundary, config) != kNegInf;
}

// Spins of the neighbours of v that carry a factor (the parent, and the
// children unless v is a leaf under a free boundary). Returns the count.
inline int neighbor_spins(const TreeTopology& tree, const BoundaryCondition& boundary, const Configuration& config,
                          VertexId v, Spin* out) {
  int k = 0;
  if (v > 0) out[k++] = config[(v - 1) / static_cast<VertexId>(tree.branching())];
  if (boundary.is_free() && tree.is_leaf(v)) return k;
  auto ch = tree.children(v);
  for (VertexId c = ch.begin; c < ch.end; ++c) out[k++] = config[c];
  return k;
}

}  // namespace treegibbs
