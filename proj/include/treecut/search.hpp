#pragma once

#include <cstdint>

#include "treecut/geometry.hpp"
#include "treecut/hierarchy.hpp"
#include "treecut/objectness.hpp"

namespace treecut {

enum class Aggregator { min, avg };

struct SearchResult {
    Segmentation segmentation;   // segments ordered by smallest member index
    double score = 0.0;          // flat re-aggregation over the segments
    Aggregator aggregator = Aggregator::min;
    std::size_t nodes_visited = 0;
    std::size_t nodes_scored = 0;
};

// Exact maximizer of the worst segment objectness over all tree-consistent
// segmentations of the node. Refinement requires strict improvement, so ties
// keep the coarser cut, and a subtree whose optimum cannot beat the coarse
// score abandons its remaining siblings.
SearchResult opt_min_seg(const TreeNode& node, ScoringEngine& engine);

// Same optimum without the sibling abandonment; kept as the serial reference
// the pruned version is checked against.
SearchResult opt_min_seg_reference(const TreeNode& node, ScoringEngine& engine);

// Greedy maximizer of the mean segment objectness: at each node, the better
// of the coarse cut and the union of the children's greedy results. Not
// guaranteed optimal; the result never scores below the root's own
// objectness.
SearchResult greedy_avg_seg(const TreeNode& node, ScoringEngine& engine);

// Exhaustive oracle over every enumerable cut; ties resolve to the first cut
// in enumeration order.
SearchResult brute_force_opt(const TreeNode& node, ScoringEngine& engine, Aggregator aggregator,
                             std::uint64_t cap = kDefaultCutCap);

// Per-root search unioned into one global segmentation. For min the union of
// per-tree optima is globally optimal; for avg each tree is solved greedily
// and the reported score is the mean over all returned segments. Trees are
// searched in parallel when the scorer allows it; results do not depend on
// the thread count.
SearchResult segment_forest(const Forest& forest, const PointCloud& cloud,
                            const ObjectnessScorer& scorer, Aggregator aggregator);

}  // namespace treecut
