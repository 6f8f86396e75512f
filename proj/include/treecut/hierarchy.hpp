#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "treecut/geometry.hpp"

namespace treecut {

// One grouping node. Children partition the parent's point set and are
// ordered by their smallest contained point index. Node ids are rendered as
// "t<tree>" for roots with ".<child ordinal>" appended per level, so they are
// reproducible for a given cloud and schedule.
struct TreeNode {
    PointIndexSet points;
    double epsilon_level = 0.0;
    std::string id;
    std::vector<TreeNode> children;

    bool is_leaf() const noexcept { return children.empty(); }
};

// Top-down multi-tree hierarchy over one cloud.
struct Forest {
    std::vector<TreeNode> trees;
    std::vector<double> epsilon_schedule;  // strictly decreasing, meters
    std::size_t cloud_size = 0;
};

using BigCount = boost::multiprecision::cpp_int;

// Connected components of the subset under the epsilon-neighbor graph
// (3D Euclidean hops <= epsilon). Components are ordered by smallest member.
std::vector<PointIndexSet> connected_components(const PointCloud& cloud,
                                                const PointIndexSet& subset, double epsilon);

// Recursive top-down grouping: level-k nodes are the components at
// schedule[k] within their level-(k-1) parent. Single-child chains are kept.
Forest build_forest(const PointCloud& cloud, const std::vector<double>& schedule);

std::size_t node_count(const TreeNode& node);
std::size_t node_count(const Forest& forest);

void for_each_node(const TreeNode& node, const std::function<void(const TreeNode&)>& fn);
void for_each_node(const Forest& forest, const std::function<void(const TreeNode&)>& fn);

// Number of tree-consistent segmentations of the subtree: 1 for a leaf,
// otherwise 1 plus the product over children.
BigCount count_tree_consistent(const TreeNode& node);

inline constexpr std::uint64_t kDefaultCutCap = 1'000'000;

// Lazy enumeration of every tree-consistent segmentation of one node.
// Construction refuses (size_overflow_error carrying the exact count) when
// the cut count exceeds the cap. cut(i) decodes the i-th segmentation:
// index 0 is the coarse {node}; the rest walk the product space of child
// cuts with the last child varying fastest. Segments come out ordered by
// smallest member index.
class CutEnumerator {
public:
    explicit CutEnumerator(const TreeNode& root, std::uint64_t cap = kDefaultCutCap);

    std::uint64_t size() const noexcept { return total_; }
    Segmentation cut(std::uint64_t i) const;

private:
    std::uint64_t count_of(const TreeNode& node);
    void decode(const TreeNode& node, std::uint64_t i, Segmentation& out) const;

    const TreeNode* root_;
    std::uint64_t total_ = 0;
    std::unordered_map<const TreeNode*, std::uint64_t> counts_;
};

// The fixed-threshold baseline: all nodes at one epsilon of the schedule.
Segmentation level_cut(const Forest& forest, double epsilon);

}  // namespace treecut
