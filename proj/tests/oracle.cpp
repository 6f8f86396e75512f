#include "oracle.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace treecut::testing {

std::vector<PointIndexSet> brute_force_components(const PointCloud& cloud,
                                                  const PointIndexSet& subset, double epsilon) {
    const std::size_t m = subset.size();
    std::vector<std::uint32_t> parent(m);
    for (std::uint32_t i = 0; i < m; ++i) parent[i] = i;
    std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    const double eps2 = epsilon * epsilon;
    for (std::size_t i = 0; i < m; ++i) {
        const Point& pi = cloud.points[subset.indices[i]];
        for (std::size_t j = i + 1; j < m; ++j) {
            const Point& pj = cloud.points[subset.indices[j]];
            const double dx = pi.x - pj.x, dy = pi.y - pj.y, dz = pi.z - pj.z;
            if (dx * dx + dy * dy + dz * dz <= eps2)
                parent[find(static_cast<std::uint32_t>(i))] = find(static_cast<std::uint32_t>(j));
        }
    }
    std::vector<std::int32_t> comp_of_root(m, -1);
    std::vector<PointIndexSet> components;
    for (std::uint32_t i = 0; i < m; ++i) {
        const auto r = find(i);
        if (comp_of_root[r] < 0) {
            comp_of_root[r] = static_cast<std::int32_t>(components.size());
            components.emplace_back();
        }
        components[static_cast<std::size_t>(comp_of_root[r])].indices.push_back(subset.indices[i]);
    }
    return components;
}

PointCloud random_cloud(Rng& rng, std::size_t n, double half_extent) {
    PointCloud cloud;
    cloud.frame_id = "random";
    cloud.points.resize(n);
    for (auto& p : cloud.points) {
        p.x = rng.uniform(-half_extent, half_extent);
        p.y = rng.uniform(-half_extent, half_extent);
        p.z = rng.uniform(-half_extent, half_extent);
    }
    return cloud;
}

namespace {

TreeNode build_random(Rng& rng, std::uint32_t leaf_lo, std::uint32_t leaf_hi,
                      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& leaf_ranges,
                      std::size_t max_children, int chain_budget) {
    TreeNode node;
    std::vector<std::uint32_t> indices;
    for (std::uint32_t l = leaf_lo; l < leaf_hi; ++l) {
        for (std::uint32_t i = leaf_ranges[l].first; i < leaf_ranges[l].second; ++i)
            indices.push_back(i);
    }
    node.points = PointIndexSet(std::move(indices));
    if (leaf_hi - leaf_lo == 1) {
        if (chain_budget > 0 && rng.uniform() < 0.15) {
            node.children.push_back(
                build_random(rng, leaf_lo, leaf_hi, leaf_ranges, max_children, chain_budget - 1));
        }
        return node;
    }
    const std::size_t span = leaf_hi - leaf_lo;
    std::size_t k;
    if (chain_budget > 0 && rng.uniform() < 0.1) {
        k = 1;
        --chain_budget;
    } else {
        k = 2 + rng.below(std::min(max_children, span) - 1);
    }
    // k contiguous leaf ranges, each nonempty.
    std::vector<std::uint32_t> cuts{leaf_lo, leaf_hi};
    while (cuts.size() < k + 1) {
        const auto c = leaf_lo + 1 + static_cast<std::uint32_t>(rng.below(span - 1));
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t part = 0; part + 1 < cuts.size(); ++part) {
        node.children.push_back(
            build_random(rng, cuts[part], cuts[part + 1], leaf_ranges, max_children, chain_budget));
    }
    return node;
}

}  // namespace

void assign_ids(TreeNode& node, const std::string& id) {
    node.id = id;
    for (std::size_t c = 0; c < node.children.size(); ++c)
        assign_ids(node.children[c], fmt::format("{}.{}", id, c));
}

TreeNode random_tree(Rng& rng, std::size_t max_leaves, std::size_t max_children,
                     const std::string& root_id) {
    const std::size_t leaves = 1 + rng.below(max_leaves);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> leaf_ranges;
    std::uint32_t next = 0;
    for (std::size_t l = 0; l < leaves; ++l) {
        const auto width = static_cast<std::uint32_t>(1 + rng.below(3));
        leaf_ranges.emplace_back(next, next + width);
        next += width;
    }
    TreeNode root = build_random(rng, 0, static_cast<std::uint32_t>(leaves), leaf_ranges,
                                 max_children, /*chain_budget=*/2);
    assign_ids(root, root_id);
    return root;
}

std::size_t leaf_index_count(const TreeNode& node) {
    return node.points.empty() ? 0 : node.points.indices.back() + 1;
}

PointCloud cloud_for_tree(const TreeNode& node) {
    PointCloud cloud;
    cloud.frame_id = "tree";
    cloud.points.resize(leaf_index_count(node));
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
        cloud.points[i].x = static_cast<double>(i);
    return cloud;
}

ScoreCache uniform_scores(const TreeNode& node, Rng& rng, std::string_view frame_id) {
    ScoreCache cache;
    for_each_node(node, [&](const TreeNode& n) {
        const auto key = segment_key(n.points, frame_id);
        if (!cache.entries.count(key)) cache.entries[key] = rng.uniform();
    });
    return cache;
}

double product_space_best(const std::vector<const TreeNode*>& roots, ScoringEngine& engine,
                          Aggregator aggregator, std::uint64_t cap) {
    std::vector<CutEnumerator> enums;
    enums.reserve(roots.size());
    for (const TreeNode* r : roots) enums.emplace_back(*r, cap);

    std::vector<std::uint64_t> odometer(roots.size(), 0);
    double best = 0.0;
    bool have_best = false;
    while (true) {
        std::vector<double> scores;
        for (std::size_t t = 0; t < roots.size(); ++t) {
            const Segmentation seg = enums[t].cut(odometer[t]);
            for (const auto& s : seg.segments) scores.push_back(engine.score(s));
        }
        double value;
        if (aggregator == Aggregator::min) {
            value = scores.front();
            for (double s : scores) value = std::min(value, s);
        } else {
            double sum = 0.0;
            for (double s : scores) sum += s;
            value = sum / static_cast<double>(scores.size());
        }
        if (!have_best || value > best) {
            have_best = true;
            best = value;
        }
        std::size_t t = roots.size();
        while (t-- > 0) {
            if (++odometer[t] < enums[t].size()) break;
            odometer[t] = 0;
            if (t == 0) return best;
        }
    }
}

namespace {

void collect_node_sets(const TreeNode& node, std::vector<const PointIndexSet*>& sets) {
    sets.push_back(&node.points);
    for (const auto& c : node.children) collect_node_sets(c, sets);
}

}  // namespace

bool segments_are_nodes(const Segmentation& seg, const std::vector<const TreeNode*>& roots) {
    std::vector<const PointIndexSet*> sets;
    for (const TreeNode* r : roots) collect_node_sets(*r, sets);
    for (const auto& segment : seg.segments) {
        bool found = false;
        for (const auto* set : sets) {
            if (*set == segment) {
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace treecut::testing
