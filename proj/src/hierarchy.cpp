#include "treecut/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <tuple>

#include <fmt/format.h>

#include "treecut/errors.hpp"

namespace treecut {

namespace {

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        for (std::uint64_t v : {static_cast<std::uint64_t>(k.x), static_cast<std::uint64_t>(k.y),
                                static_cast<std::uint64_t>(k.z)}) {
            h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

struct UnionFind {
    std::vector<std::uint32_t> parent;
    std::vector<std::uint32_t> size;

    explicit UnionFind(std::size_t n) : parent(n), size(n, 1) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::uint32_t>(i);
    }

    std::uint32_t find(std::uint32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
};

// Forward half of the 27-cell neighborhood: pairs are generated once.
constexpr int kForward[13][3] = {{1, 0, 0},  {-1, 1, 0},  {0, 1, 0},  {1, 1, 0},  {-1, -1, 1},
                                 {0, -1, 1}, {1, -1, 1},  {-1, 0, 1}, {0, 0, 1},  {1, 0, 1},
                                 {-1, 1, 1}, {0, 1, 1},   {1, 1, 1}};

}  // namespace

std::vector<PointIndexSet> connected_components(const PointCloud& cloud,
                                                const PointIndexSet& subset, double epsilon) {
    if (!std::isfinite(epsilon) || epsilon <= 0.0)
        throw invalid_parameter_error(fmt::format("epsilon must be finite and > 0, got {}", epsilon));
    const std::size_t m = subset.size();
    if (m == 0) return {};

    // Bucket subset members into epsilon-sized cells. Local index = position
    // in the (sorted) subset, so per-cell lists come out ascending.
    const double inv = 1.0 / epsilon;
    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> grid;
    grid.reserve(m);
    auto cell_of = [&](std::uint32_t local) {
        const Point& p = cloud.points[subset.indices[local]];
        return CellKey{static_cast<std::int64_t>(std::floor(p.x * inv)),
                       static_cast<std::int64_t>(std::floor(p.y * inv)),
                       static_cast<std::int64_t>(std::floor(p.z * inv))};
    };
    for (std::uint32_t local = 0; local < m; ++local) grid[cell_of(local)].push_back(local);

    std::vector<CellKey> cells;
    cells.reserve(grid.size());
    for (const auto& [key, pts] : grid) cells.push_back(key);
    std::sort(cells.begin(), cells.end(), [](const CellKey& a, const CellKey& b) {
        return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
    });

    const double eps2 = epsilon * epsilon;
    auto close = [&](std::uint32_t a, std::uint32_t b) {
        const Point& pa = cloud.points[subset.indices[a]];
        const Point& pb = cloud.points[subset.indices[b]];
        const double dx = pa.x - pb.x, dy = pa.y - pb.y, dz = pa.z - pb.z;
        return dx * dx + dy * dy + dz * dz <= eps2;
    };

    // Phase 1 (parallel): collect epsilon-edges per cell, keeping only edges
    // that merge components of the cell's own subgraph (a spanning subset
    // preserves connectivity, and dense cells would otherwise emit quadratic
    // edge lists). Phase 2 (serial): union everything, which keeps the result
    // identical for every thread count.
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> edges(cells.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(cells.size()); ++c) {
        const auto& here = grid.at(cells[c]);
        auto& out = edges[c];

        std::unordered_map<std::uint32_t, std::uint32_t> slot;
        std::vector<std::uint32_t> local_parent;
        auto local_find = [&](std::uint32_t s) {
            while (local_parent[s] != s) {
                local_parent[s] = local_parent[local_parent[s]];
                s = local_parent[s];
            }
            return s;
        };
        auto slot_of = [&](std::uint32_t point) {
            auto [it, inserted] =
                slot.try_emplace(point, static_cast<std::uint32_t>(local_parent.size()));
            if (inserted) local_parent.push_back(static_cast<std::uint32_t>(local_parent.size()));
            return it->second;
        };
        auto try_edge = [&](std::uint32_t a, std::uint32_t b) {
            if (!close(a, b)) return;
            const auto ra = local_find(slot_of(a));
            const auto rb = local_find(slot_of(b));
            if (ra == rb) return;
            local_parent[ra] = rb;
            out.emplace_back(a, b);
        };

        for (std::size_t i = 0; i < here.size(); ++i) {
            for (std::size_t j = i + 1; j < here.size(); ++j) try_edge(here[i], here[j]);
        }
        for (const auto& d : kForward) {
            const CellKey nk{cells[c].x + d[0], cells[c].y + d[1], cells[c].z + d[2]};
            auto it = grid.find(nk);
            if (it == grid.end()) continue;
            for (std::uint32_t a : here) {
                for (std::uint32_t b : it->second) try_edge(a, b);
            }
        }
    }

    UnionFind uf(m);
    for (const auto& cell_edges : edges) {
        for (const auto& [a, b] : cell_edges) uf.unite(a, b);
    }

    // Components keyed by root, numbered in order of smallest member.
    std::vector<std::int32_t> comp_of_root(m, -1);
    std::vector<PointIndexSet> components;
    for (std::uint32_t local = 0; local < m; ++local) {
        const std::uint32_t r = uf.find(local);
        if (comp_of_root[r] < 0) {
            comp_of_root[r] = static_cast<std::int32_t>(components.size());
            components.emplace_back();
        }
        components[static_cast<std::size_t>(comp_of_root[r])].indices.push_back(
            subset.indices[local]);
    }
    return components;
}

namespace {

void validate_schedule(const std::vector<double>& schedule) {
    if (schedule.empty()) throw invalid_parameter_error("epsilon schedule is empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!std::isfinite(schedule[i]) || schedule[i] <= 0.0)
            throw invalid_parameter_error(
                fmt::format("epsilon schedule entry {} must be finite and > 0, got {}", i,
                            schedule[i]));
        if (i > 0 && schedule[i] >= schedule[i - 1])
            throw invalid_parameter_error(
                fmt::format("epsilon schedule must be strictly decreasing ({} then {})",
                            schedule[i - 1], schedule[i]));
    }
}

}  // namespace

Forest build_forest(const PointCloud& cloud, const std::vector<double>& schedule) {
    validate_schedule(schedule);
    Forest forest;
    forest.epsilon_schedule = schedule;
    forest.cloud_size = cloud.size();
    if (cloud.empty()) return forest;

    const auto roots = connected_components(cloud, full_index_set(cloud.size()), schedule[0]);
    forest.trees.resize(roots.size());
    for (std::size_t t = 0; t < roots.size(); ++t) {
        forest.trees[t].points = roots[t];
        forest.trees[t].epsilon_level = schedule[0];
        forest.trees[t].id = fmt::format("t{}", t);
    }

    std::vector<TreeNode*> frontier;
    for (auto& tree : forest.trees) frontier.push_back(&tree);

    for (std::size_t level = 1; level < schedule.size(); ++level) {
        const double eps = schedule[level];
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(frontier.size()); ++i) {
            try {
                TreeNode* parent = frontier[i];
                auto comps = connected_components(cloud, parent->points, eps);
                parent->children.resize(comps.size());
                std::size_t covered = 0;
                for (std::size_t c = 0; c < comps.size(); ++c) {
                    covered += comps[c].size();
                    parent->children[c].points = std::move(comps[c]);
                    parent->children[c].epsilon_level = eps;
                    parent->children[c].id = fmt::format("{}.{}", parent->id, c);
                }
                if (covered != parent->points.size())
                    throw invalid_input_error(
                        fmt::format("children of {} do not cover the parent", parent->id));
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
        std::vector<TreeNode*> next;
        for (TreeNode* parent : frontier) {
            for (auto& child : parent->children) next.push_back(&child);
        }
        frontier = std::move(next);
    }
    return forest;
}

std::size_t node_count(const TreeNode& node) {
    std::size_t n = 1;
    for (const auto& c : node.children) n += node_count(c);
    return n;
}

std::size_t node_count(const Forest& forest) {
    std::size_t n = 0;
    for (const auto& t : forest.trees) n += node_count(t);
    return n;
}

void for_each_node(const TreeNode& node, const std::function<void(const TreeNode&)>& fn) {
    fn(node);
    for (const auto& c : node.children) for_each_node(c, fn);
}

void for_each_node(const Forest& forest, const std::function<void(const TreeNode&)>& fn) {
    for (const auto& t : forest.trees) for_each_node(t, fn);
}

BigCount count_tree_consistent(const TreeNode& node) {
    if (node.is_leaf()) return 1;
    BigCount product = 1;
    for (const auto& c : node.children) product *= count_tree_consistent(c);
    return product + 1;
}

CutEnumerator::CutEnumerator(const TreeNode& root, std::uint64_t cap) : root_(&root) {
    const BigCount exact = count_tree_consistent(root);
    if (exact > cap) {
        throw size_overflow_error(
            fmt::format("{} tree-consistent segmentations exceed the cap of {}", exact.str(), cap),
            exact.str());
    }
    total_ = count_of(root);
}

std::uint64_t CutEnumerator::count_of(const TreeNode& node) {
    std::uint64_t n = 1;
    if (!node.is_leaf()) {
        for (const auto& c : node.children) n *= count_of(c);
        n += 1;
    }
    counts_[&node] = n;
    return n;
}

void CutEnumerator::decode(const TreeNode& node, std::uint64_t i, Segmentation& out) const {
    if (i == 0) {
        out.segments.push_back(node.points);
        return;
    }
    std::uint64_t rem = i - 1;
    // Mixed-radix digits over child counts, last child fastest.
    std::uint64_t suffix = 1;
    for (const auto& c : node.children) suffix *= counts_.at(&c);
    for (const auto& c : node.children) {
        suffix /= counts_.at(&c);
        decode(c, rem / suffix, out);
        rem %= suffix;
    }
}

Segmentation CutEnumerator::cut(std::uint64_t i) const {
    if (i >= total_)
        throw invalid_parameter_error(fmt::format("cut index {} out of range (count {})", i, total_));
    Segmentation out;
    decode(*root_, i, out);
    return out;
}

Segmentation level_cut(const Forest& forest, double epsilon) {
    std::size_t level = forest.epsilon_schedule.size();
    for (std::size_t i = 0; i < forest.epsilon_schedule.size(); ++i) {
        if (forest.epsilon_schedule[i] == epsilon) {
            level = i;
            break;
        }
    }
    if (level == forest.epsilon_schedule.size())
        throw invalid_parameter_error(
            fmt::format("epsilon {} is not a member of the schedule", epsilon));

    Segmentation out;
    std::function<void(const TreeNode&, std::size_t)> walk = [&](const TreeNode& node,
                                                                 std::size_t depth) {
        if (depth == level) {
            out.segments.push_back(node.points);
            return;
        }
        for (const auto& c : node.children) walk(c, depth + 1);
    };
    for (const auto& t : forest.trees) walk(t, 0);
    return out;
}

}  // namespace treecut
