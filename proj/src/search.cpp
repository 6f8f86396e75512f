#include "treecut/search.hpp"

#include <algorithm>
#include <exception>

#include <fmt/format.h>

#include "treecut/errors.hpp"

namespace treecut {

namespace {

struct NodeCut {
    std::vector<const TreeNode*> nodes;
    std::vector<double> scores;  // parallel to nodes
};

double flat_sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double flat_min(const std::vector<double>& v) {
    double m = v.front();
    for (double x : v) m = std::min(m, x);
    return m;
}

double aggregate(const std::vector<double>& scores, Aggregator agg) {
    return agg == Aggregator::min ? flat_min(scores)
                                  : flat_sum(scores) / static_cast<double>(scores.size());
}

double score_node(ScoringEngine& engine, const TreeNode& node) {
    try {
        return engine.score(node);
    } catch (const std::exception& e) {
        throw scorer_error(fmt::format("scoring node {}: {}", node.id, e.what()));
    }
}

struct SearchCounters {
    std::size_t visited = 0;
};

NodeCut opt_min_rec(const TreeNode& node, ScoringEngine& engine, SearchCounters& counters,
                    bool prune) {
    ++counters.visited;
    const double coarse = score_node(engine, node);
    if (node.is_leaf()) return {{&node}, {coarse}};

    NodeCut fine;
    bool abandoned = false;
    for (const auto& child : node.children) {
        NodeCut sub = opt_min_rec(child, engine, counters, prune);
        const double sub_score = flat_min(sub.scores);
        if (prune && sub_score <= coarse) {
            abandoned = true;
            break;
        }
        fine.nodes.insert(fine.nodes.end(), sub.nodes.begin(), sub.nodes.end());
        fine.scores.insert(fine.scores.end(), sub.scores.begin(), sub.scores.end());
    }
    if (!abandoned && flat_min(fine.scores) > coarse) return fine;
    return {{&node}, {coarse}};
}

NodeCut greedy_avg_rec(const TreeNode& node, ScoringEngine& engine, SearchCounters& counters) {
    ++counters.visited;
    const double coarse = score_node(engine, node);
    if (node.is_leaf()) return {{&node}, {coarse}};

    NodeCut fine;
    for (const auto& child : node.children) {
        NodeCut sub = greedy_avg_rec(child, engine, counters);
        fine.nodes.insert(fine.nodes.end(), sub.nodes.begin(), sub.nodes.end());
        fine.scores.insert(fine.scores.end(), sub.scores.begin(), sub.scores.end());
    }
    const double fine_avg = flat_sum(fine.scores) / static_cast<double>(fine.scores.size());
    if (fine_avg > coarse) return fine;
    return {{&node}, {coarse}};
}

SearchResult finish(NodeCut cut, Aggregator agg, const SearchCounters& counters,
                    std::size_t scored) {
    SearchResult result;
    result.aggregator = agg;
    result.nodes_visited = counters.visited;
    result.nodes_scored = scored;
    result.score = aggregate(cut.scores, agg);
    result.segmentation.segments.reserve(cut.nodes.size());
    for (const TreeNode* n : cut.nodes) result.segmentation.segments.push_back(n->points);
    canonicalize(result.segmentation);
    return result;
}

}  // namespace

SearchResult opt_min_seg(const TreeNode& node, ScoringEngine& engine) {
    SearchCounters counters;
    const std::size_t before = engine.fresh_evals();
    NodeCut cut = opt_min_rec(node, engine, counters, /*prune=*/true);
    return finish(std::move(cut), Aggregator::min, counters, engine.fresh_evals() - before);
}

SearchResult opt_min_seg_reference(const TreeNode& node, ScoringEngine& engine) {
    SearchCounters counters;
    const std::size_t before = engine.fresh_evals();
    NodeCut cut = opt_min_rec(node, engine, counters, /*prune=*/false);
    return finish(std::move(cut), Aggregator::min, counters, engine.fresh_evals() - before);
}

SearchResult greedy_avg_seg(const TreeNode& node, ScoringEngine& engine) {
    SearchCounters counters;
    const std::size_t before = engine.fresh_evals();
    NodeCut cut = greedy_avg_rec(node, engine, counters);
    return finish(std::move(cut), Aggregator::avg, counters, engine.fresh_evals() - before);
}

SearchResult brute_force_opt(const TreeNode& node, ScoringEngine& engine, Aggregator aggregator,
                             std::uint64_t cap) {
    const CutEnumerator cuts(node, cap);
    const std::size_t before = engine.fresh_evals();

    std::uint64_t best_index = 0;
    double best_score = 0.0;
    bool have_best = false;
    for (std::uint64_t i = 0; i < cuts.size(); ++i) {
        const Segmentation seg = cuts.cut(i);
        std::vector<double> scores;
        scores.reserve(seg.segments.size());
        for (const auto& s : seg.segments) scores.push_back(engine.score(s));
        const double value = aggregate(scores, aggregator);
        if (!have_best || value > best_score) {
            have_best = true;
            best_score = value;
            best_index = i;
        }
    }

    SearchResult result;
    result.aggregator = aggregator;
    result.score = best_score;
    result.segmentation = cuts.cut(best_index);
    canonicalize(result.segmentation);
    result.nodes_visited = node_count(node);
    result.nodes_scored = engine.fresh_evals() - before;
    return result;
}

SearchResult segment_forest(const Forest& forest, const PointCloud& cloud,
                            const ObjectnessScorer& scorer, Aggregator aggregator) {
    SearchResult global;
    global.aggregator = aggregator;
    if (forest.trees.empty()) {
        global.score = 1.0;
        return global;
    }

    std::vector<SearchResult> per_tree(forest.trees.size());
    std::exception_ptr failure;
    const bool parallel_ok = scorer.thread_safe();
#pragma omp parallel for schedule(dynamic, 1) if (parallel_ok)
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(forest.trees.size()); ++t) {
        try {
            ScoringEngine engine(scorer, cloud);
            per_tree[t] = aggregator == Aggregator::min
                              ? opt_min_seg(forest.trees[t], engine)
                              : greedy_avg_seg(forest.trees[t], engine);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    // Roots are disjoint and ordered by smallest member, so concatenating the
    // per-tree segments keeps the canonical order. The global score is the
    // flat re-aggregation over every returned segment.
    std::vector<double> all_scores;
    for (std::size_t t = 0; t < per_tree.size(); ++t) {
        ScoringEngine engine(scorer, cloud);
        for (auto& seg : per_tree[t].segmentation.segments) {
            all_scores.push_back(engine.score(seg));
            global.segmentation.segments.push_back(std::move(seg));
        }
        global.nodes_visited += per_tree[t].nodes_visited;
        global.nodes_scored += per_tree[t].nodes_scored;
    }
    global.score = aggregate(all_scores, aggregator);
    return global;
}

}  // namespace treecut
