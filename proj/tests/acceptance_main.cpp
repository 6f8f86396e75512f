// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. argv[1] must be the path to the CLI binary (used by the process
// determinism checks).

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <fmt/core.h>

#include "oracle.hpp"
#include "treecut/eval.hpp"
#include "treecut/geometry.hpp"
#include "treecut/hierarchy.hpp"
#include "treecut/io.hpp"
#include "treecut/objectness.hpp"
#include "treecut/search.hpp"
#include "treecut/synthetic.hpp"

namespace fs = std::filesystem;
using namespace treecut;
using treecut::testing::Rng;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    fmt::print("[{}] {:2d} {}\n", ok ? "PASS" : "FAIL", criterion, detail);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct RandomTreeCase {
    TreeNode root;
    PointCloud cloud;
    ScoreCache cache;
};

std::vector<RandomTreeCase> make_tree_suite(std::size_t count) {
    Rng tree_rng(12345);
    Rng score_rng(67890);
    std::vector<RandomTreeCase> suite(count);
    for (auto& item : suite) {
        item.root = treecut::testing::random_tree(tree_rng, 12, 4);
        item.cloud = treecut::testing::cloud_for_tree(item.root);
        item.cache = treecut::testing::uniform_scores(item.root, score_rng, item.cloud.frame_id);
    }
    return suite;
}

// 1. Exact worst-case optimality against the exhaustive oracle.
// 2. Pruning neutrality against the non-pruned reference.
// 3. Counting identities and enumeration lengths.
void criteria_1_2_3(const std::vector<RandomTreeCase>& suite) {
    const auto start = std::chrono::steady_clock::now();
    std::size_t optimal = 0, prune_equal = 0, prune_visits_ok = 0, enumerated = 0,
                enum_ok = 0;
    for (const auto& item : suite) {
        const FileCacheScorer scorer(item.cache);
        ScoringEngine e1(scorer, item.cloud);
        const SearchResult pruned = opt_min_seg(item.root, e1);
        ScoringEngine e2(scorer, item.cloud);
        const SearchResult reference = opt_min_seg_reference(item.root, e2);
        ScoringEngine e3(scorer, item.cloud);
        const SearchResult oracle = brute_force_opt(item.root, e3, Aggregator::min);

        if (pruned.score == oracle.score) ++optimal;
        if (pruned.score == reference.score) ++prune_equal;
        if (pruned.nodes_visited <= reference.nodes_visited) ++prune_visits_ok;

        const BigCount count = count_tree_consistent(item.root);
        if (count <= 10000) {
            ++enumerated;
            const CutEnumerator cuts(item.root);
            if (BigCount(cuts.size()) == count) ++enum_ok;
        }
    }
    const double elapsed = seconds_since(start);

    report(1, optimal == suite.size() && elapsed < 5.0,
           fmt::format("worst-case DP equals the exhaustive oracle bitwise on {}/{} random "
                       "trees ({:.2f} s)",
                       optimal, suite.size(), elapsed));
    report(2, prune_equal == suite.size() && prune_visits_ok == suite.size(),
           fmt::format("pruned and non-pruned searches agree on {}/{} trees and pruning never "
                       "visits more nodes",
                       prune_equal, suite.size()));

    std::function<TreeNode(std::uint32_t, std::uint32_t)> balanced = [&](std::uint32_t lo,
                                                                         std::uint32_t hi) {
        TreeNode node;
        std::vector<std::uint32_t> idx;
        for (std::uint32_t i = lo; i < hi; ++i) idx.push_back(i);
        node.points = PointIndexSet(std::move(idx));
        if (hi - lo > 1) {
            const std::uint32_t mid = lo + (hi - lo) / 2;
            node.children.push_back(balanced(lo, mid));
            node.children.push_back(balanced(mid, hi));
        }
        return node;
    };
    const bool depths_ok = count_tree_consistent(balanced(0, 2)) == 2 &&
                           count_tree_consistent(balanced(0, 4)) == 5 &&
                           count_tree_consistent(balanced(0, 8)) == 26 &&
                           count_tree_consistent(balanced(0, 16)) == 677;
    report(3, depths_ok && enumerated > 0 && enum_ok == enumerated,
           fmt::format("balanced-binary counts are 2, 5, 26, 677 and enumeration length matched "
                       "the count on {}/{} enumerable trees",
                       enum_ok, enumerated));
}

// 4. The greedy average-case search is measurably suboptimal on the
//    counterexample tree.
void criterion_4() {
    TreeNode a;
    a.points = PointIndexSet({0, 1, 2});
    for (std::uint32_t i = 0; i < 3; ++i) {
        TreeNode leaf;
        leaf.points = PointIndexSet({i});
        a.children.push_back(std::move(leaf));
    }
    TreeNode b;
    b.points = PointIndexSet({3});
    TreeNode root;
    root.points = PointIndexSet({0, 1, 2, 3});
    root.children.push_back(std::move(a));
    root.children.push_back(std::move(b));
    treecut::testing::assign_ids(root, "t0");
    PointCloud cloud = treecut::testing::cloud_for_tree(root);

    ScoreCache cache;
    auto put = [&](std::vector<std::uint32_t> idx, double score) {
        cache.entries[segment_key(PointIndexSet(std::move(idx)), cloud.frame_id)] = score;
    };
    put({0, 1, 2, 3}, 0.1);
    put({0, 1, 2}, 0.45);
    put({0}, 0.5);
    put({1}, 0.5);
    put({2}, 0.5);
    put({3}, 1.0);
    const FileCacheScorer scorer(cache);

    ScoringEngine e1(scorer, cloud);
    const SearchResult greedy = greedy_avg_seg(root, e1);
    ScoringEngine e2(scorer, cloud);
    const SearchResult oracle = brute_force_opt(root, e2, Aggregator::avg);
    report(4, greedy.score == 0.625 && oracle.score == 0.725,
           fmt::format("greedy average-case scores {} while the oracle reaches {} on the witness "
                       "tree",
                       greedy.score, oracle.score));
}

// 5. Grid clustering equals the all-pairs components on random clouds.
void criterion_5() {
    Rng rng(24680);
    std::size_t clouds_ok = 0;
    const std::size_t total = 100;
    for (std::size_t trial = 0; trial < total; ++trial) {
        const auto cloud =
            treecut::testing::random_cloud(rng, 20 + rng.below(281), rng.uniform(1.0, 6.0));
        const auto subset = full_index_set(cloud.size());
        bool all_eps_ok = true;
        for (double eps : {0.25, 0.5, 1.0, 2.0}) {
            const auto got = connected_components(cloud, subset, eps);
            const auto want = treecut::testing::brute_force_components(cloud, subset, eps);
            if (got.size() != want.size()) {
                all_eps_ok = false;
                break;
            }
            for (std::size_t c = 0; c < got.size(); ++c) {
                if (!(got[c] == want[c])) {
                    all_eps_ok = false;
                    break;
                }
            }
        }
        if (all_eps_ok) ++clouds_ok;
    }
    report(5, clouds_ok == total,
           fmt::format("grid clustering matches the all-pairs reference exactly on {}/{} random "
                       "clouds at four thresholds",
                       clouds_ok, total));
}

// 6. Metric identities: weighted vs vanilla IoU and the canonical merge and
//    split error patterns.
void criterion_6() {
    PointCloud unit;
    unit.frame_id = "unit";
    unit.points.assign(100, Point{1.0, 0.0, 0.0});

    Rng rng(1357);
    bool weighted_matches = true;
    GroundTruth gt;
    for (int i = 0; i < 100; ++i)
        gt.instance_id.push_back(static_cast<std::int32_t>(rng.below(5)));
    for (int i = 0; i < 5; ++i) gt.class_of_instance[i] = "object";
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::uint32_t> raw;
        for (std::uint32_t i = 0; i < 100; ++i)
            if (rng.uniform() < 0.25) raw.push_back(i);
        if (raw.empty()) raw.push_back(0);
        const PointIndexSet seg(std::move(raw));
        if (weighted_iou(seg, unit, gt) != vanilla_iou(seg, gt)) weighted_matches = false;
    }

    GroundTruth merge_gt;
    for (int i = 0; i < 99; ++i) merge_gt.instance_id.push_back(0);
    merge_gt.instance_id.push_back(1);
    merge_gt.class_of_instance = {{0, "a"}, {1, "b"}};
    std::vector<std::uint32_t> all100;
    for (std::uint32_t i = 0; i < 100; ++i) all100.push_back(i);
    const bool merge_value = vanilla_iou(PointIndexSet(all100), merge_gt) == 0.99;

    GroundTruth two;
    for (int i = 0; i < 50; ++i) two.instance_id.push_back(0);
    for (int i = 0; i < 50; ++i) two.instance_id.push_back(1);
    two.class_of_instance = {{0, "a"}, {1, "b"}};
    Segmentation merged;
    merged.segments.push_back(PointIndexSet(all100));
    const EvalReport merge_report = under_over(merged, two, EvalConfig{});

    GroundTruth one;
    for (int i = 0; i < 100; ++i) one.instance_id.push_back(0);
    one.class_of_instance = {{0, "a"}};
    Segmentation split;
    std::vector<std::uint32_t> lo, hi;
    for (std::uint32_t i = 0; i < 50; ++i) lo.push_back(i);
    for (std::uint32_t i = 50; i < 100; ++i) hi.push_back(i);
    split.segments.push_back(PointIndexSet(lo));
    split.segments.push_back(PointIndexSet(hi));
    const EvalReport split_report = under_over(split, one, EvalConfig{});

    const bool merge_ok =
        merge_report.overall.under_pct == 100.0 && merge_report.overall.over_pct == 0.0;
    const bool split_ok =
        split_report.overall.under_pct == 0.0 && split_report.overall.over_pct == 100.0;
    report(6, weighted_matches && merge_value && merge_ok && split_ok,
           fmt::format("weighted IoU equals vanilla at unit range, the 99+1 merge scores 0.99, "
                       "and merge/split give (U,O) = ({:.0f},{:.0f}) and ({:.0f},{:.0f})",
                       merge_report.overall.under_pct, merge_report.overall.over_pct,
                       split_report.overall.under_pct, split_report.overall.over_pct));
}

SceneSpec scene_for_seed(std::uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.num_objects = 4 + seed % 4;
    spec.gap_min = 0.3;
    spec.gap_max = 1.5;
    spec.disc_radius = 18.0;
    spec.points_min = 60;
    spec.points_max = 200;
    return spec;
}

// 7. End-to-end recovery on tree-consistent scenes for both modes.
void criterion_7() {
    const std::vector<double> schedule{2.0, 1.0, 0.5, 0.25};
    std::size_t scenes_ok = 0;
    const std::size_t total = 50;
    std::vector<Segmentation> preds;
    std::vector<GroundTruth> gts;
    for (std::uint64_t seed = 1; seed <= total; ++seed) {
        const auto [cloud, gt] = gen_synthetic(scene_for_seed(seed));
        const Forest forest = build_forest(cloud, schedule);
        const GtWeightedScorer scorer(gt);

        bool scene_ok = true;
        for (auto mode : {Aggregator::min, Aggregator::avg}) {
            const SearchResult result = segment_forest(forest, cloud, scorer, mode);
            const EvalReport report = under_over(result.segmentation, gt, EvalConfig{});
            if (report.overall.under_pct != 0.0 || report.overall.over_pct != 0.0 ||
                report.worst_iou != 1.0)
                scene_ok = false;
            if (mode == Aggregator::min) {
                preds.push_back(result.segmentation);
                gts.push_back(gt);
            }
        }
        if (scene_ok) ++scenes_ok;
    }
    const double mean_worst = worst_iou_mean(preds, gts);
    report(7, scenes_ok == total && mean_worst == 1.0,
           fmt::format("min and avg searches with the weighted scorer recover {}/{} synthetic "
                       "scenes exactly (mean worst IoU {})",
                       scenes_ok, total, mean_worst));
}

// 8. The searched cut never loses to the best fixed-threshold cut.
void criterion_8() {
    const std::vector<double> schedule{2.0, 1.0, 0.5, 0.25};
    std::size_t scenes_ok = 0;
    const std::size_t total = 20;
    for (std::uint64_t seed = 101; seed < 101 + total; ++seed) {
        const auto [cloud, gt] = gen_synthetic(scene_for_seed(seed));
        const Forest forest = build_forest(cloud, schedule);
        const GtWeightedScorer scorer(gt);

        double best_level = 200.0;
        for (double eps : schedule) {
            const EvalReport report = under_over(level_cut(forest, eps), gt, EvalConfig{});
            best_level = std::min(best_level, report.overall.total_pct);
        }
        bool scene_ok = true;
        for (auto mode : {Aggregator::min, Aggregator::avg}) {
            const SearchResult result = segment_forest(forest, cloud, scorer, mode);
            const EvalReport report = under_over(result.segmentation, gt, EvalConfig{});
            if (report.overall.total_pct > best_level) scene_ok = false;
        }
        if (scene_ok) ++scenes_ok;
    }
    report(8, scenes_ok == total,
           fmt::format("searched segmentations beat or tie the best single level cut on {}/{} "
                       "scenes with 0.3-1.5 m gaps",
                       scenes_ok, total));
}

// 9. Single-threaded wall clock on a 20k-point scene plus the linear-work
//    bound on visited nodes.
void criterion_9() {
#ifdef _OPENMP
    const int saved_threads = omp_get_max_threads();
    omp_set_num_threads(1);
#endif
    SceneSpec spec;
    spec.seed = 777;
    spec.num_objects = 24;
    spec.points_min = 500;
    spec.points_max = 900;
    spec.extent_min = 0.8;
    spec.extent_max = 2.2;
    spec.gap_min = 0.4;
    spec.gap_max = 1.6;
    spec.disc_radius = 32.0;
    const auto [cloud, gt] = gen_synthetic(spec);

    const auto start = std::chrono::steady_clock::now();
    const Forest forest = build_forest(cloud, {2.0, 1.0, 0.5, 0.25});
    const HeuristicScorer scorer;
    const SearchResult result = segment_forest(forest, cloud, scorer, Aggregator::min);
    const double elapsed = seconds_since(start);
#ifdef _OPENMP
    omp_set_num_threads(saved_threads);
#endif
    const bool linear = result.nodes_visited <= node_count(forest);
    report(9, cloud.size() >= 20000 && elapsed < 2.0 && linear,
           fmt::format("{} points built and searched single-threaded in {:.2f} s, visiting {} of "
                       "{} nodes",
                       cloud.size(), elapsed, result.nodes_visited, node_count(forest)));
}

// 10. Byte-identical outputs across runs and thread settings, through the
//     real binary.
void criterion_10(const std::string& binary) {
    const fs::path dir =
        fs::temp_directory_path() / fmt::format("treecut-accept-{}", ::getpid());
    fs::create_directories(dir);
    const auto file = [&](const std::string& name) { return (dir / name).string(); };

    SceneSpec spec = scene_for_seed(9);
    const auto [cloud, gt] = gen_synthetic(spec);
    save_points(cloud, file("pts.bin"));
    save_ground_truth(gt, file("gt.json"));

    auto run_suffixed = [&](const std::string& threads, const std::string& tag) {
        auto sh = [&](const std::string& cmd) {
            const std::string full =
                fmt::format("TREECUT_THREADS={} '{}' {} >/dev/null 2>&1", threads, binary, cmd);
            return std::system(full.c_str()) == 0;
        };
        bool ok = true;
        ok &= sh(fmt::format("build-tree --points {} --epsilons 2.0,1.0,0.5,0.25 --out {}",
                             file("pts.bin"), file("forest-" + tag + ".json")));
        ok &= sh(fmt::format(
            "segment --points {} --forest {} --mode min --scorer gt-weighted --gt {} --out {} "
            "--out-scores {}",
            file("pts.bin"), file("forest-" + tag + ".json"), file("gt.json"),
            file("labels-" + tag + ".txt"), file("scores-" + tag + ".txt")));
        ok &= sh(fmt::format("baseline --points {} --epsilons default --level 0.5 --out {}",
                             file("pts.bin"), file("ec-" + tag + ".txt")));
        ok &= sh(fmt::format(
            "eval --pred {} --gt {} --tau-u 0.6667 --tau-o 1.0 --ap --scores {} --out {}",
            file("labels-" + tag + ".txt"), file("gt.json"), file("scores-" + tag + ".txt"),
            file("report-" + tag + ".csv")));
        return ok;
    };

    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    };

    bool commands_ok = run_suffixed("1", "a") && run_suffixed("1", "b") &&
                       run_suffixed("4", "c") && run_suffixed("4", "d");
    bool identical = true;
    for (const std::string stem : {"forest-", "labels-", "scores-", "ec-", "report-"}) {
        const std::string ext = stem == "forest-" ? ".json" : stem == "report-" ? ".csv" : ".txt";
        const std::string base = slurp(file(stem + "a" + ext));
        identical &= !base.empty();
        for (const std::string tag : {"b", "c", "d"})
            identical &= slurp(file(stem + tag + ext)) == base;
    }
    std::error_code ec;
    fs::remove_all(dir, ec);
    report(10, commands_ok && identical,
           "label files, scores, forests, and reports are byte-identical across reruns and "
           "TREECUT_THREADS settings");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        fmt::print(stderr, "usage: {} <path-to-treecut-binary>\n", argv[0]);
        return 2;
    }
    const auto suite = make_tree_suite(500);
    criteria_1_2_3(suite);
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10(argv[1]);
    fmt::print("{}\n", g_failures == 0 ? "all criteria passed" : "CRITERIA FAILED");
    return g_failures == 0 ? 0 : 1;
}
