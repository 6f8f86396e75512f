// Timing comparison between the grid clustering kernel and the all-pairs
// reference, and between single- and multi-threaded runs of the full
// pipeline. Thread counts honor TREECUT_THREADS.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <fmt/core.h>

#include "oracle.hpp"
#include "treecut/hierarchy.hpp"
#include "treecut/objectness.hpp"
#include "treecut/parallel.hpp"
#include "treecut/search.hpp"
#include "treecut/synthetic.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

treecut::SceneSpec scene_spec(std::size_t objects, std::size_t points_lo, std::size_t points_hi) {
    treecut::SceneSpec spec;
    spec.seed = 7;
    spec.num_objects = objects;
    spec.points_min = points_lo;
    spec.points_max = points_hi;
    spec.gap_min = 0.4;
    spec.gap_max = 1.6;
    spec.disc_radius = 45.0;
    return spec;
}

}  // namespace

int main() {
    treecut::apply_thread_env();
    const int threads = treecut::max_threads();
    fmt::print("max threads: {}\n\n", threads);

    {
        auto [cloud, gt] = treecut::gen_synthetic(scene_spec(12, 120, 200));
        const auto all = treecut::full_index_set(cloud.size());
        fmt::print("connected components, {} points, epsilon 0.5\n", cloud.size());
        auto t0 = Clock::now();
        const auto grid = treecut::connected_components(cloud, all, 0.5);
        const double grid_ms = ms_since(t0);
        t0 = Clock::now();
        const auto brute = treecut::testing::brute_force_components(cloud, all, 0.5);
        const double brute_ms = ms_since(t0);
        fmt::print("  grid hash + union-find: {:8.2f} ms ({} components)\n", grid_ms, grid.size());
        fmt::print("  all-pairs reference:    {:8.2f} ms ({} components)\n\n", brute_ms,
                   brute.size());
    }

    auto [cloud, gt] = treecut::gen_synthetic(scene_spec(60, 280, 420));
    fmt::print("full pipeline (build + min search, heuristic scorer), {} points\n", cloud.size());
    const std::vector<double> schedule{2.0, 1.0, 0.5, 0.25};
    const treecut::HeuristicScorer scorer;
    for (const int n : {1, threads}) {
        set_threads(n);
        auto t0 = Clock::now();
        const auto forest = treecut::build_forest(cloud, schedule);
        const double build_ms = ms_since(t0);
        t0 = Clock::now();
        const auto result =
            treecut::segment_forest(forest, cloud, scorer, treecut::Aggregator::min);
        const double search_ms = ms_since(t0);
        fmt::print("  {} thread(s): build {:8.2f} ms, search {:8.2f} ms, {} segments, score {:.4f}\n",
                   n, build_ms, search_ms, result.segmentation.segments.size(), result.score);
        if (n == threads) break;
    }
    return 0;
}
