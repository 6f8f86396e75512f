#include <doctest.h>

#include <set>

#include "oracle.hpp"
#include "treecut/errors.hpp"
#include "treecut/eval.hpp"
#include "treecut/hierarchy.hpp"
#include "treecut/synthetic.hpp"

using namespace treecut;

namespace {

PointIndexSet instance_points(const GroundTruth& gt, std::int32_t id) {
    std::vector<std::uint32_t> v;
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (gt.instance_id[i] == id) v.push_back(static_cast<std::uint32_t>(i));
    return PointIndexSet(std::move(v));
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("generation is a pure function of the scene parameters") {
    SceneSpec spec;
    spec.seed = 99;
    spec.num_objects = 4;
    const auto [cloud_a, gt_a] = gen_synthetic(spec);
    const auto [cloud_b, gt_b] = gen_synthetic(spec);
    REQUIRE(cloud_a.size() == cloud_b.size());
    for (std::size_t i = 0; i < cloud_a.size(); ++i) {
        CHECK(cloud_a.points[i].x == cloud_b.points[i].x);
        CHECK(cloud_a.points[i].y == cloud_b.points[i].y);
        CHECK(cloud_a.points[i].z == cloud_b.points[i].z);
    }
    CHECK(gt_a.instance_id == gt_b.instance_id);

    SceneSpec other = spec;
    other.seed = 100;
    const auto [cloud_c, gt_c] = gen_synthetic(other);
    CHECK(cloud_c.points[0].x != cloud_a.points[0].x);
}

TEST_CASE("the instance count equals the requested object count") {
    SceneSpec spec;
    spec.seed = 3;
    spec.num_objects = 3;
    const auto [cloud, gt] = gen_synthetic(spec);
    CHECK(gt.class_of_instance.size() == 3);
    std::set<std::int32_t> seen(gt.instance_id.begin(), gt.instance_id.end());
    CHECK(seen == std::set<std::int32_t>{0, 1, 2});
    CHECK(gt.boxes.size() == 3);
    CHECK_FALSE(validate_ground_truth(gt).has_value());
}

TEST_CASE("gaps beyond the coarsest epsilon make the coarsest cut exact") {
    SceneSpec spec;
    spec.seed = 21;
    spec.num_objects = 4;
    spec.gap_min = 2.05;
    spec.gap_max = 4.0;
    const auto [cloud, gt] = gen_synthetic(spec);
    const Forest forest = build_forest(cloud, {2.0, 1.0, 0.5, 0.25});
    auto cut = level_cut(forest, 2.0);
    canonicalize(cut);
    REQUIRE(cut.segments.size() == 4);
    for (const auto& seg : cut.segments) {
        const auto id = gt.instance_id[seg.front()];
        CHECK(seg == instance_points(gt, id));
    }
    const EvalReport report = under_over(cut, gt, EvalConfig{});
    CHECK(report.overall.total_pct == 0.0);
}

TEST_CASE("objects stay connected at the finest default epsilon") {
    SceneSpec spec;
    spec.seed = 5;
    spec.num_objects = 6;
    spec.gap_min = 0.3;
    spec.gap_max = 1.5;
    const auto [cloud, gt] = gen_synthetic(spec);
    for (std::int32_t id = 0; id < 6; ++id) {
        const auto points = instance_points(gt, id);
        CHECK(connected_components(cloud, points, 0.25).size() == 1);
    }

    // With gaps above the finest epsilon, every instance is a node of the
    // hierarchy, so the exact segmentation is reachable by some cut.
    const Forest forest = build_forest(cloud, {2.0, 1.0, 0.5, 0.25});
    Segmentation exact;
    for (std::int32_t id = 0; id < 6; ++id) exact.segments.push_back(instance_points(gt, id));
    std::vector<const TreeNode*> roots;
    for (const auto& t : forest.trees) roots.push_back(&t);
    CHECK(treecut::testing::segments_are_nodes(exact, roots));
}

TEST_CASE("range-dependent density scales the first object's point count") {
    // The first object is placed identically with the flag on and off, so its
    // count must move with the range scale.
    SceneSpec off;
    off.seed = 8;
    off.num_objects = 1;
    off.disc_radius = 40.0;
    SceneSpec on = off;
    on.range_density = true;

    const auto [cloud_off, gt_off] = gen_synthetic(off);
    const auto [cloud_on, gt_on] = gen_synthetic(on);
    REQUIRE(gt_off.boxes.size() == 1);
    const Box& b = gt_off.boxes[0];
    const double range = std::sqrt(b.cx * b.cx + b.cy * b.cy + b.cz * b.cz);
    if (range < 15.0)
        CHECK(cloud_on.size() >= cloud_off.size());
    else
        CHECK(cloud_on.size() <= cloud_off.size());
}

TEST_CASE("impossible packings fail loudly") {
    SceneSpec spec;
    spec.seed = 1;
    spec.num_objects = 12;
    spec.disc_radius = 1.0;
    spec.gap_min = 2.0;
    spec.gap_max = 2.5;
    spec.max_retries = 50;
    CHECK_THROWS_AS(gen_synthetic(spec), generation_error);
}

TEST_CASE("invalid specs are rejected") {
    SceneSpec spec;
    spec.gap_min = -1.0;
    CHECK_THROWS_AS(gen_synthetic(spec), invalid_parameter_error);
    spec = SceneSpec{};
    spec.extent_min = 0.0;
    CHECK_THROWS_AS(gen_synthetic(spec), invalid_parameter_error);
    spec = SceneSpec{};
    spec.points_max = spec.points_min - 1;
    CHECK_THROWS_AS(gen_synthetic(spec), invalid_parameter_error);
}

}  // TEST_SUITE
