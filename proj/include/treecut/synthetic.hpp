#pragma once

#include <cstdint>
#include <utility>

#include "treecut/geometry.hpp"

namespace treecut {

// Deterministic scene generator: box-shaped point blobs scattered over a
// ground disc. Each object is a jittered grid of points, so it stays
// connected at any clustering threshold above ~1.66x the grid pitch, and the
// nearest box-to-box gap of every object is confined to [gap_min, gap_max].
// The pitch ceiling wins over the point target for large objects, so those
// carry more points than the target range.
struct SceneSpec {
    std::uint64_t seed = 1;
    std::size_t num_objects = 5;
    double extent_min = 0.5;   // per-axis box extent range, meters
    double extent_max = 1.8;
    std::size_t points_min = 80;   // target points per object
    std::size_t points_max = 300;
    double gap_min = 0.5;  // nearest-neighbor box gap range, meters
    double gap_max = 2.0;
    double disc_radius = 30.0;
    bool range_density = false;  // scale point counts by (15m / range)^2
    double max_pitch = 0.15;     // grid pitch ceiling, meters
    std::size_t max_retries = 1000;
};

std::pair<PointCloud, GroundTruth> gen_synthetic(const SceneSpec& spec);

}  // namespace treecut
