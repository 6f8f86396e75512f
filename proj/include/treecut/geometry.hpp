#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace treecut {

// Sensor-frame coordinates in meters; the sensor sits at the origin.
struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    float intensity = 0.0f;
};

struct PointCloud {
    std::vector<Point> points;
    std::string frame_id;
    bool has_intensity = false;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
};

// A segment: strictly increasing, duplicate-free indices into one PointCloud.
struct PointIndexSet {
    std::vector<std::uint32_t> indices;

    PointIndexSet() = default;
    explicit PointIndexSet(std::vector<std::uint32_t> sorted) : indices(std::move(sorted)) {}

    static PointIndexSet from_unsorted(std::vector<std::uint32_t> raw);

    std::size_t size() const noexcept { return indices.size(); }
    bool empty() const noexcept { return indices.empty(); }
    std::uint32_t front() const { return indices.front(); }

    bool operator==(const PointIndexSet&) const = default;
};

bool strictly_increasing(const std::vector<std::uint32_t>& v);

std::size_t intersection_count(const PointIndexSet& a, const PointIndexSet& b);

// Merge of pairwise-disjoint sorted sets into one sorted set.
PointIndexSet merge_disjoint(const std::vector<const PointIndexSet*>& parts);

PointIndexSet full_index_set(std::size_t n);

// A candidate partition of an index universe into segments.
struct Segmentation {
    std::vector<PointIndexSet> segments;
};

// Reorders segments by their smallest member index (the canonical order used
// for label files, matching tie-breaks, and deterministic reports).
void canonicalize(Segmentation& seg);

// nullopt when the segments are pairwise disjoint, nonempty, and cover the
// universe exactly; otherwise names the first violated constraint and an
// offending index.
std::optional<std::string> validate_segmentation(const Segmentation& seg, std::size_t universe_size);
std::optional<std::string> validate_segmentation(const Segmentation& seg, const PointIndexSet& universe);

// Upright 3D box; length/width/height are the local x/y/z extents and yaw
// rotates the local frame about +z. The center is the geometric centroid.
struct Box {
    std::string label;
    double cx = 0.0, cy = 0.0, cz = 0.0;
    double length = 0.0, width = 0.0, height = 0.0;
    double yaw = 0.0;
};

bool box_contains(const Box& box, const Point& p);

// Per-point instance labels. Instance -1 marks points excluded from every
// metric numerator and denominator.
struct GroundTruth {
    std::vector<std::int32_t> instance_id;
    std::map<std::int32_t, std::string> class_of_instance;
    std::vector<Box> boxes;                      // empty when unknown
    std::vector<std::int32_t> overlapping_instances;  // sorted; boxes sharing points

    std::size_t size() const noexcept { return instance_id.size(); }
};

std::optional<std::string> validate_ground_truth(const GroundTruth& gt);

inline constexpr double kMinSquaredRange = 1e-6;  // m^2, keeps range weights positive

// Squared distance to the sensor origin, floored at kMinSquaredRange.
double squared_range(const Point& p);

std::vector<double> squared_ranges(const PointCloud& cloud);

// Canonical 64-bit identity of a segment within a cloud: FNV-1a over the
// frame id bytes followed by each index as 8 little-endian bytes. Stable
// across runs and platforms; used by score caches and memo tables.
std::uint64_t segment_key(const PointIndexSet& seg, std::string_view frame_id);

std::string segment_key_hex(std::uint64_t key);

}  // namespace treecut
