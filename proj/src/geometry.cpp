#include "treecut/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "treecut/errors.hpp"

namespace treecut {

PointIndexSet PointIndexSet::from_unsorted(std::vector<std::uint32_t> raw) {
    std::sort(raw.begin(), raw.end());
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
    return PointIndexSet(std::move(raw));
}

bool strictly_increasing(const std::vector<std::uint32_t>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] <= v[i - 1]) return false;
    }
    return true;
}

std::size_t intersection_count(const PointIndexSet& a, const PointIndexSet& b) {
    std::size_t n = 0;
    auto ia = a.indices.begin(), ib = b.indices.begin();
    while (ia != a.indices.end() && ib != b.indices.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++n;
            ++ia;
            ++ib;
        }
    }
    return n;
}

PointIndexSet merge_disjoint(const std::vector<const PointIndexSet*>& parts) {
    std::size_t total = 0;
    for (const auto* p : parts) total += p->size();
    std::vector<std::uint32_t> out;
    out.reserve(total);
    for (const auto* p : parts) out.insert(out.end(), p->indices.begin(), p->indices.end());
    std::sort(out.begin(), out.end());
    return PointIndexSet(std::move(out));
}

PointIndexSet full_index_set(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint32_t>(i);
    return PointIndexSet(std::move(v));
}

void canonicalize(Segmentation& seg) {
    std::sort(seg.segments.begin(), seg.segments.end(),
              [](const PointIndexSet& a, const PointIndexSet& b) {
                  if (a.empty() || b.empty()) return b.empty() && !a.empty();
                  return a.front() < b.front();
              });
}

namespace {

std::optional<std::string> validate_against(const Segmentation& seg,
                                            const std::vector<std::uint32_t>& universe) {
    for (std::size_t k = 0; k < seg.segments.size(); ++k) {
        const auto& s = seg.segments[k].indices;
        if (s.empty()) return fmt::format("segment {} empty", k);
        if (!strictly_increasing(s))
            return fmt::format("segment {} not strictly increasing", k);
    }
    // Membership and duplication against the sorted universe.
    std::vector<std::uint8_t> seen(universe.size(), 0);
    for (std::size_t k = 0; k < seg.segments.size(); ++k) {
        for (std::uint32_t idx : seg.segments[k].indices) {
            auto it = std::lower_bound(universe.begin(), universe.end(), idx);
            if (it == universe.end() || *it != idx)
                return fmt::format("index {} outside universe in segment {}", idx, k);
            auto pos = static_cast<std::size_t>(it - universe.begin());
            if (seen[pos]) return fmt::format("index {} duplicated", idx);
            seen[pos] = 1;
        }
    }
    for (std::size_t pos = 0; pos < universe.size(); ++pos) {
        if (!seen[pos]) return fmt::format("index {} uncovered", universe[pos]);
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::string> validate_segmentation(const Segmentation& seg,
                                                 std::size_t universe_size) {
    return validate_against(seg, full_index_set(universe_size).indices);
}

std::optional<std::string> validate_segmentation(const Segmentation& seg,
                                                 const PointIndexSet& universe) {
    return validate_against(seg, universe.indices);
}

bool box_contains(const Box& box, const Point& p) {
    const double dx = p.x - box.cx;
    const double dy = p.y - box.cy;
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    // Inverse yaw takes the point into the box frame; boundaries are closed.
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    const double lz = p.z - box.cz;
    return std::abs(lx) <= box.length * 0.5 && std::abs(ly) <= box.width * 0.5 &&
           std::abs(lz) <= box.height * 0.5;
}

std::optional<std::string> validate_ground_truth(const GroundTruth& gt) {
    for (std::size_t i = 0; i < gt.instance_id.size(); ++i) {
        const auto id = gt.instance_id[i];
        if (id < -1) return fmt::format("point {} has invalid instance id {}", i, id);
        if (id >= 0 && !gt.class_of_instance.count(id))
            return fmt::format("instance {} (point {}) has no class label", id, i);
    }
    for (auto id : gt.overlapping_instances) {
        if (!gt.class_of_instance.count(id))
            return fmt::format("overlapping instance {} has no class label", id);
    }
    return std::nullopt;
}

double squared_range(const Point& p) {
    const double r2 = p.x * p.x + p.y * p.y + p.z * p.z;
    return r2 < kMinSquaredRange ? kMinSquaredRange : r2;
}

std::vector<double> squared_ranges(const PointCloud& cloud) {
    std::vector<double> out(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = squared_range(cloud.points[i]);
    return out;
}

std::uint64_t segment_key(const PointIndexSet& seg, std::string_view frame_id) {
    constexpr std::uint64_t kOffset = 14695981039346656037ull;
    constexpr std::uint64_t kPrime = 1099511628211ull;
    std::uint64_t h = kOffset;
    auto mix = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= kPrime;
    };
    for (char c : frame_id) mix(static_cast<std::uint8_t>(c));
    mix(0xffu);  // separates frame id from index stream
    for (std::uint32_t idx : seg.indices) {
        std::uint64_t v = idx;
        for (int b = 0; b < 8; ++b) mix(static_cast<std::uint8_t>((v >> (8 * b)) & 0xffu));
    }
    return h;
}

std::string segment_key_hex(std::uint64_t key) { return fmt::format("{:016x}", key); }

}  // namespace treecut
