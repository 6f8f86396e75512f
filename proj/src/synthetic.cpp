#include "treecut/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "treecut/errors.hpp"

namespace treecut {

namespace {

// Uniform doubles built directly from the raw 64-bit stream so the output is
// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t index(std::size_t n) {
        return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
    }

private:
    std::mt19937_64 eng_;
};

struct PlacedBox {
    double cx, cy, cz;
    double ex, ey, ez;  // full extents
};

double box_gap(const PlacedBox& a, const PlacedBox& b) {
    auto axis = [](double ca, double ea, double cb, double eb) {
        return std::max(0.0, std::abs(ca - cb) - 0.5 * (ea + eb));
    };
    const double gx = axis(a.cx, a.ex, b.cx, b.ex);
    const double gy = axis(a.cy, a.ey, b.cy, b.ey);
    const double gz = axis(a.cz, a.ez, b.cz, b.ez);
    return std::sqrt(gx * gx + gy * gy + gz * gz);
}

void validate_spec(const SceneSpec& spec) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw invalid_parameter_error("scene spec: " + what);
    };
    require(spec.extent_min > 0 && spec.extent_max >= spec.extent_min, "extents must be positive");
    require(spec.gap_min > 0 && spec.gap_max >= spec.gap_min, "gaps must be positive");
    require(spec.points_min >= 1 && spec.points_max >= spec.points_min,
            "points per object must be at least 1");
    require(spec.disc_radius > 0, "disc radius must be positive");
    require(spec.max_pitch > 0, "max pitch must be positive");
}

}  // namespace

std::pair<PointCloud, GroundTruth> gen_synthetic(const SceneSpec& spec) {
    validate_spec(spec);
    Rng rng(spec.seed);

    std::vector<PlacedBox> placed;
    for (std::size_t k = 0; k < spec.num_objects; ++k) {
        bool ok = false;
        for (std::size_t attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
            PlacedBox box;
            box.ex = rng.uniform(spec.extent_min, spec.extent_max);
            box.ey = rng.uniform(spec.extent_min, spec.extent_max);
            box.ez = rng.uniform(spec.extent_min, spec.extent_max);
            const double angle = rng.uniform(0.0, 2.0 * M_PI);
            const double radius = spec.disc_radius * std::sqrt(rng.uniform());
            box.cx = radius * std::cos(angle);
            box.cy = radius * std::sin(angle);
            box.cz = 0.5 * box.ez;  // resting on the ground plane
            if (!placed.empty()) {
                double nearest = std::numeric_limits<double>::infinity();
                for (const auto& other : placed) nearest = std::min(nearest, box_gap(box, other));
                if (nearest < spec.gap_min || nearest > spec.gap_max) continue;
            }
            placed.push_back(box);
            ok = true;
        }
        if (!ok)
            throw generation_error(
                fmt::format("could not place object {} of {} after {} attempts", k + 1,
                            spec.num_objects, spec.max_retries));
    }

    PointCloud cloud;
    cloud.frame_id = fmt::format("synthetic-{}", spec.seed);
    GroundTruth gt;
    for (std::size_t k = 0; k < placed.size(); ++k) {
        const PlacedBox& box = placed[k];
        std::size_t target =
            spec.points_min + rng.index(spec.points_max - spec.points_min + 1);
        if (spec.range_density) {
            const double range = std::sqrt(box.cx * box.cx + box.cy * box.cy + box.cz * box.cz);
            const double scale = std::clamp(std::pow(15.0 / std::max(range, 1.0), 2.0), 0.25, 4.0);
            target = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                  static_cast<double>(target) * scale));
        }
        const double volume = box.ex * box.ey * box.ez;
        const double pitch =
            std::min(spec.max_pitch, std::cbrt(volume / static_cast<double>(target)));
        const std::size_t nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(box.ex / pitch)));
        const std::size_t ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(box.ey / pitch)));
        const std::size_t nz = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(box.ez / pitch)));
        const double cellx = box.ex / static_cast<double>(nx);
        const double celly = box.ey / static_cast<double>(ny);
        const double cellz = box.ez / static_cast<double>(nz);
        const double lox = box.cx - 0.5 * box.ex;
        const double loy = box.cy - 0.5 * box.ey;
        const double loz = box.cz - 0.5 * box.ez;
        for (std::size_t ix = 0; ix < nx; ++ix) {
            for (std::size_t iy = 0; iy < ny; ++iy) {
                for (std::size_t iz = 0; iz < nz; ++iz) {
                    Point p;
                    p.x = lox + (static_cast<double>(ix) + 0.5 + rng.uniform(-0.25, 0.25)) * cellx;
                    p.y = loy + (static_cast<double>(iy) + 0.5 + rng.uniform(-0.25, 0.25)) * celly;
                    p.z = loz + (static_cast<double>(iz) + 0.5 + rng.uniform(-0.25, 0.25)) * cellz;
                    cloud.points.push_back(p);
                    gt.instance_id.push_back(static_cast<std::int32_t>(k));
                }
            }
        }
        gt.class_of_instance[static_cast<std::int32_t>(k)] = "object";
        Box out;
        out.label = "object";
        out.cx = box.cx;
        out.cy = box.cy;
        out.cz = box.cz;
        out.length = box.ex;
        out.width = box.ey;
        out.height = box.ez;
        out.yaw = 0.0;
        gt.boxes.push_back(std::move(out));
    }
    return {std::move(cloud), std::move(gt)};
}

}  // namespace treecut
