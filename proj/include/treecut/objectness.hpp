#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "treecut/geometry.hpp"
#include "treecut/hierarchy.hpp"

namespace treecut {

// Best point IoU between the segment and any ground-truth instance. Points
// with instance -1 are dropped from numerator and denominator alike.
double vanilla_iou(const PointIndexSet& seg, const GroundTruth& gt);

// Same, but every point contributes its squared range instead of 1, which
// stops dense near-sensor points from dominating the score.
double weighted_iou(const PointIndexSet& seg, const PointCloud& cloud, const GroundTruth& gt);

// Training-free scorer. The score is the weighted geometric mean of
// plausibility terms, each in (0,1]:
//   volume: exp(-(ln(v / volume_center))^2 / (2 volume_log_sigma^2)) with
//           v = product of bounding-box extents, extents floored at
//           extent_floor;
//   count:  n / (n + count_half);
//   height: same log-bump as volume over the vertical extent;
//   range:  exp(-centroid_range / range_scale), included only when
//           range_scale > 0.
// The result is monotone in every term and invariant to xy translation while
// the range term is disabled.
struct HeuristicParams {
    double volume_center = 6.0;
    double volume_log_sigma = 1.8;
    double count_half = 60.0;
    double height_center = 1.2;
    double height_log_sigma = 0.9;
    double extent_floor = 0.01;
    double range_scale = 0.0;  // 0 disables the range prior
    double volume_weight = 1.0;
    double count_weight = 1.0;
    double height_weight = 1.0;
    double range_weight = 1.0;
};

double heuristic_score(const PointIndexSet& seg, const PointCloud& cloud,
                       const HeuristicParams& params = {});

// Pure, deterministic segment scoring into [0,1]. A score may depend on the
// positions of points outside the segment but never on how those points are
// partitioned.
class ObjectnessScorer {
public:
    virtual ~ObjectnessScorer() = default;
    virtual double score(const PointIndexSet& seg, const PointCloud& cloud) const = 0;
    virtual bool thread_safe() const { return true; }
    virtual std::string name() const = 0;
};

class GtVanillaScorer final : public ObjectnessScorer {
public:
    explicit GtVanillaScorer(GroundTruth gt) : gt_(std::move(gt)) {}
    double score(const PointIndexSet& seg, const PointCloud& cloud) const override;
    std::string name() const override { return "gt-vanilla"; }

private:
    GroundTruth gt_;
};

class GtWeightedScorer final : public ObjectnessScorer {
public:
    GtWeightedScorer(GroundTruth gt) : gt_(std::move(gt)) {}
    double score(const PointIndexSet& seg, const PointCloud& cloud) const override;
    std::string name() const override { return "gt-weighted"; }

private:
    GroundTruth gt_;
};

class HeuristicScorer final : public ObjectnessScorer {
public:
    explicit HeuristicScorer(HeuristicParams params = {}) : params_(params) {}
    double score(const PointIndexSet& seg, const PointCloud& cloud) const override;
    std::string name() const override { return "heuristic"; }
    const HeuristicParams& params() const { return params_; }

private:
    HeuristicParams params_;
};

// Exact-key score store bridging externally computed objectness into the
// search. Keys are segment_key() values.
struct ScoreCache {
    std::map<std::uint64_t, double> entries;
};

// Throws missing_score_error when the key is absent.
double cache_lookup(const ScoreCache& cache, const PointIndexSet& seg, std::string_view frame_id);

// File format: one `node_key,score` pair per line, node_key in lowercase hex,
// score decimal in [0,1]. Lines starting with '#' are skipped.
ScoreCache load_score_cache(const std::filesystem::path& path);
void save_score_cache(const ScoreCache& cache, const std::filesystem::path& path);

enum class CacheMissPolicy { hard_error, fallback };

class FileCacheScorer final : public ObjectnessScorer {
public:
    FileCacheScorer(ScoreCache cache, CacheMissPolicy policy = CacheMissPolicy::hard_error,
                    std::shared_ptr<const ObjectnessScorer> fallback = nullptr);
    double score(const PointIndexSet& seg, const PointCloud& cloud) const override;
    std::string name() const override { return "file-cache"; }

private:
    ScoreCache cache_;
    CacheMissPolicy policy_;
    std::shared_ptr<const ObjectnessScorer> fallback_;
};

// Memoizing front end used by the searches: one scorer call per distinct
// segment key, validated into [0,1].
class ScoringEngine {
public:
    ScoringEngine(const ObjectnessScorer& scorer, const PointCloud& cloud)
        : scorer_(&scorer), cloud_(&cloud) {}

    double score(const PointIndexSet& seg);
    double score(const TreeNode& node) { return score(node.points); }

    std::size_t fresh_evals() const noexcept { return fresh_evals_; }
    const ObjectnessScorer& scorer() const noexcept { return *scorer_; }
    const PointCloud& cloud() const noexcept { return *cloud_; }

private:
    const ObjectnessScorer* scorer_;
    const PointCloud* cloud_;
    std::unordered_map<std::uint64_t, double> memo_;
    std::size_t fresh_evals_ = 0;
};

enum class IouTarget { vanilla, weighted };

struct TrainingPair {
    std::string node_id;
    double target = 0.0;
    PointIndexSet segment;
};

// One record per tree node, in preorder; targets computed in parallel.
std::vector<TrainingPair> make_training_pairs(const Forest& forest, const PointCloud& cloud,
                                              const GroundTruth& gt, IouTarget target);

// Line format: `node_id;target;x y z [i], x y z [i], ...` with the intensity
// column present only when the cloud carries intensities.
void write_training_pairs(const std::vector<TrainingPair>& pairs, const PointCloud& cloud,
                          std::ostream& out);

}  // namespace treecut
