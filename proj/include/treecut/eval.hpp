#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treecut/geometry.hpp"

namespace treecut {

std::vector<double> default_ap_thresholds();  // 0.50 to 0.95, step 0.05

struct EvalConfig {
    double tau_u = 2.0 / 3.0;
    double tau_o = 1.0;
    std::optional<double> range_filter_m;  // e.g. 15
    enum class OverlapMode { skip_objects, ignore_region };
    OverlapMode overlap_mode = OverlapMode::skip_objects;
    std::vector<double> ap_iou_thresholds = default_ap_thresholds();
};

struct UOStats {
    std::size_t objects = 0;
    double under_pct = 0.0;
    double over_pct = 0.0;
    double total_pct = 0.0;  // under + over
};

struct EvalReport {
    UOStats overall;
    std::map<std::string, UOStats> per_class;
    std::optional<UOStats> overall_within;
    std::optional<std::map<std::string, UOStats>> per_class_within;
    std::size_t skipped_overlap = 0;
    std::size_t skipped_zero_point = 0;
    double worst_iou = 0.0;  // this frame: min over segments of best IoU
    std::optional<std::map<std::string, double>> ap_per_class;
    std::optional<double> mean_ap;
};

// Per retained ground-truth object: the prediction with the largest point
// intersection (ties to the lowest canonical segment index), its purity and
// recall, and the resulting under/over indicators. An object no prediction
// intersects counts as both under- and over-segmented.
struct ObjectMatch {
    std::int32_t instance = 0;
    std::string class_label;
    std::int32_t best_segment = -1;
    std::size_t intersection = 0;
    double purity = 0.0;
    double recall = 0.0;
    bool under = false;
    bool over = false;
    bool within_range = false;
};

struct MatchOutcome {
    std::vector<ObjectMatch> objects;
    std::size_t skipped_overlap = 0;
    std::size_t skipped_zero_point = 0;
};

// Matching core; segments are put in canonical order internally and pred is
// not required to cover the universe (under_over validates coverage first).
// The cloud is only consulted for the range filter when an instance has no
// box: its centroid stands in for the box center.
MatchOutcome match_objects(const Segmentation& pred, const GroundTruth& gt, const EvalConfig& cfg,
                           const PointCloud* cloud = nullptr);

// Under-/over-segmentation errors with per-class and range-filtered
// breakdowns. Throws invalid_input_error when pred is not a partition of the
// ground truth's point universe.
EvalReport under_over(const Segmentation& pred, const GroundTruth& gt, const EvalConfig& cfg,
                      const PointCloud* cloud = nullptr);

// Mean over frames of the worst best-IoU among predicted segments. Frames
// with no scorable segment or no instance are skipped and counted.
double worst_iou_mean(std::span<const Segmentation> preds, std::span<const GroundTruth> gts,
                      std::size_t* skipped_frames = nullptr);

struct ScoredSegmentation {
    Segmentation seg;
    std::vector<double> confidences;  // parallel to seg.segments
};

struct ApResult {
    std::map<std::string, double> ap_per_class;  // mean over IoU thresholds
    double mean_ap = 0.0;                        // mean over classes
};

// Class-agnostic instance retrieval: predictions ranked by confidence across
// frames, each greedily matched to the unmatched instance with the highest
// point IoU at or above the threshold. A matched prediction adopts its
// instance's class; unmatched predictions count as false positives for every
// class. AP is the area under the all-point interpolated PR curve.
ApResult instance_ap(std::span<const ScoredSegmentation> preds, std::span<const GroundTruth> gts,
                     const EvalConfig& cfg);

}  // namespace treecut
