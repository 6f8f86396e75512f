#include "treecut/eval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "treecut/errors.hpp"

namespace treecut {

std::vector<double> default_ap_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.50 + 0.05 * i);
    return t;
}

namespace {

double kahan_mean(const std::vector<double>& values) {
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

void check_config(const EvalConfig& cfg) {
    if (!(cfg.tau_u > 0.0 && cfg.tau_u <= 1.0))
        throw invalid_parameter_error(fmt::format("tau_u must lie in (0,1], got {}", cfg.tau_u));
    if (!(cfg.tau_o > 0.0 && cfg.tau_o <= 1.0))
        throw invalid_parameter_error(fmt::format("tau_o must lie in (0,1], got {}", cfg.tau_o));
    for (std::size_t i = 0; i < cfg.ap_iou_thresholds.size(); ++i) {
        const double t = cfg.ap_iou_thresholds[i];
        if (!(t > 0.0 && t <= 1.0))
            throw invalid_parameter_error(
                fmt::format("AP IoU threshold {} outside (0,1]", t));
        if (i > 0 && t <= cfg.ap_iou_thresholds[i - 1])
            throw invalid_parameter_error("AP IoU thresholds must be strictly increasing");
    }
    if (cfg.range_filter_m && !(*cfg.range_filter_m > 0.0))
        throw invalid_parameter_error(
            fmt::format("range filter must be positive, got {}", *cfg.range_filter_m));
}

// Retained instances and excluded points for one frame under a config.
struct FrameView {
    std::vector<std::int32_t> instances;  // retained ids, ascending
    std::unordered_map<std::int32_t, std::size_t> slot;
    std::vector<std::size_t> counts;      // non-excluded points per retained instance
    std::vector<bool> within;             // range filter verdict per retained instance
    std::vector<std::uint8_t> excluded;   // per point
    std::size_t skipped_overlap = 0;
    std::size_t skipped_zero_point = 0;
};

FrameView make_view(const GroundTruth& gt, const EvalConfig& cfg,
                    const PointCloud* cloud = nullptr) {
    if (auto violation = validate_ground_truth(gt))
        throw invalid_input_error("ground truth invalid: " + *violation);
    if (cloud && cloud->size() != gt.size())
        throw invalid_input_error(fmt::format("cloud has {} points but ground truth has {}",
                                              cloud->size(), gt.size()));

    FrameView view;
    view.excluded.assign(gt.size(), 0);
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (gt.instance_id[i] < 0) view.excluded[i] = 1;

    std::vector<std::int32_t> dropped;
    if (cfg.overlap_mode == EvalConfig::OverlapMode::skip_objects) {
        dropped = gt.overlapping_instances;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (gt.instance_id[i] >= 0 &&
                std::binary_search(dropped.begin(), dropped.end(), gt.instance_id[i]))
                view.excluded[i] = 1;
        }
        view.skipped_overlap = dropped.size();
    }

    std::map<std::int32_t, std::size_t> live_counts;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (view.excluded[i]) continue;
        live_counts[gt.instance_id[i]] += 1;
    }

    for (const auto& [id, cls] : gt.class_of_instance) {
        if (std::binary_search(dropped.begin(), dropped.end(), id)) continue;
        auto it = live_counts.find(id);
        if (it == live_counts.end() || it->second == 0) {
            ++view.skipped_zero_point;
            continue;
        }
        view.slot[id] = view.instances.size();
        view.instances.push_back(id);
        view.counts.push_back(it->second);
    }

    view.within.assign(view.instances.size(), true);
    if (cfg.range_filter_m) {
        for (std::size_t l = 0; l < view.instances.size(); ++l) {
            const auto id = view.instances[l];
            double range;
            if (static_cast<std::size_t>(id) < gt.boxes.size()) {
                const Box& b = gt.boxes[static_cast<std::size_t>(id)];
                range = std::sqrt(b.cx * b.cx + b.cy * b.cy + b.cz * b.cz);
            } else if (cloud) {
                double cx = 0.0, cy = 0.0, cz = 0.0;
                std::size_t n = 0;
                for (std::size_t i = 0; i < gt.size(); ++i) {
                    if (gt.instance_id[i] != id) continue;
                    cx += cloud->points[i].x;
                    cy += cloud->points[i].y;
                    cz += cloud->points[i].z;
                    ++n;
                }
                cx /= static_cast<double>(n);
                cy /= static_cast<double>(n);
                cz /= static_cast<double>(n);
                range = std::sqrt(cx * cx + cy * cy + cz * cz);
            } else {
                throw invalid_parameter_error(
                    fmt::format("range filter needs a box or point coordinates for instance {}", id));
            }
            view.within[l] = range <= *cfg.range_filter_m;
        }
    }
    return view;
}

struct SegmentIndex {
    std::vector<std::int32_t> seg_of;           // per point, -1 when uncovered
    std::vector<std::size_t> adjusted_size;     // per segment, excluded points removed
};

SegmentIndex index_segments(const Segmentation& pred, const FrameView& view, std::size_t n) {
    SegmentIndex idx;
    idx.seg_of.assign(n, -1);
    idx.adjusted_size.assign(pred.segments.size(), 0);
    for (std::size_t k = 0; k < pred.segments.size(); ++k) {
        for (std::uint32_t p : pred.segments[k].indices) {
            if (p >= n)
                throw invalid_input_error(
                    fmt::format("segment index {} exceeds ground truth size {}", p, n));
            idx.seg_of[p] = static_cast<std::int32_t>(k);
            if (!view.excluded[p]) idx.adjusted_size[k] += 1;
        }
    }
    return idx;
}

// Intersection counts of every (segment, retained instance) pair.
std::vector<std::map<std::int32_t, std::size_t>> segment_instance_overlap(
    const GroundTruth& gt, const FrameView& view, const SegmentIndex& idx) {
    std::vector<std::map<std::int32_t, std::size_t>> overlap(idx.adjusted_size.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (view.excluded[i]) continue;
        const auto seg = idx.seg_of[i];
        if (seg < 0) continue;
        auto it = view.slot.find(gt.instance_id[i]);
        if (it == view.slot.end()) continue;
        overlap[static_cast<std::size_t>(seg)][gt.instance_id[i]] += 1;
    }
    return overlap;
}

// Retrieval-style predictions need not partition the cloud, so intersections
// are taken from each segment's own indices rather than a point-to-segment
// map.
struct RetrievalSegment {
    std::size_t adjusted_size = 0;
    std::map<std::int32_t, std::size_t> overlap;
};

std::vector<RetrievalSegment> retrieval_overlap(const Segmentation& pred, const GroundTruth& gt,
                                                const FrameView& view) {
    std::vector<RetrievalSegment> out(pred.segments.size());
    for (std::size_t k = 0; k < pred.segments.size(); ++k) {
        for (std::uint32_t p : pred.segments[k].indices) {
            if (p >= gt.size())
                throw invalid_input_error(fmt::format(
                    "segment index {} exceeds ground truth size {}", p, gt.size()));
            if (view.excluded[p]) continue;
            out[k].adjusted_size += 1;
            auto it = view.slot.find(gt.instance_id[p]);
            if (it != view.slot.end()) out[k].overlap[gt.instance_id[p]] += 1;
        }
    }
    return out;
}

double frame_worst_iou(const Segmentation& pred, const GroundTruth& gt, const FrameView& view,
                       const SegmentIndex& idx, bool* scorable) {
    const auto overlap = segment_instance_overlap(gt, view, idx);
    double worst = 1.0;
    bool any = false;
    for (std::size_t k = 0; k < pred.segments.size(); ++k) {
        if (idx.adjusted_size[k] == 0) continue;  // segment consists of excluded points only
        double best = 0.0;
        for (const auto& [inst, inter] : overlap[k]) {
            const auto l = view.slot.at(inst);
            const double uni = static_cast<double>(idx.adjusted_size[k] + view.counts[l] - inter);
            best = std::max(best, static_cast<double>(inter) / uni);
        }
        worst = std::min(worst, best);
        any = true;
    }
    *scorable = any && !view.instances.empty();
    return *scorable ? worst : 0.0;
}

}  // namespace

MatchOutcome match_objects(const Segmentation& pred, const GroundTruth& gt, const EvalConfig& cfg,
                           const PointCloud* cloud) {
    check_config(cfg);
    Segmentation canon = pred;
    canonicalize(canon);
    const FrameView view = make_view(gt, cfg, cloud);
    const SegmentIndex idx = index_segments(canon, view, gt.size());

    // Per retained instance: intersection counts per segment, ordered by
    // segment index so ties resolve to the lowest.
    std::vector<std::map<std::int32_t, std::size_t>> inter_of(view.instances.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (view.excluded[i]) continue;
        auto it = view.slot.find(gt.instance_id[i]);
        if (it == view.slot.end()) continue;
        if (idx.seg_of[i] < 0) continue;
        inter_of[it->second][idx.seg_of[i]] += 1;
    }

    MatchOutcome outcome;
    outcome.skipped_overlap = view.skipped_overlap;
    outcome.skipped_zero_point = view.skipped_zero_point;
    for (std::size_t l = 0; l < view.instances.size(); ++l) {
        ObjectMatch m;
        m.instance = view.instances[l];
        m.class_label = gt.class_of_instance.at(m.instance);
        m.within_range = view.within[l];
        std::size_t best = 0;
        for (const auto& [seg, count] : inter_of[l]) {
            if (count > best) {
                best = count;
                m.best_segment = seg;
            }
        }
        m.intersection = best;
        if (best == 0) {
            // Nothing intersects this object: it is both missed and uncovered.
            m.under = true;
            m.over = true;
        } else {
            m.purity = static_cast<double>(best) /
                       static_cast<double>(idx.adjusted_size[static_cast<std::size_t>(m.best_segment)]);
            m.recall = static_cast<double>(best) / static_cast<double>(view.counts[l]);
            m.under = m.purity < cfg.tau_u;
            m.over = m.recall < cfg.tau_o;
        }
        outcome.objects.push_back(std::move(m));
    }
    return outcome;
}

namespace {

struct UOAccumulator {
    std::size_t objects = 0, under = 0, over = 0;

    void add(const ObjectMatch& m) {
        ++objects;
        if (m.under) ++under;
        if (m.over) ++over;
    }

    UOStats stats() const {
        UOStats s;
        s.objects = objects;
        if (objects > 0) {
            s.under_pct = 100.0 * static_cast<double>(under) / static_cast<double>(objects);
            s.over_pct = 100.0 * static_cast<double>(over) / static_cast<double>(objects);
            s.total_pct = s.under_pct + s.over_pct;
        }
        return s;
    }
};

}  // namespace

EvalReport under_over(const Segmentation& pred, const GroundTruth& gt, const EvalConfig& cfg,
                      const PointCloud* cloud) {
    if (auto violation = validate_segmentation(pred, gt.size()))
        throw invalid_input_error("prediction is not a partition of the ground truth universe: " +
                                  *violation);

    const MatchOutcome outcome = match_objects(pred, gt, cfg, cloud);

    EvalReport report;
    report.skipped_overlap = outcome.skipped_overlap;
    report.skipped_zero_point = outcome.skipped_zero_point;

    UOAccumulator overall, overall_within;
    std::map<std::string, UOAccumulator> per_class, per_class_within;
    for (const auto& m : outcome.objects) {
        overall.add(m);
        per_class[m.class_label].add(m);
        if (cfg.range_filter_m && m.within_range) {
            overall_within.add(m);
            per_class_within[m.class_label].add(m);
        }
    }
    report.overall = overall.stats();
    for (const auto& [cls, acc] : per_class) report.per_class[cls] = acc.stats();
    if (cfg.range_filter_m) {
        report.overall_within = overall_within.stats();
        std::map<std::string, UOStats> within;
        for (const auto& [cls, acc] : per_class_within) within[cls] = acc.stats();
        report.per_class_within = std::move(within);
    }

    Segmentation canon = pred;
    canonicalize(canon);
    const FrameView view = make_view(gt, cfg, cloud);
    const SegmentIndex idx = index_segments(canon, view, gt.size());
    bool scorable = false;
    report.worst_iou = frame_worst_iou(canon, gt, view, idx, &scorable);
    return report;
}

double worst_iou_mean(std::span<const Segmentation> preds, std::span<const GroundTruth> gts,
                      std::size_t* skipped_frames) {
    if (preds.size() != gts.size())
        throw invalid_input_error(fmt::format("{} predictions vs {} ground truth frames",
                                              preds.size(), gts.size()));
    const EvalConfig cfg;  // default protocol: overlap objects skipped, no range filter
    std::vector<double> values(preds.size(), 0.0);
    std::vector<std::uint8_t> usable(preds.size(), 0);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t f = 0; f < static_cast<std::int64_t>(preds.size()); ++f) {
        try {
            Segmentation canon = preds[f];
            canonicalize(canon);
            const FrameView view = make_view(gts[f], cfg);
            const SegmentIndex idx = index_segments(canon, view, gts[f].size());
            bool scorable = false;
            values[f] = frame_worst_iou(canon, gts[f], view, idx, &scorable);
            usable[f] = scorable ? 1 : 0;
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<double> kept;
    std::size_t skipped = 0;
    for (std::size_t f = 0; f < preds.size(); ++f) {
        if (usable[f])
            kept.push_back(values[f]);
        else
            ++skipped;
    }
    if (skipped_frames) *skipped_frames = skipped;
    return kahan_mean(kept);
}

namespace {

struct RankedPrediction {
    double confidence;
    std::size_t frame;
    std::size_t segment;
};

double interpolated_ap(const std::vector<double>& precision, const std::vector<double>& recall) {
    if (precision.empty()) return 0.0;
    std::vector<double> suffix_max(precision.size());
    double running = 0.0;
    for (std::size_t k = precision.size(); k-- > 0;) {
        running = std::max(running, precision[k]);
        suffix_max[k] = running;
    }
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t k = 0; k < precision.size(); ++k) {
        if (recall[k] > prev_recall) {
            ap += (recall[k] - prev_recall) * suffix_max[k];
            prev_recall = recall[k];
        }
    }
    return ap;
}

}  // namespace

ApResult instance_ap(std::span<const ScoredSegmentation> preds, std::span<const GroundTruth> gts,
                     const EvalConfig& cfg) {
    check_config(cfg);
    if (preds.size() != gts.size())
        throw invalid_input_error(fmt::format("{} predictions vs {} ground truth frames",
                                              preds.size(), gts.size()));

    struct FrameData {
        FrameView view;
        std::vector<RetrievalSegment> segments;
    };
    std::vector<FrameData> frames(preds.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t f = 0; f < static_cast<std::int64_t>(preds.size()); ++f) {
        try {
            if (preds[f].confidences.size() != preds[f].seg.segments.size())
                throw invalid_input_error(
                    fmt::format("frame {}: {} segments but {} confidences", f,
                                preds[f].seg.segments.size(), preds[f].confidences.size()));
            for (double c : preds[f].confidences) {
                if (!(c >= 0.0 && c <= 1.0))
                    throw invalid_input_error(
                        fmt::format("frame {}: confidence {} outside [0,1]", f, c));
            }
            frames[f].view = make_view(gts[f], cfg);
            frames[f].segments = retrieval_overlap(preds[f].seg, gts[f], frames[f].view);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<RankedPrediction> ranked;
    for (std::size_t f = 0; f < preds.size(); ++f) {
        for (std::size_t s = 0; s < preds[f].seg.segments.size(); ++s)
            ranked.push_back({preds[f].confidences[s], f, s});
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedPrediction& a, const RankedPrediction& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return std::tie(a.frame, a.segment) < std::tie(b.frame, b.segment);
    });

    // Ground-truth population per class.
    std::map<std::string, std::size_t> gt_per_class;
    for (std::size_t f = 0; f < preds.size(); ++f) {
        for (auto id : frames[f].view.instances)
            gt_per_class[gts[f].class_of_instance.at(id)] += 1;
    }

    std::map<std::string, std::vector<double>> ap_by_class;  // per threshold
    for (double threshold : cfg.ap_iou_thresholds) {
        // Greedy confidence-ordered matching per frame.
        std::vector<std::vector<std::uint8_t>> taken(frames.size());
        for (std::size_t f = 0; f < frames.size(); ++f)
            taken[f].assign(frames[f].view.instances.size(), 0);

        std::vector<std::string> matched_class(ranked.size());  // empty = false positive
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            const auto& cand = ranked[r];
            const FrameData& fd = frames[cand.frame];
            const RetrievalSegment& seg = fd.segments[cand.segment];
            double best_iou = 0.0;
            std::int64_t best_slot = -1;
            for (const auto& [inst, inter] : seg.overlap) {
                const std::size_t l = fd.view.slot.at(inst);
                if (taken[cand.frame][l]) continue;
                const double uni =
                    static_cast<double>(seg.adjusted_size + fd.view.counts[l] - inter);
                const double iou = static_cast<double>(inter) / uni;
                if (iou >= threshold && iou > best_iou) {
                    best_iou = iou;
                    best_slot = static_cast<std::int64_t>(l);
                }
            }
            if (best_slot >= 0) {
                taken[cand.frame][static_cast<std::size_t>(best_slot)] = 1;
                const auto inst = fd.view.instances[static_cast<std::size_t>(best_slot)];
                matched_class[r] = gts[cand.frame].class_of_instance.at(inst);
            }
        }

        for (const auto& [cls, npos] : gt_per_class) {
            std::vector<double> precision, recall;
            std::size_t tp = 0, fp = 0;
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                if (matched_class[r] == cls) {
                    ++tp;
                } else if (matched_class[r].empty()) {
                    ++fp;  // unmatched predictions count against every class
                } else {
                    continue;  // matched another class: ignored for this one
                }
                precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
                recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
            }
            ap_by_class[cls].push_back(interpolated_ap(precision, recall));
        }
    }

    ApResult result;
    std::vector<double> class_means;
    for (const auto& [cls, values] : ap_by_class) {
        const double mean = kahan_mean(values);
        result.ap_per_class[cls] = mean;
        class_means.push_back(mean);
    }
    result.mean_ap = kahan_mean(class_means);
    return result;
}

}  // namespace treecut
