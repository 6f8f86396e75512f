#include "treecut/objectness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "treecut/errors.hpp"

namespace treecut {

namespace {

struct InstanceStats {
    std::vector<std::int32_t> ids;          // sorted
    std::vector<double> totals;             // per instance: count or weight sum
    std::unordered_map<std::int32_t, std::size_t> slot;
};

// weights == nullptr means unit weight per point (plain counting).
InstanceStats instance_stats(const GroundTruth& gt, const std::vector<double>* weights) {
    InstanceStats stats;
    for (const auto& [id, cls] : gt.class_of_instance) {
        stats.slot[id] = stats.ids.size();
        stats.ids.push_back(id);
        stats.totals.push_back(0.0);
    }
    for (std::size_t i = 0; i < gt.instance_id.size(); ++i) {
        const auto id = gt.instance_id[i];
        if (id < 0) continue;
        auto it = stats.slot.find(id);
        if (it == stats.slot.end())
            throw invalid_input_error(fmt::format("instance {} (point {}) has no class label", id, i));
        stats.totals[it->second] += weights ? (*weights)[i] : 1.0;
    }
    return stats;
}

double best_iou(const PointIndexSet& seg, const GroundTruth& gt, const InstanceStats& stats,
                const std::vector<double>* weights) {
    if (seg.empty()) throw invalid_input_error("cannot score an empty segment");
    if (stats.ids.empty()) throw invalid_input_error("ground truth has no instances");
    std::vector<double> inter(stats.ids.size(), 0.0);
    double seg_total = 0.0;
    for (std::uint32_t idx : seg.indices) {
        if (idx >= gt.instance_id.size())
            throw invalid_input_error(
                fmt::format("segment index {} exceeds ground truth size {}", idx,
                            gt.instance_id.size()));
        const auto id = gt.instance_id[idx];
        if (id < 0) continue;  // excluded from numerator and denominator
        const double w = weights ? (*weights)[idx] : 1.0;
        seg_total += w;
        inter[stats.slot.at(id)] += w;
    }
    double best = 0.0;
    for (std::size_t l = 0; l < stats.ids.size(); ++l) {
        const double uni = seg_total + stats.totals[l] - inter[l];
        if (uni <= 0.0) continue;
        best = std::max(best, inter[l] / uni);
    }
    return best;
}

}  // namespace

double vanilla_iou(const PointIndexSet& seg, const GroundTruth& gt) {
    const auto stats = instance_stats(gt, nullptr);
    return best_iou(seg, gt, stats, nullptr);
}

double weighted_iou(const PointIndexSet& seg, const PointCloud& cloud, const GroundTruth& gt) {
    const auto weights = squared_ranges(cloud);
    const auto stats = instance_stats(gt, &weights);
    return best_iou(seg, gt, stats, &weights);
}

double heuristic_score(const PointIndexSet& seg, const PointCloud& cloud,
                       const HeuristicParams& p) {
    if (seg.empty()) throw invalid_input_error("cannot score an empty segment");
    double lo[3] = {std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
    double hi[3] = {-std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
    double cx = 0.0, cy = 0.0, cz = 0.0;
    for (std::uint32_t idx : seg.indices) {
        const Point& pt = cloud.points[idx];
        const double c[3] = {pt.x, pt.y, pt.z};
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
        cx += pt.x;
        cy += pt.y;
        cz += pt.z;
    }
    const double n = static_cast<double>(seg.size());
    cx /= n;
    cy /= n;
    cz /= n;

    auto log_bump = [](double value, double center, double sigma) {
        const double t = std::log(value / center) / sigma;
        return std::exp(-0.5 * t * t);
    };
    const double ext[3] = {std::max(hi[0] - lo[0], p.extent_floor),
                           std::max(hi[1] - lo[1], p.extent_floor),
                           std::max(hi[2] - lo[2], p.extent_floor)};

    const double term_volume = log_bump(ext[0] * ext[1] * ext[2], p.volume_center, p.volume_log_sigma);
    const double term_count = n / (n + p.count_half);
    const double term_height = log_bump(ext[2], p.height_center, p.height_log_sigma);

    double log_sum = p.volume_weight * std::log(term_volume) +
                     p.count_weight * std::log(term_count) +
                     p.height_weight * std::log(term_height);
    double weight_sum = p.volume_weight + p.count_weight + p.height_weight;
    if (p.range_scale > 0.0) {
        const double range = std::sqrt(cx * cx + cy * cy + cz * cz);
        log_sum += p.range_weight * (-range / p.range_scale);
        weight_sum += p.range_weight;
    }
    const double s = std::exp(log_sum / weight_sum);
    return std::min(1.0, std::max(0.0, s));
}

double GtVanillaScorer::score(const PointIndexSet& seg, const PointCloud&) const {
    return vanilla_iou(seg, gt_);
}

double GtWeightedScorer::score(const PointIndexSet& seg, const PointCloud& cloud) const {
    return weighted_iou(seg, cloud, gt_);
}

double HeuristicScorer::score(const PointIndexSet& seg, const PointCloud& cloud) const {
    return heuristic_score(seg, cloud, params_);
}

double cache_lookup(const ScoreCache& cache, const PointIndexSet& seg, std::string_view frame_id) {
    const auto key = segment_key(seg, frame_id);
    auto it = cache.entries.find(key);
    if (it == cache.entries.end())
        throw missing_score_error(
            fmt::format("no cached score for segment key {}", segment_key_hex(key)));
    return it->second;
}

ScoreCache load_score_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(fmt::format("cannot open score cache {}", path.string()));
    ScoreCache cache;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw format_error(fmt::format("{}:{}: expected `node_key,score`", path.string(), lineno));
        std::uint64_t key = 0;
        try {
            key = std::stoull(line.substr(0, comma), nullptr, 16);
        } catch (const std::exception&) {
            throw format_error(fmt::format("{}:{}: bad hex key", path.string(), lineno));
        }
        double score = 0.0;
        try {
            score = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw format_error(fmt::format("{}:{}: bad score", path.string(), lineno));
        }
        if (!(score >= 0.0 && score <= 1.0))
            throw format_error(
                fmt::format("{}:{}: score {} outside [0,1]", path.string(), lineno, score));
        cache.entries[key] = score;
    }
    return cache;
}

void save_score_cache(const ScoreCache& cache, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error(fmt::format("cannot write score cache {}", path.string()));
    for (const auto& [key, score] : cache.entries)
        fmt::print(out, "{},{}\n", segment_key_hex(key), score);
}

FileCacheScorer::FileCacheScorer(ScoreCache cache, CacheMissPolicy policy,
                                 std::shared_ptr<const ObjectnessScorer> fallback)
    : cache_(std::move(cache)), policy_(policy), fallback_(std::move(fallback)) {
    if (policy_ == CacheMissPolicy::fallback && !fallback_)
        throw invalid_parameter_error("fallback cache-miss policy requires a fallback scorer");
}

double FileCacheScorer::score(const PointIndexSet& seg, const PointCloud& cloud) const {
    try {
        return cache_lookup(cache_, seg, cloud.frame_id);
    } catch (const missing_score_error&) {
        if (policy_ == CacheMissPolicy::fallback) return fallback_->score(seg, cloud);
        throw;
    }
}

double ScoringEngine::score(const PointIndexSet& seg) {
    const auto key = segment_key(seg, cloud_->frame_id);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const double s = scorer_->score(seg, *cloud_);
    if (!(s >= 0.0 && s <= 1.0))
        throw scorer_error(fmt::format("scorer {} returned {} outside [0,1]", scorer_->name(), s));
    ++fresh_evals_;
    memo_.emplace(key, s);
    return s;
}

std::vector<TrainingPair> make_training_pairs(const Forest& forest, const PointCloud& cloud,
                                              const GroundTruth& gt, IouTarget target) {
    std::vector<const TreeNode*> nodes;
    for_each_node(forest, [&](const TreeNode& n) { nodes.push_back(&n); });

    const auto weights = squared_ranges(cloud);
    const auto stats = instance_stats(gt, target == IouTarget::weighted ? &weights : nullptr);

    std::vector<TrainingPair> pairs(nodes.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 32)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(nodes.size()); ++i) {
        try {
            pairs[i].node_id = nodes[i]->id;
            pairs[i].segment = nodes[i]->points;
            pairs[i].target = best_iou(nodes[i]->points, gt, stats,
                                       target == IouTarget::weighted ? &weights : nullptr);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return pairs;
}

void write_training_pairs(const std::vector<TrainingPair>& pairs, const PointCloud& cloud,
                          std::ostream& out) {
    for (const auto& pair : pairs) {
        fmt::print(out, "{};{};", pair.node_id, pair.target);
        for (std::size_t i = 0; i < pair.segment.size(); ++i) {
            const Point& p = cloud.points[pair.segment.indices[i]];
            if (i) fmt::print(out, ", ");
            if (cloud.has_intensity)
                fmt::print(out, "{} {} {} {}", p.x, p.y, p.z, p.intensity);
            else
                fmt::print(out, "{} {} {}", p.x, p.y, p.z);
        }
        fmt::print(out, "\n");
    }
}

}  // namespace treecut
