#include "treecut/cli.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "treecut/errors.hpp"
#include "treecut/eval.hpp"
#include "treecut/geometry.hpp"
#include "treecut/hierarchy.hpp"
#include "treecut/io.hpp"
#include "treecut/objectness.hpp"
#include "treecut/parallel.hpp"
#include "treecut/search.hpp"
#include "treecut/synthetic.hpp"

namespace treecut {

namespace {

const std::map<std::string, std::vector<double>> kSchedulePresets = {
    {"default", {2.0, 1.0, 0.5, 0.25}},
    {"coarse3", {2.7, 0.9, 0.3}},
    {"mid4", {2.4, 1.2, 0.6, 0.3}},
    {"fine5", {3.2, 1.6, 0.8, 0.4, 0.2}},
};

std::vector<double> parse_schedule(const std::string& text) {
    auto preset = kSchedulePresets.find(text);
    if (preset != kSchedulePresets.end()) return preset->second;
    std::vector<double> schedule;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string field = text.substr(start, comma - start);
        try {
            std::size_t used = 0;
            schedule.push_back(std::stod(field, &used));
            if (used != field.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw invalid_parameter_error(
                fmt::format("--epsilons: `{}` is not a number or preset name", field));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return schedule;
}

std::unique_ptr<ObjectnessScorer> make_scorer(const std::string& name,
                                              const std::optional<GroundTruth>& gt,
                                              const std::string& cache_miss) {
    if (name == "heuristic") return std::make_unique<HeuristicScorer>();
    if (name == "gt-vanilla" || name == "gt-weighted") {
        if (!gt)
            throw invalid_parameter_error(
                fmt::format("--scorer {} needs ground truth labels (--gt)", name));
        if (name == "gt-vanilla") return std::make_unique<GtVanillaScorer>(*gt);
        return std::make_unique<GtWeightedScorer>(*gt);
    }
    if (name.rfind("file:", 0) == 0) {
        ScoreCache cache = load_score_cache(name.substr(5));
        if (cache_miss == "heuristic") {
            return std::make_unique<FileCacheScorer>(std::move(cache), CacheMissPolicy::fallback,
                                                     std::make_shared<HeuristicScorer>());
        }
        return std::make_unique<FileCacheScorer>(std::move(cache));
    }
    throw invalid_parameter_error(fmt::format(
        "--scorer must be heuristic, gt-vanilla, gt-weighted, or file:PATH, got `{}`", name));
}

Forest forest_for(const PointCloud& cloud, const std::string& forest_path,
                  const std::string& epsilons) {
    if (!forest_path.empty()) {
        Forest forest = load_forest(forest_path);
        if (forest.cloud_size != cloud.size())
            throw invalid_input_error(
                fmt::format("forest was built over {} points but the cloud has {}",
                            forest.cloud_size, cloud.size()));
        return forest;
    }
    return build_forest(cloud, parse_schedule(epsilons));
}

void check_sizes(const Segmentation& pred, const GroundTruth& gt) {
    std::size_t covered = 0;
    for (const auto& s : pred.segments) covered += s.size();
    if (covered != gt.size())
        throw invalid_input_error(fmt::format(
            "prediction labels cover {} points but ground truth has {}", covered, gt.size()));
}

std::string render_report_csv(const EvalReport& report, bool with_range, bool with_ap) {
    std::string out = "class,objects,under_pct,over_pct,total_pct";
    if (with_range) out += ",objects_within,under_within_pct,over_within_pct,total_within_pct";
    if (with_ap) out += ",ap";
    out += ",worst_iou,skipped_overlap,skipped_zero_point\n";

    auto row = [&](const std::string& cls, const UOStats& stats, const UOStats* within,
                   const double* ap, bool is_total) {
        out += fmt::format("{},{},{:.4f},{:.4f},{:.4f}", cls, stats.objects, stats.under_pct,
                           stats.over_pct, stats.total_pct);
        if (with_range) {
            if (within)
                out += fmt::format(",{},{:.4f},{:.4f},{:.4f}", within->objects,
                                   within->under_pct, within->over_pct, within->total_pct);
            else
                out += ",0,0.0000,0.0000,0.0000";
        }
        if (with_ap) out += ap ? fmt::format(",{:.4f}", *ap) : ",";
        if (is_total)
            out += fmt::format(",{:.6f},{},{}\n", report.worst_iou, report.skipped_overlap,
                               report.skipped_zero_point);
        else
            out += ",,,\n";
    };

    for (const auto& [cls, stats] : report.per_class) {
        const UOStats* within = nullptr;
        if (report.per_class_within) {
            auto it = report.per_class_within->find(cls);
            if (it != report.per_class_within->end()) within = &it->second;
        }
        const double* ap = nullptr;
        if (report.ap_per_class) {
            auto it = report.ap_per_class->find(cls);
            if (it != report.ap_per_class->end()) ap = &it->second;
        }
        row(cls, stats, within, ap, false);
    }
    const UOStats* within = report.overall_within ? &*report.overall_within : nullptr;
    const double* map = report.mean_ap ? &*report.mean_ap : nullptr;
    row("all", report.overall, within, map, true);
    return out;
}

void print_report(const EvalReport& report, const EvalConfig& cfg) {
    fmt::print("under/over-segmentation errors (tau_u={:.4f}, tau_o={:.4f}):\n", cfg.tau_u,
               cfg.tau_o);
    fmt::print("  {:<16} {:>8} {:>9} {:>9} {:>9}\n", "class", "objects", "under%", "over%",
               "total%");
    auto line = [](const std::string& cls, const UOStats& s) {
        fmt::print("  {:<16} {:>8} {:>9.2f} {:>9.2f} {:>9.2f}\n", cls, s.objects, s.under_pct,
                   s.over_pct, s.total_pct);
    };
    for (const auto& [cls, stats] : report.per_class) line(cls, stats);
    line("all", report.overall);
    if (report.overall_within) {
        fmt::print("within {:.1f} m:\n", *cfg.range_filter_m);
        if (report.per_class_within)
            for (const auto& [cls, stats] : *report.per_class_within) line(cls, stats);
        line("all", *report.overall_within);
    }
    fmt::print("skipped: {} overlapping, {} zero-point\n", report.skipped_overlap,
               report.skipped_zero_point);
    fmt::print("worst IoU: {:.6f}\n", report.worst_iou);
    if (report.ap_per_class) {
        fmt::print("instance AP (mean over IoU thresholds):\n");
        for (const auto& [cls, ap] : *report.ap_per_class)
            fmt::print("  {:<16} {:.4f}\n", cls, ap);
        fmt::print("  {:<16} {:.4f}\n", "mean", *report.mean_ap);
    }
}

// ---- subcommand bodies ----

struct BuildTreeArgs {
    std::string points, epsilons = "default", out;
};

void run_build_tree(const BuildTreeArgs& args) {
    const PointCloud cloud = load_points(args.points);
    const Forest forest = build_forest(cloud, parse_schedule(args.epsilons));
    save_forest(forest, args.out);
    fmt::print("{} points -> {} trees, {} nodes\n", cloud.size(), forest.trees.size(),
               node_count(forest));
}

struct SegmentArgs {
    std::string points, forest, epsilons, mode = "min", scorer = "heuristic", gt;
    std::string cache_miss = "error", out, out_scores;
};

void run_segment(const SegmentArgs& args) {
    const PointCloud cloud = load_points(args.points);
    std::optional<GroundTruth> gt;
    if (!args.gt.empty()) {
        gt = load_ground_truth(args.gt);
        if (gt->size() != cloud.size())
            throw invalid_input_error(fmt::format("ground truth has {} labels for {} points",
                                                  gt->size(), cloud.size()));
    }
    const auto scorer = make_scorer(args.scorer, gt, args.cache_miss);
    const std::string epsilons =
        args.epsilons.empty() && args.forest.empty() ? "default" : args.epsilons;
    const Forest forest = forest_for(cloud, args.forest, epsilons);
    const Aggregator mode = args.mode == "min" ? Aggregator::min : Aggregator::avg;

    const SearchResult result = segment_forest(forest, cloud, *scorer, mode);
    save_labels(result.segmentation, cloud.size(), args.out);
    if (!args.out_scores.empty()) {
        ScoringEngine engine(*scorer, cloud);
        std::vector<double> confidences;
        confidences.reserve(result.segmentation.segments.size());
        for (const auto& seg : result.segmentation.segments)
            confidences.push_back(engine.score(seg));
        save_scores(confidences, args.out_scores);
    }
    fmt::print("mode={} scorer={} segments={} score={:.6f} visited={} scored={}\n", args.mode,
               scorer->name(), result.segmentation.segments.size(), result.score,
               result.nodes_visited, result.nodes_scored);
}

struct BaselineArgs {
    std::string points, epsilons = "default", out, out_scores;
    double level = 0.0;
};

void run_baseline(const BaselineArgs& args) {
    const PointCloud cloud = load_points(args.points);
    const Forest forest = build_forest(cloud, parse_schedule(args.epsilons));
    Segmentation seg = level_cut(forest, args.level);
    canonicalize(seg);
    save_labels(seg, cloud.size(), args.out);
    if (!args.out_scores.empty()) {
        // Baseline confidences come from the training-free scorer.
        HeuristicScorer scorer;
        ScoringEngine engine(scorer, cloud);
        std::vector<double> confidences;
        confidences.reserve(seg.segments.size());
        for (const auto& s : seg.segments) confidences.push_back(engine.score(s));
        save_scores(confidences, args.out_scores);
    }
    fmt::print("level={} segments={}\n", args.level, seg.segments.size());
}

struct EvalArgs {
    std::string pred, gt, out, points, scores, overlap = "skip";
    double tau_u = 2.0 / 3.0, tau_o = 1.0;
    std::optional<double> range;
    bool ap = false;
};

void run_eval(const EvalArgs& args) {
    const Segmentation pred = load_labels(args.pred);
    const GroundTruth gt = load_ground_truth(args.gt);
    check_sizes(pred, gt);

    std::optional<PointCloud> cloud;
    if (!args.points.empty()) {
        cloud = load_points(args.points);
        if (cloud->size() != gt.size())
            throw invalid_input_error(fmt::format("ground truth has {} labels for {} points",
                                                  gt.size(), cloud->size()));
    }

    EvalConfig cfg;
    cfg.tau_u = args.tau_u;
    cfg.tau_o = args.tau_o;
    cfg.range_filter_m = args.range;
    cfg.overlap_mode = args.overlap == "region" ? EvalConfig::OverlapMode::ignore_region
                                                : EvalConfig::OverlapMode::skip_objects;

    EvalReport report = under_over(pred, gt, cfg, cloud ? &*cloud : nullptr);

    if (args.ap) {
        ScoredSegmentation scored;
        scored.seg = pred;
        canonicalize(scored.seg);
        if (!args.scores.empty()) {
            scored.confidences = load_scores(args.scores);
            if (scored.confidences.size() != scored.seg.segments.size())
                throw invalid_input_error(
                    fmt::format("{} confidences for {} segments", scored.confidences.size(),
                                scored.seg.segments.size()));
        } else if (cloud) {
            HeuristicScorer scorer;
            ScoringEngine engine(scorer, *cloud);
            for (const auto& s : scored.seg.segments)
                scored.confidences.push_back(engine.score(s));
        } else {
            throw invalid_input_error(
                "--ap needs per-segment confidences: pass --scores or --points");
        }
        const ApResult ap =
            instance_ap(std::span(&scored, 1), std::span(&gt, 1), cfg);
        report.ap_per_class = ap.ap_per_class;
        report.mean_ap = ap.mean_ap;
    }

    write_file_atomic(args.out, render_report_csv(report, args.range.has_value(), args.ap));
    print_report(report, cfg);
}

struct ExportArgs {
    std::string points, gt, epsilons = "default", target = "vanilla", out;
};

void run_export_training(const ExportArgs& args) {
    const PointCloud cloud = load_points(args.points);
    const GroundTruth gt = load_ground_truth(args.gt);
    if (gt.size() != cloud.size())
        throw invalid_input_error(fmt::format("ground truth has {} labels for {} points",
                                              gt.size(), cloud.size()));
    const Forest forest = build_forest(cloud, parse_schedule(args.epsilons));
    const auto pairs = make_training_pairs(
        forest, cloud, gt, args.target == "weighted" ? IouTarget::weighted : IouTarget::vanilla);
    std::ostringstream buffer;
    write_training_pairs(pairs, cloud, buffer);
    write_file_atomic(args.out, buffer.str());
    fmt::print("{} training pairs\n", pairs.size());
}

struct CountCutsArgs {
    std::string forest;
};

void run_count_cuts(const CountCutsArgs& args) {
    const Forest forest = load_forest(args.forest);
    BigCount total = 1;
    for (const auto& tree : forest.trees) {
        const BigCount n = count_tree_consistent(tree);
        fmt::print("{}: {}\n", tree.id, n.str());
        total *= n;
    }
    if (forest.trees.empty()) total = 0;
    fmt::print("total: {}\n", total.str());
}

struct GenArgs {
    SceneSpec spec;
    std::string out_points, out_gt;
};

void run_gen_synthetic(const GenArgs& args) {
    auto [cloud, gt] = gen_synthetic(args.spec);
    save_points(cloud, args.out_points);
    save_ground_truth(gt, args.out_gt);
    fmt::print("{} objects, {} points\n", gt.class_of_instance.size(), cloud.size());
}

struct CropArgs {
    std::string points, boxes, out_points, out_gt;
};

void run_crop(const CropArgs& args) {
    const PointCloud cloud = load_points(args.points);
    const auto boxes = load_boxes(args.boxes);
    auto [fg, gt] = crop_and_label(cloud, boxes);
    save_points(fg, args.out_points);
    save_ground_truth(gt, args.out_gt);
    std::size_t overlapped_points = 0;
    for (auto id : gt.instance_id)
        if (id < 0) ++overlapped_points;
    fmt::print("kept {} of {} points, {} in overlapped regions, {} overlapping boxes\n",
               fg.size(), cloud.size(), overlapped_points, gt.overlapping_instances.size());
}

}  // namespace

int treecut_main(int argc, const char* const* argv) {
    try {
        apply_thread_env();

        CLI::App app{"Point-cloud instance segmentation by objectness-guided tree search"};
        app.require_subcommand(1);

        BuildTreeArgs build_args;
        auto* build = app.add_subcommand("build-tree", "Build the grouping hierarchy");
        build->add_option("--points", build_args.points, "Input point file")->required();
        build->add_option("--epsilons", build_args.epsilons,
                          "Comma-separated decreasing thresholds or a preset name");
        build->add_option("--out", build_args.out, "Output forest JSON")->required();

        SegmentArgs seg_args;
        auto* segment = app.add_subcommand("segment", "Search the hierarchy for a segmentation");
        segment->add_option("--points", seg_args.points, "Input point file")->required();
        segment->add_option("--forest", seg_args.forest, "Prebuilt forest JSON");
        segment->add_option("--epsilons", seg_args.epsilons, "Schedule when no forest is given");
        segment->add_option("--mode", seg_args.mode, "Aggregation of segment scores")
            ->check(CLI::IsMember({"min", "avg"}));
        segment->add_option("--scorer", seg_args.scorer,
                            "heuristic, gt-vanilla, gt-weighted, or file:PATH");
        segment->add_option("--gt", seg_args.gt, "Ground truth JSON (for gt-* scorers)");
        segment->add_option("--cache-miss", seg_args.cache_miss,
                            "file scorer policy for missing keys")
            ->check(CLI::IsMember({"error", "heuristic"}));
        segment->add_option("--out", seg_args.out, "Output label file")->required();
        segment->add_option("--out-scores", seg_args.out_scores, "Per-segment objectness");

        BaselineArgs base_args;
        auto* baseline = app.add_subcommand("baseline", "Fixed-threshold level cut");
        baseline->add_option("--points", base_args.points, "Input point file")->required();
        baseline->add_option("--epsilons", base_args.epsilons, "Schedule");
        baseline->add_option("--level", base_args.level, "Schedule member to cut at")->required();
        baseline->add_option("--out", base_args.out, "Output label file")->required();
        baseline->add_option("--out-scores", base_args.out_scores, "Per-segment confidence");

        EvalArgs eval_args;
        double eval_range = 0.0;
        auto* eval = app.add_subcommand("eval", "Segmentation quality report");
        eval->add_option("--pred", eval_args.pred, "Predicted label file")->required();
        eval->add_option("--gt", eval_args.gt, "Ground truth JSON")->required();
        eval->add_option("--tau-u", eval_args.tau_u, "Purity threshold");
        eval->add_option("--tau-o", eval_args.tau_o, "Recall threshold");
        auto* range_opt = eval->add_option("--range", eval_range, "Also report objects within R meters");
        eval->add_option("--overlap", eval_args.overlap, "Overlapping-box handling")
            ->check(CLI::IsMember({"skip", "region"}));
        eval->add_flag("--ap", eval_args.ap, "Also compute class-agnostic instance AP");
        eval->add_option("--scores", eval_args.scores, "Per-segment confidences for --ap");
        eval->add_option("--points", eval_args.points, "Point file (range centroids, --ap fallback)");
        eval->add_option("--out", eval_args.out, "Output report CSV")->required();

        ExportArgs export_args;
        auto* exp = app.add_subcommand("export-training", "Emit (segment, objectness) pairs");
        exp->add_option("--points", export_args.points, "Input point file")->required();
        exp->add_option("--gt", export_args.gt, "Ground truth JSON")->required();
        exp->add_option("--epsilons", export_args.epsilons, "Schedule");
        exp->add_option("--target", export_args.target, "Objectness definition")
            ->check(CLI::IsMember({"vanilla", "weighted"}));
        exp->add_option("--out", export_args.out, "Output pair file")->required();

        CountCutsArgs count_args;
        auto* count = app.add_subcommand("count-cuts", "Count tree-consistent segmentations");
        count->add_option("--forest", count_args.forest, "Forest JSON")->required();

        GenArgs gen_args;
        auto* gen = app.add_subcommand("gen-synthetic", "Generate a labeled synthetic scene");
        gen->add_option("--seed", gen_args.spec.seed, "RNG seed");
        gen->add_option("--objects", gen_args.spec.num_objects, "Number of objects");
        gen->add_option("--extent-min", gen_args.spec.extent_min, "Min per-axis extent");
        gen->add_option("--extent-max", gen_args.spec.extent_max, "Max per-axis extent");
        gen->add_option("--points-min", gen_args.spec.points_min, "Min target points per object");
        gen->add_option("--points-max", gen_args.spec.points_max, "Max target points per object");
        gen->add_option("--gap-min", gen_args.spec.gap_min, "Min nearest-neighbor gap");
        gen->add_option("--gap-max", gen_args.spec.gap_max, "Max nearest-neighbor gap");
        gen->add_option("--disc-radius", gen_args.spec.disc_radius, "Placement disc radius");
        gen->add_flag("--range-density", gen_args.spec.range_density,
                      "Scale point counts with inverse squared range");
        gen->add_option("--max-pitch", gen_args.spec.max_pitch, "Grid pitch ceiling");
        gen->add_option("--out-points", gen_args.out_points, "Output point file")->required();
        gen->add_option("--out-gt", gen_args.out_gt, "Output ground truth JSON")->required();

        CropArgs crop_args;
        auto* crop = app.add_subcommand("crop", "Keep in-box points and derive labels");
        crop->add_option("--points", crop_args.points, "Input point file")->required();
        crop->add_option("--boxes", crop_args.boxes, "Box CSV")->required();
        crop->add_option("--out-points", crop_args.out_points, "Output point file")->required();
        crop->add_option("--out-gt", crop_args.out_gt, "Output ground truth JSON")->required();

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2;
        }

        if (range_opt->count() > 0) eval_args.range = eval_range;

        if (build->parsed()) run_build_tree(build_args);
        if (segment->parsed()) run_segment(seg_args);
        if (baseline->parsed()) run_baseline(base_args);
        if (eval->parsed()) run_eval(eval_args);
        if (exp->parsed()) run_export_training(export_args);
        if (count->parsed()) run_count_cuts(count_args);
        if (gen->parsed()) run_gen_synthetic(gen_args);
        if (crop->parsed()) run_crop(crop_args);
        return 0;
    } catch (const error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return e.error_kind() == error::kind::io ? 1 : 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
}

}  // namespace treecut
