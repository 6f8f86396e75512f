#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "treecut/geometry.hpp"
#include "treecut/hierarchy.hpp"

namespace treecut {

// Binary point file: little-endian float32 records [x y z intensity].
PointCloud load_points(const std::filesystem::path& path);
void save_points(const PointCloud& cloud, const std::filesystem::path& path);

// CSV rows `class,cx,cy,cz,l,w,h,yaw`; '#' lines and blank lines skipped.
std::vector<Box> load_boxes(const std::filesystem::path& path);
void save_boxes(const std::vector<Box>& boxes, const std::filesystem::path& path);

// Keeps only points inside at least one box. Instance = enclosing box index;
// points inside two or more boxes become instance -1 and all their boxes are
// flagged as overlapping. Every box index gets a class entry so boxes that
// end up with zero points are still known to the evaluation.
std::pair<PointCloud, GroundTruth> crop_and_label(const PointCloud& cloud,
                                                  const std::vector<Box>& boxes);

// Label file: one non-negative integer segment id per point per line.
// save_labels writes canonical ids (segments ordered by smallest member).
Segmentation load_labels(const std::filesystem::path& path);
void save_labels(const Segmentation& seg, std::size_t universe_size,
                 const std::filesystem::path& path);

GroundTruth load_ground_truth(const std::filesystem::path& path);
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);

// Forest JSON: nested node records carrying node_id and epsilon_level, point
// indices stored at leaves only. Loading rebuilds interior point sets and
// revalidates every structural invariant.
Forest load_forest(const std::filesystem::path& path);
void save_forest(const Forest& forest, const std::filesystem::path& path);

// Segment confidences: one decimal in [0,1] per line, parallel to the
// canonical segment order of a label file.
std::vector<double> load_scores(const std::filesystem::path& path);
void save_scores(const std::vector<double>& scores, const std::filesystem::path& path);

// Writes via a temp file in the same directory plus rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace treecut
