#include "treecut/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "treecut/errors.hpp"

namespace treecut {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(fmt::format("cannot open {}", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

float f32_from_le(const unsigned char* b) {
    const std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                            (static_cast<std::uint32_t>(b[1]) << 8) |
                            (static_cast<std::uint32_t>(b[2]) << 16) |
                            (static_cast<std::uint32_t>(b[3]) << 24);
    return std::bit_cast<float>(u);
}

void f32_to_le(float v, std::string& out) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    out.push_back(static_cast<char>(u & 0xffu));
    out.push_back(static_cast<char>((u >> 8) & 0xffu));
    out.push_back(static_cast<char>((u >> 16) & 0xffu));
    out.push_back(static_cast<char>((u >> 24) & 0xffu));
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += fmt::format(".tmp.{}", ::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error(fmt::format("cannot write {}", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw io_error(fmt::format("short write to {}", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(),
                                       ec.message()));
}

PointCloud load_points(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() % 16 != 0)
        throw format_error(fmt::format("{}: size {} is not a multiple of 16", path.string(),
                                       bytes.size()));
    PointCloud cloud;
    cloud.frame_id = path.stem().string();
    cloud.has_intensity = true;
    cloud.points.resize(bytes.size() / 16);
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < cloud.points.size(); ++i, b += 16) {
        const float x = f32_from_le(b);
        const float y = f32_from_le(b + 4);
        const float z = f32_from_le(b + 8);
        const float intensity = f32_from_le(b + 12);
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) ||
            !std::isfinite(intensity))
            throw format_error(fmt::format("{}: record {} has a non-finite value", path.string(), i));
        cloud.points[i] = Point{x, y, z, intensity};
    }
    return cloud;
}

void save_points(const PointCloud& cloud, const std::filesystem::path& path) {
    std::string bytes;
    bytes.reserve(cloud.size() * 16);
    for (const Point& p : cloud.points) {
        f32_to_le(static_cast<float>(p.x), bytes);
        f32_to_le(static_cast<float>(p.y), bytes);
        f32_to_le(static_cast<float>(p.z), bytes);
        f32_to_le(p.intensity, bytes);
    }
    write_file_atomic(path, bytes);
}

std::vector<Box> load_boxes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(fmt::format("cannot open {}", path.string()));
    std::vector<Box> boxes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 8)
            throw format_error(fmt::format("{}:{}: expected 8 fields, got {}", path.string(),
                                           lineno, fields.size()));
        Box box;
        box.label = fields[0];
        double* const slots[7] = {&box.cx, &box.cy, &box.cz, &box.length,
                                  &box.width, &box.height, &box.yaw};
        for (int f = 0; f < 7; ++f) {
            try {
                std::size_t used = 0;
                *slots[f] = std::stod(fields[f + 1], &used);
                if (used != fields[f + 1].size()) throw std::invalid_argument("trailing junk");
            } catch (const std::exception&) {
                throw format_error(fmt::format("{}:{}: field {} is not a number", path.string(),
                                               lineno, f + 2));
            }
        }
        boxes.push_back(std::move(box));
    }
    return boxes;
}

void save_boxes(const std::vector<Box>& boxes, const std::filesystem::path& path) {
    std::string out;
    for (const Box& b : boxes)
        out += fmt::format("{},{},{},{},{},{},{},{}\n", b.label, b.cx, b.cy, b.cz, b.length,
                           b.width, b.height, b.yaw);
    write_file_atomic(path, out);
}

std::pair<PointCloud, GroundTruth> crop_and_label(const PointCloud& cloud,
                                                  const std::vector<Box>& boxes) {
    PointCloud fg;
    fg.frame_id = cloud.frame_id;
    fg.has_intensity = cloud.has_intensity;
    GroundTruth gt;
    std::vector<bool> overlap_flag(boxes.size(), false);
    for (const Point& p : cloud.points) {
        std::int32_t first = -1;
        int hits = 0;
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            if (box_contains(boxes[b], p)) {
                ++hits;
                if (hits == 1) {
                    first = static_cast<std::int32_t>(b);
                } else {
                    overlap_flag[static_cast<std::size_t>(first)] = true;
                    overlap_flag[b] = true;
                }
            }
        }
        if (hits == 0) continue;
        fg.points.push_back(p);
        gt.instance_id.push_back(hits == 1 ? first : -1);
    }
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        gt.class_of_instance[static_cast<std::int32_t>(b)] = boxes[b].label;
        if (overlap_flag[b]) gt.overlapping_instances.push_back(static_cast<std::int32_t>(b));
    }
    gt.boxes = boxes;
    return {std::move(fg), std::move(gt)};
}

Segmentation load_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(fmt::format("cannot open {}", path.string()));
    std::map<long, std::vector<std::uint32_t>> groups;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            throw format_error(
                fmt::format("{}:{}: blank line in a one-label-per-point file", path.string(),
                            lineno));
        long id = 0;
        try {
            std::size_t used = 0;
            id = std::stol(line, &used);
            if (used != line.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw format_error(fmt::format("{}:{}: not an integer", path.string(), lineno));
        }
        if (id < 0)
            throw format_error(
                fmt::format("{}:{}: negative segment id {} is not allowed in predictions",
                            path.string(), lineno, id));
        groups[id].push_back(static_cast<std::uint32_t>(lineno - 1));
    }
    Segmentation seg;
    for (auto& [id, indices] : groups) seg.segments.emplace_back(std::move(indices));
    canonicalize(seg);
    return seg;
}

void save_labels(const Segmentation& seg, std::size_t universe_size,
                 const std::filesystem::path& path) {
    Segmentation canon = seg;
    canonicalize(canon);
    std::vector<long> label_of(universe_size, -1);
    for (std::size_t k = 0; k < canon.segments.size(); ++k) {
        for (std::uint32_t idx : canon.segments[k].indices) {
            if (idx >= universe_size)
                throw invalid_input_error(
                    fmt::format("segment index {} outside universe of size {}", idx, universe_size));
            label_of[idx] = static_cast<long>(k);
        }
    }
    for (std::size_t i = 0; i < universe_size; ++i) {
        if (label_of[i] < 0)
            throw invalid_input_error(fmt::format("point {} has no segment", i));
    }
    std::string out;
    for (std::size_t i = 0; i < universe_size; ++i) out += fmt::format("{}\n", label_of[i]);
    write_file_atomic(path, out);
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw format_error(fmt::format("{}: {}", path.string(), e.what()));
    }
    try {
        GroundTruth gt;
        gt.instance_id = j.at("instance_id").get<std::vector<std::int32_t>>();
        for (const auto& [key, value] : j.at("classes").items())
            gt.class_of_instance[std::stoi(key)] = value.get<std::string>();
        if (j.contains("boxes")) {
            for (const auto& bj : j.at("boxes")) {
                Box b;
                b.label = bj.at("label").get<std::string>();
                b.cx = bj.at("cx").get<double>();
                b.cy = bj.at("cy").get<double>();
                b.cz = bj.at("cz").get<double>();
                b.length = bj.at("length").get<double>();
                b.width = bj.at("width").get<double>();
                b.height = bj.at("height").get<double>();
                b.yaw = bj.at("yaw").get<double>();
                gt.boxes.push_back(std::move(b));
            }
        }
        if (j.contains("overlapping"))
            gt.overlapping_instances = j.at("overlapping").get<std::vector<std::int32_t>>();
        std::sort(gt.overlapping_instances.begin(), gt.overlapping_instances.end());
        if (auto violation = validate_ground_truth(gt))
            throw format_error(fmt::format("{}: {}", path.string(), *violation));
        return gt;
    } catch (const json::exception& e) {
        throw format_error(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
    json j;
    j["format"] = "treecut-gt-v1";
    j["instance_id"] = gt.instance_id;
    json classes = json::object();
    for (const auto& [id, cls] : gt.class_of_instance) classes[fmt::format("{}", id)] = cls;
    j["classes"] = classes;
    if (!gt.boxes.empty()) {
        json boxes = json::array();
        for (const Box& b : gt.boxes) {
            boxes.push_back({{"label", b.label},
                             {"cx", b.cx},
                             {"cy", b.cy},
                             {"cz", b.cz},
                             {"length", b.length},
                             {"width", b.width},
                             {"height", b.height},
                             {"yaw", b.yaw}});
        }
        j["boxes"] = boxes;
    }
    if (!gt.overlapping_instances.empty()) j["overlapping"] = gt.overlapping_instances;
    write_file_atomic(path, j.dump(2) + "\n");
}

namespace {

json node_to_json(const TreeNode& node) {
    json j;
    j["node_id"] = node.id;
    j["epsilon_level"] = node.epsilon_level;
    if (node.is_leaf()) {
        j["points"] = node.points.indices;
    } else {
        json children = json::array();
        for (const auto& c : node.children) children.push_back(node_to_json(c));
        j["children"] = children;
    }
    return j;
}

TreeNode node_from_json(const json& j, const std::vector<double>& schedule, std::size_t depth,
                        const std::string& id, const std::string& where) {
    if (depth >= schedule.size())
        throw format_error(fmt::format("{}: node {} deeper than the schedule", where, id));
    TreeNode node;
    node.id = id;
    node.epsilon_level = schedule[depth];
    if (j.contains("children")) {
        const auto& children = j.at("children");
        if (children.empty())
            throw format_error(fmt::format("{}: node {} has an empty child list", where, id));
        std::size_t ordinal = 0;
        std::vector<const PointIndexSet*> parts;
        for (const auto& cj : children) {
            node.children.push_back(
                node_from_json(cj, schedule, depth + 1, fmt::format("{}.{}", id, ordinal), where));
            ++ordinal;
        }
        std::size_t total = 0;
        for (const auto& c : node.children) {
            parts.push_back(&c.points);
            total += c.points.size();
        }
        node.points = merge_disjoint(parts);
        if (node.points.size() != total)
            throw format_error(
                fmt::format("{}: children of {} share point indices", where, id));
        for (std::size_t c = 1; c < node.children.size(); ++c) {
            if (node.children[c].points.front() < node.children[c - 1].points.front())
                throw format_error(fmt::format(
                    "{}: children of {} are not ordered by smallest member", where, id));
        }
    } else {
        if (depth + 1 != schedule.size())
            throw format_error(
                fmt::format("{}: leaf {} is not at the finest schedule level", where, id));
        auto indices = j.at("points").get<std::vector<std::uint32_t>>();
        if (indices.empty())
            throw format_error(fmt::format("{}: leaf {} has no points", where, id));
        if (!strictly_increasing(indices))
            throw format_error(
                fmt::format("{}: leaf {} points are not strictly increasing", where, id));
        node.points = PointIndexSet(std::move(indices));
    }
    return node;
}

}  // namespace

Forest load_forest(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw format_error(fmt::format("{}: {}", path.string(), e.what()));
    }
    try {
        Forest forest;
        forest.cloud_size = j.at("cloud_size").get<std::size_t>();
        forest.epsilon_schedule = j.at("epsilon_schedule").get<std::vector<double>>();
        if (forest.epsilon_schedule.empty())
            throw format_error(fmt::format("{}: empty epsilon schedule", path.string()));
        for (std::size_t i = 1; i < forest.epsilon_schedule.size(); ++i) {
            if (forest.epsilon_schedule[i] >= forest.epsilon_schedule[i - 1])
                throw format_error(
                    fmt::format("{}: schedule is not strictly decreasing", path.string()));
        }
        std::size_t t = 0;
        for (const auto& tj : j.at("trees")) {
            forest.trees.push_back(node_from_json(tj, forest.epsilon_schedule, 0,
                                                  fmt::format("t{}", t), path.string()));
            ++t;
        }
        Segmentation roots;
        for (const auto& tree : forest.trees) roots.segments.push_back(tree.points);
        if (!forest.trees.empty() || forest.cloud_size != 0) {
            if (auto violation = validate_segmentation(roots, forest.cloud_size))
                throw format_error(fmt::format("{}: tree roots do not partition the cloud: {}",
                                               path.string(), *violation));
        }
        return forest;
    } catch (const json::exception& e) {
        throw format_error(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
    json j;
    j["format"] = "treecut-forest-v1";
    j["cloud_size"] = forest.cloud_size;
    j["epsilon_schedule"] = forest.epsilon_schedule;
    json trees = json::array();
    for (const auto& t : forest.trees) trees.push_back(node_to_json(t));
    j["trees"] = trees;
    write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<double> load_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error(fmt::format("cannot open {}", path.string()));
    std::vector<double> scores;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            throw format_error(
                fmt::format("{}:{}: blank line in a one-score-per-segment file", path.string(),
                            lineno));
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(line, &used);
            if (used != line.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw format_error(fmt::format("{}:{}: not a number", path.string(), lineno));
        }
        if (!(v >= 0.0 && v <= 1.0))
            throw format_error(fmt::format("{}:{}: score {} outside [0,1]", path.string(), lineno, v));
        scores.push_back(v);
    }
    return scores;
}

void save_scores(const std::vector<double>& scores, const std::filesystem::path& path) {
    std::string out;
    for (double v : scores) out += fmt::format("{}\n", v);
    write_file_atomic(path, out);
}

}  // namespace treecut
