#pragma once

// Detection evaluation: IoU, per-class average precision, mAP, and the
// temporal confidence smoothing applied to video streams.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wclust/error.hpp"

namespace wclust::det {

struct BBox {
    double x_min = 0;
    double y_min = 0;
    double x_max = 0;
    double y_max = 0;

    double area() const { return (x_max - x_min) * (y_max - y_min); }
    bool operator==(const BBox&) const = default;
};

struct Detection {
    BBox bbox;
    int class_id = 0;
    double confidence = 1.0;
    std::string image_id;
};

struct GroundTruth {
    BBox bbox;
    int class_id = 0;
    std::string image_id;
};

inline double iou(const BBox& a, const BBox& b) {
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    const double inter = iw > 0 && ih > 0 ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

enum class Interpolation { all_point, eleven_point };

struct EvalOptions {
    double iou_threshold = 0.5;
    /// Detections below this confidence are dropped before matching.
    std::optional<double> min_confidence;
    Interpolation interpolation = Interpolation::all_point;
};

struct ApResult {
    double ap = 0;
    bool defined = true;  // false when the class has no ground truth
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t ground_truths = 0;
};

/// Area under the precision envelope of a precision/recall sequence.
inline double interpolated_area(const std::vector<double>& recall, const std::vector<double>& precision,
                                Interpolation mode) {
    if (mode == Interpolation::eleven_point) {
        double sum = 0;
        for (int t = 0; t <= 10; ++t) {
            const double r = t / 10.0;
            double p = 0;
            for (std::size_t i = 0; i < recall.size(); ++i)
                if (recall[i] >= r) p = std::max(p, precision[i]);
            sum += p;
        }
        return sum / 11.0;
    }
    std::vector<double> mrec{0.0}, mpre{0.0};
    mrec.insert(mrec.end(), recall.begin(), recall.end());
    mpre.insert(mpre.end(), precision.begin(), precision.end());
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
    double area = 0;
    for (std::size_t i = 1; i < mrec.size(); ++i) area += (mrec[i] - mrec[i - 1]) * mpre[i];
    return area;
}

/// AP of one class. Detections are ranked by descending confidence (stable
/// for ties); each is matched to the highest-IoU unmatched ground truth of
/// its class in its image when that IoU reaches the threshold.
inline ApResult average_precision(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                                  int class_id, const EvalOptions& opts = {}) {
    std::map<std::string, std::vector<std::size_t>> gt_by_image;
    ApResult r;
    for (std::size_t i = 0; i < gts.size(); ++i)
        if (gts[i].class_id == class_id) {
            gt_by_image[gts[i].image_id].push_back(i);
            ++r.ground_truths;
        }

    std::vector<const Detection*> ranked;
    for (const auto& d : dets)
        if (d.class_id == class_id && (!opts.min_confidence || d.confidence >= *opts.min_confidence))
            ranked.push_back(&d);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Detection* a, const Detection* b) { return a->confidence > b->confidence; });

    if (r.ground_truths == 0) {
        r.defined = false;
        r.false_positives = ranked.size();
        return r;
    }

    std::vector<bool> matched(gts.size(), false);
    std::vector<double> recall, precision;
    for (const auto* d : ranked) {
        double best = -1;
        std::size_t best_gt = 0;
        if (auto it = gt_by_image.find(d->image_id); it != gt_by_image.end()) {
            for (std::size_t g : it->second) {
                if (matched[g]) continue;
                const double o = iou(d->bbox, gts[g].bbox);
                if (o > best) {
                    best = o;
                    best_gt = g;
                }
            }
        }
        if (best >= opts.iou_threshold) {
            matched[best_gt] = true;
            ++r.true_positives;
        } else {
            ++r.false_positives;
        }
        recall.push_back(static_cast<double>(r.true_positives) / static_cast<double>(r.ground_truths));
        precision.push_back(static_cast<double>(r.true_positives) /
                            static_cast<double>(r.true_positives + r.false_positives));
    }
    r.ap = interpolated_area(recall, precision, opts.interpolation);
    return r;
}

struct MapResult {
    double map = 0;
    std::map<int, ApResult> per_class;
};

/// Unweighted mean of per-class AP over the classes of `classes` that have
/// ground truth. An empty `classes` means every class present in `gts`.
inline MapResult mean_ap(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts,
                         const std::vector<int>& classes = {}, const EvalOptions& opts = {}) {
    std::set<int> wanted(classes.begin(), classes.end());
    std::set<int> present;
    for (const auto& g : gts)
        if (wanted.empty() || wanted.count(g.class_id)) present.insert(g.class_id);
    if (present.empty()) throw ArgumentError("mAP over an empty class set");

    MapResult r;
    double sum = 0;
    for (int c : present) {
        r.per_class[c] = average_precision(dets, gts, c, opts);
        sum += r.per_class[c].ap;
    }
    r.map = sum / static_cast<double>(present.size());
    return r;
}

/// COCO ids (0-based, as in the 80-class YOLO label order) grouped as the
/// person + vehicle reporting unit: person, bicycle, car, motorbike, bus, train, truck.
inline std::vector<int> person_and_vehicle_classes() { return {0, 1, 2, 3, 5, 6, 7}; }

/// Element-wise mean over the current and up to `window - 1` previous frames.
inline std::vector<std::vector<double>> smooth_confidences(const std::vector<std::vector<double>>& frames,
                                                           std::size_t window = 3) {
    if (window < 1) throw ArgumentError("smoothing window must be at least 1");
    std::vector<std::vector<double>> out;
    out.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t].size() != frames.front().size())
            throw ShapeError("frame " + std::to_string(t) + " differs in shape from frame 0");
        const std::size_t first = t + 1 >= window ? t + 1 - window : 0;
        std::vector<double> avg(frames[t].size(), 0.0);
        for (std::size_t s = first; s <= t; ++s)
            for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += frames[s][i];
        const double n = static_cast<double>(t - first + 1);
        for (auto& v : avg) v /= n;
        out.push_back(std::move(avg));
    }
    return out;
}

namespace detail {

inline std::vector<std::vector<std::string>> split_records(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::vector<std::string> row;
        for (std::string f; fields >> f;) row.push_back(f);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

inline double to_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("expected a number, got '" + s + "'", line);
}

}  // namespace detail

/// `image_id class_id x_min y_min x_max y_max` per line.
inline std::vector<GroundTruth> parse_ground_truth(std::string_view text) {
    std::vector<GroundTruth> out;
    std::size_t line = 0;
    for (const auto& f : detail::split_records(text)) {
        ++line;
        if (f.size() != 6) throw ConfigError("ground truth needs 6 fields", line);
        BBox b{detail::to_double(f[2], line), detail::to_double(f[3], line), detail::to_double(f[4], line),
               detail::to_double(f[5], line)};
        if (b.x_max < b.x_min || b.y_max < b.y_min) throw ConfigError("inverted box", line);
        out.push_back({b, static_cast<int>(detail::to_double(f[1], line)), f[0]});
    }
    return out;
}

/// `image_id class_id x_min y_min x_max y_max confidence` per line.
inline std::vector<Detection> parse_detections(std::string_view text) {
    std::vector<Detection> out;
    std::size_t line = 0;
    for (const auto& f : detail::split_records(text)) {
        ++line;
        if (f.size() != 7) throw ConfigError("detection needs 7 fields", line);
        BBox b{detail::to_double(f[2], line), detail::to_double(f[3], line), detail::to_double(f[4], line),
               detail::to_double(f[5], line)};
        if (b.x_max < b.x_min || b.y_max < b.y_min) throw ConfigError("inverted box", line);
        const double conf = detail::to_double(f[6], line);
        if (conf < 0 || conf > 1) throw ConfigError("confidence outside [0, 1]", line);
        out.push_back({b, static_cast<int>(detail::to_double(f[1], line)), conf, f[0]});
    }
    return out;
}

}  // namespace wclust::det
