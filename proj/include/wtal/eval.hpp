#pragma once
// Localization metrics: greedy score-order matching, per-class average
// precision (all-point interpolated by default, plain sum as a variant),
// and mAP tables over configurable tIoU grids.  Also detections-file IO.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wtal/dataset.hpp"
#include "wtal/errors.hpp"
#include "wtal/inference.hpp"
#include "wtal/mat.hpp"

namespace wtal::eval {

using infer::Proposal;
using infer::tiou;

enum class ApVariant { interpolated, plain };

struct GtInstance {
    std::string video_id;
    double start_sec = 0.0;
    double end_sec = 0.0;
};

// AP for one class.  Detections are sorted by score descending (ties by
// earlier start, then video id); each matches the unmatched same-video GT of
// highest tIoU when that tIoU clears the threshold.
inline double average_precision(std::vector<Proposal> dets, const std::vector<GtInstance>& gts,
                                double tiou_threshold, ApVariant variant = ApVariant::interpolated,
                                std::vector<std::string>* warnings = nullptr,
                                const std::string& class_label = "") {
    if (gts.empty()) {
        if (warnings)
            warnings->push_back("class '" + class_label + "': no ground truth; AP := 0");
        return 0.0;
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Proposal& a, const Proposal& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.start_sec != b.start_sec) return a.start_sec < b.start_sec;
        return a.video_id < b.video_id;
    });

    std::map<std::string, std::vector<int>> by_video;
    for (int i = 0; i < static_cast<int>(gts.size()); ++i)
        by_video[gts[i].video_id].push_back(i);
    std::vector<char> matched(gts.size(), 0);

    const int n = static_cast<int>(dets.size());
    std::vector<char> tp(n, 0);
    for (int i = 0; i < n; ++i) {
        const auto it = by_video.find(dets[i].video_id);
        if (it == by_video.end()) continue;
        int best = -1;
        double best_t = 0.0;
        for (int gi : it->second) {
            if (matched[gi]) continue;
            const double t = tiou(dets[i].start_sec, dets[i].end_sec, gts[gi].start_sec,
                                  gts[gi].end_sec);
            if (t > best_t) {
                best_t = t;
                best = gi;
            }
        }
        if (best >= 0 && best_t >= tiou_threshold) {
            matched[best] = 1;
            tp[i] = 1;
        }
    }

    Vec precision(n);
    int cum_tp = 0;
    for (int i = 0; i < n; ++i) {
        cum_tp += tp[i];
        precision[i] = static_cast<double>(cum_tp) / (i + 1);
    }
    if (variant == ApVariant::interpolated) {
        double running = 0.0;
        for (int i = n - 1; i >= 0; --i) {
            running = std::max(running, precision[i]);
            precision[i] = running;
        }
    }
    double ap = 0.0;
    for (int i = 0; i < n; ++i)
        if (tp[i]) ap += precision[i];
    return ap / static_cast<double>(gts.size());
}

// ---------------------------------------------------------------------------
// mAP report
// ---------------------------------------------------------------------------

struct MapReport {
    std::vector<double> tious;
    std::vector<std::string> class_names;
    Mat ap;   // classes x tious
    Vec map;  // per tiou
    std::vector<std::pair<std::string, double>> averages;
    std::vector<std::string> warnings;
};

inline std::vector<double> grid_thumos() {
    std::vector<double> g;
    for (int i = 1; i <= 7; ++i) g.push_back(i * 0.1);
    return g;
}

inline std::vector<double> grid_anet() {
    std::vector<double> g;
    for (int i = 10; i <= 19; ++i) g.push_back(i * 0.05);
    return g;
}

inline std::string class_display_name(const data::Manifest& man, int c) {
    if (c >= 0 && c < static_cast<int>(man.class_names.size())) return man.class_names[c];
    return "class_" + std::to_string(c);
}

inline MapReport map_report(const std::vector<Proposal>& dets, const data::Manifest& gt,
                            const std::vector<double>& grid,
                            ApVariant variant = ApVariant::interpolated,
                            const std::vector<std::pair<double, double>>& avg_ranges = {}) {
    require(!grid.empty(), "map_report: empty tIoU grid");
    for (size_t i = 0; i < grid.size(); ++i) {
        require(grid[i] > 0.0 && grid[i] <= 1.0, "map_report: tIoU must be in (0,1]");
        if (i) require(grid[i] > grid[i - 1], "map_report: grid must be increasing");
    }
    const int g = gt.num_classes;
    std::vector<std::vector<GtInstance>> gt_by_class(g);
    for (const auto& v : gt.videos)
        for (const auto& s : v.segments)
            gt_by_class[s.class_index].push_back({v.id, s.start_sec, s.end_sec});
    std::vector<std::vector<Proposal>> det_by_class(g);
    for (const auto& p : dets) {
        require(p.class_index >= 0 && p.class_index < g, "map_report: class index out of range");
        det_by_class[p.class_index].push_back(p);
    }

    MapReport r;
    r.tious = grid;
    r.ap = Mat(g, static_cast<int>(grid.size()));
    for (int c = 0; c < g; ++c) {
        r.class_names.push_back(class_display_name(gt, c));
        for (size_t j = 0; j < grid.size(); ++j)
            r.ap.at(c, static_cast<int>(j)) =
                average_precision(det_by_class[c], gt_by_class[c], grid[j], variant, &r.warnings,
                                  r.class_names.back());
    }
    r.map.assign(grid.size(), 0.0);
    for (size_t j = 0; j < grid.size(); ++j) {
        double s = 0.0;
        for (int c = 0; c < g; ++c) s += r.ap.at(c, static_cast<int>(j));
        r.map[j] = s / g;
    }
    for (const auto& [lo, hi] : avg_ranges) {
        double s = 0.0;
        int n = 0;
        for (size_t j = 0; j < grid.size(); ++j)
            if (grid[j] >= lo - 1e-9 && grid[j] <= hi + 1e-9) {
                s += r.map[j];
                ++n;
            }
        char name[64];
        std::snprintf(name, sizeof(name), "avg_map_%.2f_%.2f", lo, hi);
        r.averages.emplace_back(name, n > 0 ? s / n : 0.0);
    }
    return r;
}

inline nlohmann::json report_json(const MapReport& r) {
    nlohmann::json j;
    j["tious"] = r.tious;
    j["map"] = r.map;
    nlohmann::json per_class = nlohmann::json::object();
    for (size_t c = 0; c < r.class_names.size(); ++c) {
        std::vector<double> row(r.ap.row(static_cast<int>(c)),
                                r.ap.row(static_cast<int>(c)) + r.ap.cols);
        per_class[r.class_names[c]] = row;
    }
    j["per_class_ap"] = per_class;
    for (const auto& [name, v] : r.averages) j[name] = v;
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    return j;
}

inline void write_report_json(const std::string& path, const MapReport& r) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path);
    out << report_json(r).dump(2) << '\n';
    if (!out) throw IoError("report write failure: " + path);
}

// Flat CSV: threshold,class,AP
inline void write_report_csv(const std::string& path, const MapReport& r) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write csv: " + path);
    out << "threshold,class,AP\n";
    for (size_t j = 0; j < r.tious.size(); ++j)
        for (size_t c = 0; c < r.class_names.size(); ++c)
            out << r.tious[j] << ',' << r.class_names[c] << ','
                << r.ap.at(static_cast<int>(c), static_cast<int>(j)) << '\n';
    if (!out) throw IoError("csv write failure: " + path);
}

// ---------------------------------------------------------------------------
// Detections file: {"results": {"<video>": [{"label","segment","score"}]}}
// ---------------------------------------------------------------------------

inline void save_detections(const std::string& path, const std::vector<Proposal>& props,
                            const data::Manifest& man) {
    nlohmann::json results = nlohmann::json::object();
    for (const auto& p : props) {
        nlohmann::json d;
        d["label"] = class_display_name(man, p.class_index);
        d["segment"] = {p.start_sec, p.end_sec};
        d["score"] = p.score;
        results[p.video_id].push_back(std::move(d));
    }
    nlohmann::json j;
    j["results"] = std::move(results);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write detections: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("detections write failure: " + path);
}

inline std::vector<Proposal> load_detections(const std::string& path, const data::Manifest& man) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open detections: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("detections parse failure (" + path + "): " + e.what());
    }
    std::map<std::string, int> name_to_idx;
    for (int c = 0; c < man.num_classes; ++c) name_to_idx[class_display_name(man, c)] = c;
    std::vector<Proposal> props;
    try {
        for (const auto& [vid, dets] : j.at("results").items()) {
            for (const auto& d : dets) {
                Proposal p;
                p.video_id = vid;
                const std::string label = d.at("label").get<std::string>();
                const auto it = name_to_idx.find(label);
                if (it == name_to_idx.end())
                    throw InputError("detections: unknown label '" + label + "'");
                p.class_index = it->second;
                p.start_sec = d.at("segment").at(0).get<double>();
                p.end_sec = d.at("segment").at(1).get<double>();
                p.score = d.at("score").get<double>();
                if (!(p.start_sec < p.end_sec))
                    throw InputError("detections: bad segment in video '" + vid + "'");
                props.push_back(std::move(p));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError("detections schema violation (" + path + "): " + e.what());
    }
    return props;
}

}  // namespace wtal::eval
