#pragma once
// Clustering-assisted inference: the cluster-posterior temporal score P^T,
// the fused localization track P^M, class selection, multi-threshold run
// extraction, OIC scoring, and per-class NMS.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wtal/errors.hpp"
#include "wtal/mat.hpp"
#include "wtal/network.hpp"
#include "wtal/pseudo_labels.hpp"

namespace wtal::infer {

struct Proposal {
    std::string video_id;
    int class_index = 0;
    double start_sec = 0.0;
    double end_sec = 0.0;
    double score = 0.0;
};

struct InferenceConfig {
    double video_class_threshold = 0.2;
    std::vector<double> thresholds;  // empty -> 0.1:0.05:0.9
    double nms_tiou = 0.5;
    double oic_inflation = 0.25;
    double omega = 0.25;  // calibration weight, shared with training

    std::vector<double> threshold_list() const {
        if (!thresholds.empty()) return thresholds;
        std::vector<double> t;
        for (int i = 2; i <= 18; ++i) t.push_back(i * 0.05);
        return t;
    }

    void validate() const {
        require(video_class_threshold >= 0.0 && video_class_threshold <= 1.0,
                "inference: video_class_threshold must be in [0,1]");
        require(nms_tiou > 0.0 && nms_tiou <= 1.0, "inference: nms_tiou must be in (0,1]");
        require(oic_inflation >= 0.0, "inference: oic_inflation must be >= 0");
        require(omega >= 0.0 && omega <= 1.0, "inference: omega must be in [0,1]");
        const auto t = threshold_list();
        for (size_t i = 0; i < t.size(); ++i) {
            require(t[i] > 0.0 && t[i] < 1.0, "inference: thresholds must be in (0,1)");
            if (i) require(t[i] > t[i - 1], "inference: thresholds must be increasing");
        }
    }
};

// Temporal interval IoU over the real line.
inline double tiou(double s1, double e1, double s2, double e2) {
    const double inter = std::min(e1, e2) - std::max(s1, s2);
    if (inter <= 0.0) return 0.0;
    const double uni = (e1 - s1) + (e2 - s2) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// P^T by total probability over clusters: P^T_t = sum_k ps_tk * qcfg_k.
inline Vec transform_pt(const Mat& ps, const Vec& qc_fg) {
    require_shape(ps.cols == static_cast<int>(qc_fg.size()), "transform_pt: K mismatch");
    for (double v : qc_fg)
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("transform_pt: qc_fg must be in [0,1]");
    Vec pt(ps.rows);
    for (int t = 0; t < ps.rows; ++t) pt[t] = dot(ps.row(t), qc_fg.data(), ps.cols);
    return pt;
}

inline Vec fuse_pm(const Vec& pa, const Vec& pt) {
    require_shape(pa.size() == pt.size(), "fuse_pm: length mismatch");
    Vec pm(pa.size());
    for (size_t t = 0; t < pa.size(); ++t) pm[t] = 0.5 * (pa[t] + pt[t]);
    return pm;
}

// Outer-inner-contrastive score on inclusive snippet bounds [start, end]:
// inner mean minus the mean over a collar of ceil(inflation*len) snippets on
// each side (clipped, inner excluded); a fully-clipped collar scores 0.
inline double oic_score(const Vec& track, int start, int end, double inflation) {
    const int t = static_cast<int>(track.size());
    if (!(0 <= start && start <= end && end < t)) throw InputError("oic_score: invalid bounds");
    const int len = end - start + 1;
    const int w = static_cast<int>(std::ceil(inflation * len));
    double inner = 0.0;
    for (int i = start; i <= end; ++i) inner += track[i];
    inner /= len;
    double outer = 0.0;
    int n_outer = 0;
    for (int i = std::max(0, start - w); i < start; ++i, ++n_outer) outer += track[i];
    for (int i = end + 1; i <= std::min(t - 1, end + w); ++i, ++n_outer) outer += track[i];
    return inner - (n_outer > 0 ? outer / n_outer : 0.0);
}

struct Run {
    int first = 0, last = 0;  // inclusive snippet indices
};

// Maximal runs where pm_t >= threshold.
inline std::vector<Run> extract_runs(const Vec& pm, double threshold) {
    std::vector<Run> runs;
    int first = -1;
    for (int i = 0; i < static_cast<int>(pm.size()); ++i) {
        if (pm[i] >= threshold) {
            if (first < 0) first = i;
        } else if (first >= 0) {
            runs.push_back({first, i - 1});
            first = -1;
        }
    }
    if (first >= 0) runs.push_back({first, static_cast<int>(pm.size()) - 1});
    return runs;
}

// Greedy NMS over single-class proposals: score descending (ties by earlier
// start), keep iff tIoU with every kept proposal is below the threshold.
inline std::vector<Proposal> nms(std::vector<Proposal> props, double tiou_threshold) {
    std::stable_sort(props.begin(), props.end(), [](const Proposal& a, const Proposal& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.start_sec < b.start_sec;
    });
    std::vector<Proposal> kept;
    for (const auto& p : props) {
        bool ok = true;
        for (const auto& q : kept) {
            if (tiou(p.start_sec, p.end_sec, q.start_sec, q.end_sec) >= tiou_threshold) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(p);
    }
    return kept;
}

// Video-level class scores in the training form, on stream-averaged tracks:
// calibrate, top-k pool (k = max(1, floor(T/8))), softmax.
inline Vec video_scores(const Mat& pv_avg, const Vec& pa_avg, double omega) {
    const Mat calibrated = labels::calibrate_tcas(pv_avg, pa_avg, omega);
    const auto gamma = labels::topk_select(calibrated, std::max(1, pv_avg.rows / 8));
    return labels::video_score(pv_avg, gamma);
}

// Full per-video detection pipeline on precomputed two-stream activations.
inline std::vector<Proposal> detect(const net::BatchActivations& acts_rgb,
                                    const net::BatchActivations& acts_flow, const Vec& qc_fg,
                                    const InferenceConfig& cfg, const std::string& video_id,
                                    double snippet_seconds) {
    cfg.validate();
    require(snippet_seconds > 0.0, "detect: snippet_seconds must be positive");
    const int t = acts_rgb.pv.rows, g = acts_rgb.pv.cols;
    require_shape(acts_flow.pv.rows == t && acts_flow.pv.cols == g, "detect: stream mismatch");

    // 1. stream-averaged tracks
    const Mat pv = labels::fuse_streams(acts_rgb.pv, acts_flow.pv);
    const Vec pa = labels::fuse_streams(acts_rgb.pa, acts_flow.pa);
    const Mat ps = labels::fuse_streams(acts_rgb.ps, acts_flow.ps);

    // 2. clustering-assisted foreground track
    const Vec pt = transform_pt(ps, qc_fg);
    const Vec pm = fuse_pm(pa, pt);

    // 3. class selection on video scores
    const Vec pbar = video_scores(pv, pa, cfg.omega);
    std::vector<int> selected;
    for (int c = 0; c < g; ++c)
        if (pbar[c] >= cfg.video_class_threshold) selected.push_back(c);
    if (selected.empty()) return {};

    // 4. candidate runs pooled over the threshold list (dedup exact repeats)
    std::set<std::pair<int, int>> seen;
    std::vector<Run> runs;
    for (double thr : cfg.threshold_list())
        for (const Run& r : extract_runs(pm, thr))
            if (seen.insert({r.first, r.last}).second) runs.push_back(r);

    // 5-7. OIC scoring on the calibrated class track, per-class NMS, seconds
    std::vector<Proposal> all;
    for (int c : selected) {
        Vec track(t);
        for (int i = 0; i < t; ++i) track[i] = cfg.omega * pv.at(i, c) + (1.0 - cfg.omega) * pm[i];
        std::vector<Proposal> props;
        for (const Run& r : runs) {
            Proposal p;
            p.video_id = video_id;
            p.class_index = c;
            p.start_sec = r.first * snippet_seconds;
            p.end_sec = (r.last + 1) * snippet_seconds;
            p.score = oic_score(track, r.first, r.last, cfg.oic_inflation);
            props.push_back(std::move(p));
        }
        auto kept = nms(std::move(props), cfg.nms_tiou);
        all.insert(all.end(), kept.begin(), kept.end());
    }
    return all;
}

}  // namespace wtal::infer
