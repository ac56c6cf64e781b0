#pragma once

// Pseudo-label construction: top-k MIL selection, attention targets Q^A,
// ranked Gaussian prior, prototypes, cluster F&B probabilities, and the two
// transport-labeling entry points (snippet clusters Q^S, cluster F&B Q^C).
// Streams are co-labeled: callers fuse the two streams' predictions 0.5/0.5
// and every derived label is shared by both streams as a constant target.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "wtal/errors.hpp"
#include "wtal/mat.hpp"
#include "wtal/ot.hpp"

namespace wtal::labels {

using GammaSets = std::vector<std::vector<int>>;  // per-class snippet index sets

inline void validate_prob_range(const Vec& p, const char* what) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string(what) + ": entries must be in [0,1]");
}

// T-CAS calibration: omega * pv + (1 - omega) * pa, attention broadcast over
// classes. Suppresses context snippets before the top-k selection.
inline Mat calibrate_tcas(const Mat& pv, const Vec& pa, double omega) {
    require_shape(static_cast<int>(pa.size()) == pv.rows, "calibrate_tcas: pa length mismatch");
    require(omega >= 0.0 && omega <= 1.0, "calibrate_tcas: omega must be in [0,1]");
    validate_prob_range(pv.d, "calibrate_tcas: pv");
    validate_prob_range(pa, "calibrate_tcas: pa");
    Mat out(pv.rows, pv.cols);
    for (int r = 0; r < pv.rows; ++r)
        for (int c = 0; c < pv.cols; ++c)
            out.at(r, c) = omega * pv.at(r, c) + (1.0 - omega) * pa[r];
    return out;
}

// Per-class top-k snippet indices (largest calibrated scores; ties broken by
// the lower index). Returned sets are sorted ascending.
inline GammaSets topk_select(const Mat& pv_hat, int k) {
    require(k >= 1 && k <= pv_hat.rows, "topk_select: k must be in [1, T]");
    GammaSets gamma(pv_hat.cols);
    std::vector<int> order(pv_hat.rows);
    for (int c = 0; c < pv_hat.cols; ++c) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return pv_hat.at(a, c) > pv_hat.at(b, c);  // stable => lower index wins ties
        });
        gamma[c].assign(order.begin(), order.begin() + k);
        std::sort(gamma[c].begin(), gamma[c].end());
    }
    return gamma;
}

// Video-level class scores: softmax over classes of the mean (uncalibrated)
// class probability across each class's selected snippets.
inline Vec video_score(const Mat& pv, const GammaSets& gamma) {
    require_shape(static_cast<int>(gamma.size()) == pv.cols, "video_score: gamma size mismatch");
    Vec pooled(pv.cols, 0.0);
    for (int c = 0; c < pv.cols; ++c) {
        require(!gamma[c].empty(), "video_score: empty selection set");
        double s = 0.0;
        for (int idx : gamma[c]) {
            require(idx >= 0 && idx < pv.rows, "video_score: index out of range");
            s += pv.at(idx, c);
        }
        pooled[c] = s / static_cast<double>(gamma[c].size());
    }
    return softmax(std::move(pooled));
}

// Attention pseudo-labels: snippet t is foreground iff it was selected for
// at least one class the video is labeled with.
inline std::vector<int> make_qa(const GammaSets& gamma, const std::vector<int>& y, int t) {
    require_shape(gamma.size() == y.size(), "make_qa: gamma/y size mismatch");
    require(t >= 1, "make_qa: empty video");
    int positives = 0;
    for (int v : y) {
        require(v == 0 || v == 1, "make_qa: labels must be 0/1");
        positives += v;
    }
    require(positives >= 1, "make_qa: video has no positive labels");
    std::vector<int> qa(t, 0);
    for (size_t c = 0; c < y.size(); ++c) {
        if (y[c] == 0) continue;
        for (int idx : gamma[c]) {
            require(idx >= 0 && idx < t, "make_qa: index out of range");
            qa[idx] = 1;
        }
    }
    return qa;
}

// Ascending rank of the fused attention scores, 1-based; equal scores keep
// their original relative order (stable).
inline std::vector<int> rank_snippets(const Vec& pa_fused) {
    require(!pa_fused.empty(), "rank_snippets: empty input");
    require(all_finite(pa_fused), "rank_snippets: non-finite attention");
    std::vector<int> order(pa_fused.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pa_fused[a] < pa_fused[b]; });
    std::vector<int> rank(pa_fused.size());
    for (size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = static_cast<int>(pos) + 1;
    return rank;
}

// Gaussian prior linking a snippet's attention rank to each cluster's
// foreground probability: prior[n][k] = N(rank_n/N - qc_fg[k]; 0, sigma^2).
inline Mat gaussian_prior(const std::vector<int>& rank, const Vec& qc_fg, double sigma) {
    require(!rank.empty() && !qc_fg.empty(), "gaussian_prior: empty input");
    require(sigma > 0.0, "gaussian_prior: sigma must be positive");
    validate_prob_range(qc_fg, "gaussian_prior: qc_fg");
    const int n = static_cast<int>(rank.size()), k = static_cast<int>(qc_fg.size());
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    Mat prior(n, k);
    for (int r = 0; r < n; ++r) {
        require(rank[r] >= 1 && rank[r] <= n, "gaussian_prior: rank out of range");
        double pos = static_cast<double>(rank[r]) / n;
        for (int c = 0; c < k; ++c) {
            double d = pos - qc_fg[c];
            prior.at(r, c) = norm * std::exp(-d * d * inv2s2);
        }
    }
    return prior;
}

// Cluster-classification marginal: the attention pseudo-labels' foreground
// share and its complement.
inline Vec beta_ccc(const std::vector<int>& qa) {
    require(!qa.empty(), "beta_ccc: empty qa");
    double s = 0.0;
    for (int v : qa) {
        require(v == 0 || v == 1, "beta_ccc: qa must be 0/1");
        s += v;
    }
    double frac = s / static_cast<double>(qa.size());
    return Vec{frac, 1.0 - frac};
}

struct Prototypes {
    Mat cluster;  // K x H, soft-assignment-weighted mean embeddings
    Mat fb;       // 2 x H, foreground / background mean embeddings
};

// Weighted mean embeddings. Throws DegenerateError when any weight column
// has zero mass (empty cluster, or all/none of the snippets foreground);
// the trainer skips the cluster-classification term for that iteration.
inline Prototypes prototypes(const Mat& emb, const Mat& qs, const std::vector<int>& qa) {
    require_shape(qs.rows == emb.rows, "prototypes: qs/emb row mismatch");
    require_shape(static_cast<int>(qa.size()) == emb.rows, "prototypes: qa length mismatch");
    const int n = emb.rows, h = emb.cols, k = qs.cols;
    Prototypes p;
    p.cluster = Mat(k, h);
    Vec mass(k, 0.0);
    for (int r = 0; r < n; ++r) {
        const double* er = emb.row(r);
        const double* qr = qs.row(r);
        for (int c = 0; c < k; ++c) {
            double w = qr[c];
            if (w < 0.0) throw InputError("prototypes: negative assignment weight");
            if (w == 0.0) continue;
            mass[c] += w;
            double* pc = p.cluster.row(c);
            for (int j = 0; j < h; ++j) pc[j] += w * er[j];
        }
    }
    for (int c = 0; c < k; ++c) {
        if (mass[c] <= 0.0) throw DegenerateError("prototypes: cluster " + std::to_string(c) +
                                                  " has zero assignment mass");
        double* pc = p.cluster.row(c);
        for (int j = 0; j < h; ++j) pc[j] /= mass[c];
    }
    int n_pos = 0;
    for (int v : qa) n_pos += v;
    if (n_pos == 0 || n_pos == n)
        throw DegenerateError("prototypes: foreground/background prototype undefined (n_pos=" +
                              std::to_string(n_pos) + " of " + std::to_string(n) + ")");
    p.fb = Mat(2, h);
    for (int r = 0; r < n; ++r) {
        const double* er = emb.row(r);
        double* dst = p.fb.row(qa[r] == 1 ? 0 : 1);
        for (int j = 0; j < h; ++j) dst[j] += er[j];
    }
    for (int j = 0; j < h; ++j) {
        p.fb.at(0, j) /= static_cast<double>(n_pos);
        p.fb.at(1, j) /= static_cast<double>(n - n_pos);
    }
    return p;
}

// P^C: per-cluster softmax over {foreground, background} of the tempered
// cosine between cluster prototypes and the F&B prototypes.
inline Mat cluster_fb_probs(const Prototypes& p, double rho) {
    require(rho >= 0.0, "cluster_fb_probs: rho must be non-negative");
    require_shape(p.fb.rows == 2 && p.fb.cols == p.cluster.cols, "cluster_fb_probs: proto shapes");
    Mat pc(p.cluster.rows, 2);
    for (int c = 0; c < p.cluster.rows; ++c) {
        for (int i = 0; i < 2; ++i)
            pc.at(c, i) = rho * cosine(p.cluster.row(c), p.fb.row(i), p.cluster.cols);
        softmax_inplace(pc.row(c), 2);
    }
    return pc;
}

// 0.5/0.5 stream fusion.
inline Mat fuse_streams(const Mat& a, const Mat& b) {
    require_shape(a.rows == b.rows && a.cols == b.cols, "fuse_streams: shape mismatch");
    Mat out(a.rows, a.cols);
    for (size_t i = 0; i < a.size(); ++i) out.d[i] = 0.5 * (a.d[i] + b.d[i]);
    return out;
}

inline Vec fuse_streams(const Vec& a, const Vec& b) {
    require_shape(a.size() == b.size(), "fuse_streams: length mismatch");
    Vec out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (a[i] + b[i]);
    return out;
}

// Snippet-cluster labels Q^S: equipartition transport over the fused cosine
// logits under the rank prior.
inline Mat label_scc(const Mat& logits_fused, const Mat& prior, double eps_sharp, int n_iter) {
    Vec beta(logits_fused.cols, 1.0 / logits_fused.cols);
    return ot::sinkhorn(logits_fused, beta, &prior, eps_sharp, n_iter);
}

// Variant fed by fused probabilities instead of averaged raw logits
// (selected by scc_fuse_space = "probs").
inline Mat label_scc_from_probs(const Mat& ps_fused, const Mat& prior, double eps_sharp,
                                int n_iter) {
    Mat logits(ps_fused.rows, ps_fused.cols);
    for (size_t i = 0; i < ps_fused.size(); ++i) {
        if (!(ps_fused.d[i] > 0.0) || ps_fused.d[i] > 1.0)
            throw InputError("label_scc_from_probs: ps entries must be in (0, 1]");
        logits.d[i] = std::log(ps_fused.d[i]);
    }
    return label_scc(logits, prior, eps_sharp, n_iter);
}

// Cluster F&B labels Q^C: transport of K clusters onto {fg, bg} with the
// attention-derived marginal and no prior; the fused probabilities enter as
// log-probabilities so the kernel sharpens them multiplicatively.
inline Mat label_ccc(const Mat& pc_fused, const Vec& beta_c, double eps_sharp, int n_iter) {
    require_shape(pc_fused.cols == 2, "label_ccc: pc must be K x 2");
    Mat logits(pc_fused.rows, 2);
    for (size_t i = 0; i < pc_fused.size(); ++i) {
        if (!(pc_fused.d[i] > 0.0) || pc_fused.d[i] > 1.0)
            throw InputError("label_ccc: pc entries must be in (0, 1]");
        logits.d[i] = std::log(pc_fused.d[i]);
    }
    return ot::sinkhorn(logits, beta_c, nullptr, eps_sharp, n_iter);
}

}  // namespace wtal::labels
