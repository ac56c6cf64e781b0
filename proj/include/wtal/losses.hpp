#pragma once

// Training losses and their hand-derived gradients.
//
//   L_V : multi-label CE on pooled video scores (targets y / sum(y))
//   L_A : generalized CE (1 - p^gamma)/gamma on attention vs Q^A,
//         positive and negative terms normalized separately
//   L_S : mean snippet-level CE of P^S against the transport labels Q^S
//   L_C : mean cluster-level CE of P^C against the transport labels Q^C
//
// All logs clamp their argument at 1e-12. Gradient helpers return the exact
// derivative of the corresponding value function; pseudo-labels are constants.

#include <cmath>
#include <vector>

#include "wtal/errors.hpp"
#include "wtal/mat.hpp"

namespace wtal::losses {

constexpr double kProbFloor = 1e-12;

inline double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

// ---- video-level multi-label CE ---------------------------------------------

// One video: -sum_c (y_c / sum(y)) * log(p_bar_c).
inline double loss_video(const Vec& p_bar, const std::vector<int>& y) {
    require_shape(p_bar.size() == y.size() && !y.empty(), "loss_video: size mismatch");
    int positives = 0;
    for (int v : y) {
        require(v == 0 || v == 1, "loss_video: labels must be 0/1");
        positives += v;
    }
    require(positives >= 1, "loss_video: video has no positive labels");
    for (double p : p_bar)
        if (!(p >= 0.0 && p <= 1.0)) throw InputError("loss_video: scores must be in [0,1]");
    double loss = 0.0;
    for (size_t c = 0; c < y.size(); ++c)
        if (y[c] == 1) loss -= safe_log(p_bar[c]) / positives;
    return loss;
}

// Gradient of one video's loss at the pooled pre-softmax means:
// d/dm_c = p_bar_c - y_hat_c (standard softmax + CE).
inline Vec grad_video_pooled(const Vec& p_bar, const std::vector<int>& y) {
    require_shape(p_bar.size() == y.size() && !y.empty(), "grad_video_pooled: size mismatch");
    int positives = 0;
    for (int v : y) positives += v;
    require(positives >= 1, "grad_video_pooled: no positive labels");
    Vec g(p_bar.size());
    for (size_t c = 0; c < y.size(); ++c)
        g[c] = p_bar[c] - (y[c] == 1 ? 1.0 / positives : 0.0);
    return g;
}

// ---- attention GCE -----------------------------------------------------------

// (1/N_pos) sum_{qa=1} (1 - pa^g)/g + (1/N_neg) sum_{qa=0} (1 - (1-pa)^g)/g.
// A side with zero count is dropped (contributes 0) -- the all-foreground
// k=T degenerate case and its mirror.
inline double loss_attention_gce(const Vec& pa, const std::vector<int>& qa, double gamma) {
    require_shape(pa.size() == qa.size() && !pa.empty(), "loss_attention_gce: size mismatch");
    require(gamma > 0.0 && gamma < 1.0, "loss_attention_gce: gamma must be in (0,1)");
    int n_pos = 0;
    for (int v : qa) {
        require(v == 0 || v == 1, "loss_attention_gce: qa must be 0/1");
        n_pos += v;
    }
    const int n_neg = static_cast<int>(qa.size()) - n_pos;
    double pos = 0.0, neg = 0.0;
    for (size_t t = 0; t < pa.size(); ++t) {
        double p = pa[t];
        if (!(p >= 0.0 && p <= 1.0)) throw InputError("loss_attention_gce: pa must be in [0,1]");
        if (qa[t] == 1)
            pos += (1.0 - std::pow(p, gamma)) / gamma;
        else
            neg += (1.0 - std::pow(1.0 - p, gamma)) / gamma;
    }
    double loss = 0.0;
    if (n_pos > 0) loss += pos / n_pos;
    if (n_neg > 0) loss += neg / n_neg;
    return loss;
}

inline Vec grad_attention_gce(const Vec& pa, const std::vector<int>& qa, double gamma) {
    require_shape(pa.size() == qa.size() && !pa.empty(), "grad_attention_gce: size mismatch");
    require(gamma > 0.0 && gamma < 1.0, "grad_attention_gce: gamma must be in (0,1)");
    int n_pos = 0;
    for (int v : qa) n_pos += v;
    const int n_neg = static_cast<int>(qa.size()) - n_pos;
    Vec g(pa.size(), 0.0);
    for (size_t t = 0; t < pa.size(); ++t) {
        double p = std::min(std::max(pa[t], kProbFloor), 1.0 - kProbFloor);
        if (qa[t] == 1 && n_pos > 0)
            g[t] = -std::pow(p, gamma - 1.0) / n_pos;
        else if (qa[t] == 0 && n_neg > 0)
            g[t] = std::pow(1.0 - p, gamma - 1.0) / n_neg;
    }
    return g;
}

// ---- snippet-cluster CE (L_S) -----------------------------------------------

inline double loss_scc(const Mat& ps, const Mat& qs) {
    require_shape(ps.rows == qs.rows && ps.cols == qs.cols && ps.rows >= 1,
                  "loss_scc: shape mismatch");
    double loss = 0.0;
    for (size_t i = 0; i < ps.size(); ++i) {
        if (qs.d[i] == 0.0) continue;
        require(qs.d[i] >= 0.0, "loss_scc: negative target");
        loss -= qs.d[i] * safe_log(ps.d[i]);
    }
    return loss / ps.rows;
}

// d L_S / d logits, with ps = row-softmax(logits):
// (ps .* rowmass(qs) - qs) / N. Row masses are 1 for transport labels.
inline Mat grad_scc_logits(const Mat& ps, const Mat& qs) {
    require_shape(ps.rows == qs.rows && ps.cols == qs.cols, "grad_scc_logits: shape mismatch");
    Mat g(ps.rows, ps.cols);
    for (int r = 0; r < ps.rows; ++r) {
        double mass = 0.0;
        for (int c = 0; c < qs.cols; ++c) mass += qs.at(r, c);
        for (int c = 0; c < ps.cols; ++c)
            g.at(r, c) = (ps.at(r, c) * mass - qs.at(r, c)) / ps.rows;
    }
    return g;
}

// ---- cluster F&B CE (L_C) ----------------------------------------------------

inline double loss_ccc(const Mat& pc, const Mat& qc) {
    require_shape(pc.rows == qc.rows && pc.cols == qc.cols && pc.rows >= 1,
                  "loss_ccc: shape mismatch");
    double loss = 0.0;
    for (size_t i = 0; i < pc.size(); ++i) {
        if (qc.d[i] == 0.0) continue;
        require(qc.d[i] >= 0.0, "loss_ccc: negative target");
        loss -= qc.d[i] * safe_log(pc.d[i]);
    }
    return loss / pc.rows;
}

inline Mat grad_ccc_logits(const Mat& pc, const Mat& qc) {
    require_shape(pc.rows == qc.rows && pc.cols == qc.cols, "grad_ccc_logits: shape mismatch");
    Mat g(pc.rows, pc.cols);
    for (int r = 0; r < pc.rows; ++r) {
        double mass = 0.0;
        for (int c = 0; c < qc.cols; ++c) mass += qc.at(r, c);
        for (int c = 0; c < pc.cols; ++c)
            g.at(r, c) = (pc.at(r, c) * mass - qc.at(r, c)) / pc.rows;
    }
    return g;
}

// ---- joint objective ---------------------------------------------------------

struct LossBreakdown {
    double l_v = 0.0;  // stream-summed components
    double l_a = 0.0;
    double l_s = 0.0;
    double l_c = 0.0;
    double lambda_s = 1.0;
    double lambda_c = 0.3;
    double total = 0.0;
};

inline LossBreakdown total_loss(double l_v, double l_a, double l_s, double l_c, double lambda_s,
                                double lambda_c) {
    require(lambda_s >= 0.0 && lambda_c >= 0.0, "total_loss: lambdas must be >= 0");
    LossBreakdown b{l_v, l_a, l_s, l_c, lambda_s, lambda_c, 0.0};
    b.total = (l_v + l_a) + lambda_s * l_s + lambda_c * l_c;
    if (!std::isfinite(b.total)) throw NumericalError("total_loss: non-finite loss");
    return b;
}

}  // namespace wtal::losses
