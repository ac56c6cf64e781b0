#pragma once

// Two-branch snippet model, one instance per stream (RGB / flow).
//
// Every layer is a kernel-1 temporal convolution, i.e. an independent linear
// map per snippet row:
//
//   video branch:  x -> ReLU(x W_ve + b_ve) -> softmax(. W_cls + b_cls)  = P^V
//   attn branch:   x -> ReLU(x W_ae + b_ae) = E -> sigmoid(E w_att + b)  = P^A
//   cluster head:  ps_logits[n,k] = rho * cos(E_n, head_k),  P^S = softmax
//
// Gradients are hand-derived reverse mode; `backward` takes the upstream
// loss gradients at pv / pa / ps_logits plus an extra embedding gradient for
// the prototype path and returns one gradient tensor per trainable field.

#include <cmath>
#include <random>

#include "wtal/errors.hpp"
#include "wtal/mat.hpp"

namespace wtal::net {

struct StreamParams {
    Mat enc_video_w;   // D x H
    Vec enc_video_b;   // H
    Mat enc_attn_w;    // D x H
    Vec enc_attn_b;    // H
    Mat classifier_w;  // H x G
    Vec classifier_b;  // G
    Vec attention_w;   // H
    double attention_b = 0.0;
    Mat cluster_head;     // K x H, bias-free cosine classifier
    double rho_head = 10.0;  // cosine temperature; fixed hyperparameter, not trained

    int feat_dim() const { return enc_video_w.rows; }
    int hidden() const { return enc_video_w.cols; }
    int classes() const { return classifier_w.cols; }
    int clusters() const { return cluster_head.rows; }

    void validate() const {
        require_shape(enc_video_w.rows >= 1 && enc_video_w.cols >= 1, "params: empty encoder");
        require_shape(enc_attn_w.rows == feat_dim() && enc_attn_w.cols == hidden(),
                      "params: encoder shape mismatch");
        require_shape(static_cast<int>(enc_video_b.size()) == hidden() &&
                          static_cast<int>(enc_attn_b.size()) == hidden(),
                      "params: encoder bias shape mismatch");
        require_shape(classifier_w.rows == hidden() &&
                          static_cast<int>(classifier_b.size()) == classes(),
                      "params: classifier shape mismatch");
        require_shape(static_cast<int>(attention_w.size()) == hidden(),
                      "params: attention shape mismatch");
        require_shape(cluster_head.cols == hidden(), "params: cluster head shape mismatch");
        require(rho_head > 0.0, "params: rho_head must be positive");
    }
};

struct ModelParams {
    StreamParams rgb, flow;
};

struct BatchActivations {
    Mat pv;         // T' x G
    Vec pa;         // T'
    Mat emb;        // T' x H (post-ReLU)
    Mat ps_logits;  // T' x K
    Mat ps;         // T' x K
    // backward caches
    Mat a1;         // T' x H video-branch post-ReLU
    Vec emb_norm;   // T'
    Vec head_norm;  // K
    bool cached = false;
};

inline BatchActivations forward(const Mat& x, const StreamParams& p, bool cache = true) {
    p.validate();
    require_shape(x.cols == p.feat_dim(), "forward: feature dim mismatch");
    require_shape(x.rows >= 1, "forward: empty batch");
    if (!all_finite(x.d)) throw NumericalError("forward: non-finite feature input");
    const int t = x.rows, h = p.hidden(), g = p.classes(), k = p.clusters();

    BatchActivations a;
    // video branch
    a.a1 = matmul(x, p.enc_video_w);
    for (int r = 0; r < t; ++r) {
        double* row = a.a1.row(r);
        for (int j = 0; j < h; ++j) row[j] = std::max(row[j] + p.enc_video_b[j], 0.0);
    }
    a.pv = matmul(a.a1, p.classifier_w);
    for (int r = 0; r < t; ++r) {
        double* row = a.pv.row(r);
        for (int j = 0; j < g; ++j) row[j] += p.classifier_b[j];
        softmax_inplace(row, g);
    }
    // attention branch
    a.emb = matmul(x, p.enc_attn_w);
    for (int r = 0; r < t; ++r) {
        double* row = a.emb.row(r);
        for (int j = 0; j < h; ++j) row[j] = std::max(row[j] + p.enc_attn_b[j], 0.0);
    }
    a.pa.resize(t);
    for (int r = 0; r < t; ++r)
        a.pa[r] = sigmoid(dot(a.emb.row(r), p.attention_w.data(), h) + p.attention_b);
    // cluster head (cosine classifier with temperature)
    a.emb_norm.resize(t);
    for (int r = 0; r < t; ++r) a.emb_norm[r] = l2_norm(a.emb.row(r), h);
    a.head_norm.resize(k);
    for (int c = 0; c < k; ++c) a.head_norm[c] = l2_norm(p.cluster_head.row(c), h);
    a.ps_logits = Mat(t, k);
    for (int r = 0; r < t; ++r) {
        for (int c = 0; c < k; ++c) {
            double nn = a.emb_norm[r] * a.head_norm[c];
            double cos = nn > 0.0 ? dot(a.emb.row(r), p.cluster_head.row(c), h) / nn : 0.0;
            a.ps_logits.at(r, c) = p.rho_head * cos;
        }
    }
    a.ps = row_softmax(a.ps_logits);
    a.cached = cache;
    if (!cache) {
        a.a1 = Mat();
        a.emb_norm.clear();
        a.head_norm.clear();
    }
    return a;
}

struct UpstreamGrads {
    Mat d_pv;         // dL/dP^V, T' x G (may be empty => zero)
    Vec d_pa;         // dL/dP^A, T'     (may be empty => zero)
    Mat d_ps_logits;  // dL/d(rho*cos),  T' x K (may be empty => zero)
    Mat d_emb;        // prototype-path dL/dE, T' x H (may be empty => zero)
};

struct StreamGradients {
    Mat enc_video_w;
    Vec enc_video_b;
    Mat enc_attn_w;
    Vec enc_attn_b;
    Mat classifier_w;
    Vec classifier_b;
    Vec attention_w;
    double attention_b = 0.0;
    Mat cluster_head;
};

inline StreamGradients backward(const Mat& x, const StreamParams& p, const BatchActivations& a,
                                const UpstreamGrads& up) {
    if (!a.cached) throw StateError("backward: forward activations were not cached");
    p.validate();
    const int t = x.rows, h = p.hidden(), g = p.classes(), k = p.clusters();
    require_shape(a.pv.rows == t, "backward: activation batch size mismatch");
    if (!up.d_pv.empty())
        require_shape(up.d_pv.rows == t && up.d_pv.cols == g, "backward: d_pv shape");
    if (!up.d_pa.empty()) require_shape(static_cast<int>(up.d_pa.size()) == t, "backward: d_pa shape");
    if (!up.d_ps_logits.empty())
        require_shape(up.d_ps_logits.rows == t && up.d_ps_logits.cols == k,
                      "backward: d_ps_logits shape");
    if (!up.d_emb.empty())
        require_shape(up.d_emb.rows == t && up.d_emb.cols == h, "backward: d_emb shape");

    StreamGradients gr;
    gr.enc_video_w = Mat(p.feat_dim(), h);
    gr.enc_video_b = Vec(h, 0.0);
    gr.enc_attn_w = Mat(p.feat_dim(), h);
    gr.enc_attn_b = Vec(h, 0.0);
    gr.classifier_w = Mat(h, g);
    gr.classifier_b = Vec(g, 0.0);
    gr.attention_w = Vec(h, 0.0);
    gr.attention_b = 0.0;
    gr.cluster_head = Mat(k, h);

    // ---- video branch ----
    if (!up.d_pv.empty()) {
        // softmax backward: d_z = pv .* (d_pv - <d_pv, pv>)
        Mat d_z2(t, g);
        for (int r = 0; r < t; ++r) {
            const double* pvr = a.pv.row(r);
            const double* dr = up.d_pv.row(r);
            double inner = dot(dr, pvr, g);
            double* out = d_z2.row(r);
            for (int c = 0; c < g; ++c) out[c] = pvr[c] * (dr[c] - inner);
        }
        gr.classifier_w = matmul_at_b(a.a1, d_z2);
        gr.classifier_b = col_sums(d_z2);
        Mat d_a1 = matmul_a_bt(d_z2, p.classifier_w);  // (t x g) * (h x g)^T
        for (int r = 0; r < t; ++r) {
            const double* a1r = a.a1.row(r);
            double* dr = d_a1.row(r);
            for (int j = 0; j < h; ++j)
                if (a1r[j] <= 0.0) dr[j] = 0.0;  // ReLU mask
        }
        gr.enc_video_w = matmul_at_b(x, d_a1);
        gr.enc_video_b = col_sums(d_a1);
    }

    // ---- embedding gradient accumulated from all heads ----
    Mat d_emb(t, h);
    if (!up.d_emb.empty()) d_emb = up.d_emb;

    if (!up.d_pa.empty()) {
        // sigmoid backward into the attention layer and the embeddings
        for (int r = 0; r < t; ++r) {
            double dz = up.d_pa[r] * a.pa[r] * (1.0 - a.pa[r]);
            if (dz == 0.0) continue;
            const double* er = a.emb.row(r);
            double* der = d_emb.row(r);
            for (int j = 0; j < h; ++j) {
                gr.attention_w[j] += dz * er[j];
                der[j] += dz * p.attention_w[j];
            }
            gr.attention_b += dz;
        }
    }

    if (!up.d_ps_logits.empty()) {
        // cosine-classifier backward; zero-norm rows/heads carry no gradient
        for (int r = 0; r < t; ++r) {
            double en = a.emb_norm[r];
            if (en == 0.0) continue;
            const double* er = a.emb.row(r);
            const double* gl = up.d_ps_logits.row(r);
            double* der = d_emb.row(r);
            for (int c = 0; c < k; ++c) {
                double hn = a.head_norm[c];
                double gkc = gl[c];
                if (hn == 0.0 || gkc == 0.0) continue;
                double cos = a.ps_logits.at(r, c) / p.rho_head;
                const double* hc = p.cluster_head.row(c);
                double* dhc = gr.cluster_head.row(c);
                double s = p.rho_head * gkc;
                double inv_eh = 1.0 / (en * hn);
                double ce = cos / (en * en), ch = cos / (hn * hn);
                for (int j = 0; j < h; ++j) {
                    der[j] += s * (hc[j] * inv_eh - ce * er[j]);
                    dhc[j] += s * (er[j] * inv_eh - ch * hc[j]);
                }
            }
        }
    }

    // ---- embedding encoder ----
    for (int r = 0; r < t; ++r) {
        const double* er = a.emb.row(r);
        double* dr = d_emb.row(r);
        for (int j = 0; j < h; ++j)
            if (er[j] <= 0.0) dr[j] = 0.0;  // ReLU mask (emb > 0 <=> preact > 0)
    }
    gr.enc_attn_w = matmul_at_b(x, d_emb);
    gr.enc_attn_b = col_sums(d_emb);
    return gr;
}

// ---- size accounting -------------------------------------------------------

inline long long count_params(const StreamParams& p) {
    long long d = p.feat_dim(), h = p.hidden(), g = p.classes(), k = p.clusters();
    return (d * h + h) + (d * h + h) + (h * g + g) + (h + 1) + k * h;
}

inline long long count_params(const ModelParams& p) {
    return count_params(p.rgb) + count_params(p.flow);
}

// Multiply-accumulates for one pass over T snippets: every layer is a
// per-snippet linear map, so MACs scale linearly in T.
inline long long count_macs(const StreamParams& p, long long t) {
    long long d = p.feat_dim(), h = p.hidden(), g = p.classes(), k = p.clusters();
    return t * (d * h + d * h + h * g + h + k * h);
}

inline long long count_macs(const ModelParams& p, long long t) {
    return count_macs(p.rgb, t) + count_macs(p.flow, t);
}

// ---- init ------------------------------------------------------------------

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases; the draw
// order below is fixed and part of the determinism contract.
inline StreamParams init_stream(int d, int h, int g, int k, double rho, std::mt19937_64& rng) {
    require(d >= 1 && h >= 1 && g >= 1 && k >= 1, "init_stream: dims must be >= 1");
    auto fill = [&rng](double bound, auto&& container) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& v : container) v = u(rng);
    };
    StreamParams p;
    double be = 1.0 / std::sqrt(static_cast<double>(d));
    double bh = 1.0 / std::sqrt(static_cast<double>(h));
    p.enc_video_w = Mat(d, h);
    fill(be, p.enc_video_w.d);
    p.enc_video_b = Vec(h);
    fill(be, p.enc_video_b);
    p.enc_attn_w = Mat(d, h);
    fill(be, p.enc_attn_w.d);
    p.enc_attn_b = Vec(h);
    fill(be, p.enc_attn_b);
    p.classifier_w = Mat(h, g);
    fill(bh, p.classifier_w.d);
    p.classifier_b = Vec(g);
    fill(bh, p.classifier_b);
    p.attention_w = Vec(h);
    fill(bh, p.attention_w);
    {
        std::uniform_real_distribution<double> u(-bh, bh);
        p.attention_b = u(rng);
    }
    p.cluster_head = Mat(k, h);
    fill(bh, p.cluster_head.d);
    p.rho_head = rho;
    return p;
}

inline ModelParams init_model(int d, int h, int g, int k, double rho, std::mt19937_64& rng) {
    ModelParams m;
    m.rgb = init_stream(d, h, g, k, rho, rng);
    m.flow = init_stream(d, h, g, k, rho, rng);
    return m;
}

}  // namespace wtal::net
