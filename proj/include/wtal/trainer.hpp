#pragma once
// Joint training: batch assembly, co-labeled pseudo-label generation
// (top-k attention labels, OT snippet-cluster labels, prototype-based
// cluster F&B labels), loss evaluation with hand-derived gradients, and
// bias-corrected Adam.  Label generation and loss evaluation are split so
// labels can be frozen while parameters move (finite-difference checks rely
// on this).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wtal/dataset.hpp"
#include "wtal/errors.hpp"
#include "wtal/losses.hpp"
#include "wtal/mat.hpp"
#include "wtal/network.hpp"
#include "wtal/ot.hpp"
#include "wtal/pseudo_labels.hpp"

namespace wtal::train {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
    int t_snippets = 750;  // T, snippets sampled per video
    int batch = 16;        // B
    int clusters = 16;     // K
    int hidden = 512;      // H
    double gamma = 0.7;    // GCE exponent
    double omega = 0.25;   // TCAS calibration weight
    double eps_sharp = 20.0;
    double rho = 10.0;     // cosine temperature
    double sigma = 10.0;   // rank-prior width
    double lambda_s = 1.0;
    double lambda_c = 0.3;
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps_adam = 1e-8;
    int epochs = 1;
    int sinkhorn_iters = 3;
    std::uint64_t seed = 1;
    int threads = 1;
    bool scc_fuse_probs = false;  // false: average raw cosine logits across streams

    int topk() const { return std::max(1, t_snippets / 8); }

    void validate() const {
        require(t_snippets >= 1, "config: T must be >= 1");
        require(batch >= 1, "config: B must be >= 1");
        require(clusters >= 2, "config: K must be >= 2");
        require(hidden >= 1, "config: H must be >= 1");
        require(gamma > 0.0 && gamma < 1.0, "config: gamma must be in (0,1)");
        require(omega >= 0.0 && omega <= 1.0, "config: omega must be in [0,1]");
        require(eps_sharp > 0.0, "config: eps must be positive");
        require(rho > 0.0, "config: rho must be positive");
        require(sigma > 0.0, "config: sigma must be positive");
        require(lambda_s >= 0.0 && lambda_c >= 0.0, "config: lambdas must be >= 0");
        require(lr > 0.0, "config: lr must be positive");
        require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0,
                "config: adam betas must be in (0,1)");
        require(eps_adam > 0.0, "config: eps_adam must be positive");
        require(epochs >= 1, "config: epochs must be >= 1");
        require(sinkhorn_iters >= 1, "config: sinkhorn_iters must be >= 1");
        require(threads >= 1, "config: threads must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Snippet sampling: strided when L >= T, cyclic wrap when L < T
// ---------------------------------------------------------------------------

inline std::vector<int> sample_indices(int l, int t) {
    require(l >= 1 && t >= 1, "sample_snippets: need L >= 1 and T >= 1");
    std::vector<int> idx(t);
    if (l >= t) {
        for (int i = 0; i < t; ++i) {
            int j = static_cast<int>(std::llround(static_cast<double>(i) * l / t));
            idx[i] = std::min(j, l - 1);
        }
    } else {
        for (int i = 0; i < t; ++i) idx[i] = i % l;
    }
    return idx;
}

inline Mat sample_snippets(const Mat& features, int t) {
    const auto idx = sample_indices(features.rows, t);
    Mat out(t, features.cols);
    for (int i = 0; i < t; ++i) {
        const double* src = features.row(idx[i]);
        std::copy(src, src + features.cols, out.row(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct ParamRef {
    std::string name;
    double* p = nullptr;
    const double* g = nullptr;
    size_t n = 0;
};

inline void collect_refs(net::StreamParams& sp, const net::StreamGradients& gr,
                         const std::string& prefix, std::vector<ParamRef>& out) {
    auto add = [&](const char* nm, double* p, const double* g, size_t n) {
        out.push_back({prefix + nm, p, g, n});
    };
    add("enc_video.w", sp.enc_video_w.d.data(), gr.enc_video_w.d.data(), sp.enc_video_w.size());
    add("enc_video.b", sp.enc_video_b.data(), gr.enc_video_b.data(), sp.enc_video_b.size());
    add("enc_attn.w", sp.enc_attn_w.d.data(), gr.enc_attn_w.d.data(), sp.enc_attn_w.size());
    add("enc_attn.b", sp.enc_attn_b.data(), gr.enc_attn_b.data(), sp.enc_attn_b.size());
    add("classifier.w", sp.classifier_w.d.data(), gr.classifier_w.d.data(),
        sp.classifier_w.size());
    add("classifier.b", sp.classifier_b.data(), gr.classifier_b.data(), sp.classifier_b.size());
    add("attention.w", sp.attention_w.data(), gr.attention_w.data(), sp.attention_w.size());
    add("attention.b", &sp.attention_b, &gr.attention_b, 1);
    add("cluster_head", sp.cluster_head.d.data(), gr.cluster_head.d.data(),
        sp.cluster_head.size());
}

struct AdamState {
    std::vector<Vec> m, v;  // parallel to the fixed parameter enumeration
    long long step = 0;
};

inline void adam_step(std::vector<ParamRef>& refs, AdamState& st, double lr, double beta1,
                      double beta2, double eps_adam) {
    if (st.m.empty()) {
        st.m.resize(refs.size());
        st.v.resize(refs.size());
        for (size_t i = 0; i < refs.size(); ++i) {
            st.m[i].assign(refs[i].n, 0.0);
            st.v[i].assign(refs[i].n, 0.0);
        }
    }
    require_shape(st.m.size() == refs.size(), "adam_step: state/param mismatch");
    ++st.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
    for (size_t i = 0; i < refs.size(); ++i) {
        auto& r = refs[i];
        require_shape(st.m[i].size() == r.n, "adam_step: slot shape mismatch");
        for (size_t j = 0; j < r.n; ++j) {
            const double g = r.g[j];
            if (!std::isfinite(g))
                throw NumericalError("non-finite gradient in parameter '" + r.name + "'");
            st.m[i][j] = beta1 * st.m[i][j] + (1.0 - beta1) * g;
            st.v[i][j] = beta2 * st.v[i][j] + (1.0 - beta2) * g * g;
            const double mhat = st.m[i][j] / bc1;
            const double vhat = st.v[i][j] / bc2;
            r.p[j] -= lr * mhat / (std::sqrt(vhat) + eps_adam);
        }
    }
}

// ---------------------------------------------------------------------------
// Pseudo-label generation (one batch; labels shared across streams)
// ---------------------------------------------------------------------------

struct VideoLabelSet {
    labels::GammaSets gamma;  // per class, indices local to the video slice
    std::vector<int> y;       // video-level 0/1 labels, length G
    std::vector<int> qa;      // snippet F&B labels, length T
};

struct BatchLabels {
    std::vector<VideoLabelSet> videos;  // B
    std::vector<int> qa_pool;           // N = B*T
    std::vector<int> rank;              // N, ascending attention rank (1-based)
    Mat prior;                          // N x K rank prior
    Mat qs;                             // N x K snippet-cluster labels
    Vec beta_c;                         // 2, cluster F&B marginal
    Mat qc;                             // K x 2 cluster F&B labels
    bool lc_active = true;              // false: degenerate prototypes this batch
    std::string lc_skip_reason;
};

// qc_prev seeds the rank prior (the posterior from the previous iteration;
// uniform 0.5 before the first one).
inline BatchLabels make_labels(const net::BatchActivations& acts_rgb,
                               const net::BatchActivations& acts_flow,
                               const std::vector<std::vector<int>>& video_y, const Mat& qc_prev,
                               const TrainConfig& cfg) {
    const int n = acts_rgb.pv.rows;
    const int b = static_cast<int>(video_y.size());
    require_shape(b >= 1 && n % b == 0, "make_labels: pool size not divisible by batch");
    const int t = n / b;
    const int g = acts_rgb.pv.cols;
    const int k = acts_rgb.ps.cols;
    require_shape(acts_flow.pv.rows == n && acts_flow.pv.cols == g && acts_flow.ps.cols == k,
                  "make_labels: stream activation mismatch");
    require_shape(qc_prev.rows == k && qc_prev.cols == 2, "make_labels: qc_prev must be K x 2");

    const Mat pv_fused = labels::fuse_streams(acts_rgb.pv, acts_flow.pv);
    const Vec pa_fused = labels::fuse_streams(acts_rgb.pa, acts_flow.pa);

    BatchLabels out;
    out.qa_pool.reserve(n);
    const int k_top = std::max(1, t / 8);
    for (int vb = 0; vb < b; ++vb) {
        VideoLabelSet vl;
        vl.y = video_y[vb];
        require_shape(static_cast<int>(vl.y.size()) == g, "make_labels: label vector length");
        Mat pv_slice(t, g);
        Vec pa_slice(t);
        for (int i = 0; i < t; ++i) {
            const double* src = pv_fused.row(vb * t + i);
            std::copy(src, src + g, pv_slice.row(i));
            pa_slice[i] = pa_fused[vb * t + i];
        }
        const Mat calibrated = labels::calibrate_tcas(pv_slice, pa_slice, cfg.omega);
        vl.gamma = labels::topk_select(calibrated, k_top);
        vl.qa = labels::make_qa(vl.gamma, vl.y, t);
        out.qa_pool.insert(out.qa_pool.end(), vl.qa.begin(), vl.qa.end());
        out.videos.push_back(std::move(vl));
    }

    // rank prior from fused attention and the previous cluster posterior
    out.rank = labels::rank_snippets(pa_fused);
    Vec qc_fg(k);
    for (int i = 0; i < k; ++i) qc_fg[i] = qc_prev.at(i, 0);
    out.prior = labels::gaussian_prior(out.rank, qc_fg, cfg.sigma);

    if (cfg.scc_fuse_probs) {
        const Mat ps_fused = labels::fuse_streams(acts_rgb.ps, acts_flow.ps);
        out.qs = labels::label_scc_from_probs(ps_fused, out.prior, cfg.eps_sharp,
                                              cfg.sinkhorn_iters);
    } else {
        const Mat logits_fused = labels::fuse_streams(acts_rgb.ps_logits, acts_flow.ps_logits);
        out.qs = labels::label_scc(logits_fused, out.prior, cfg.eps_sharp, cfg.sinkhorn_iters);
    }

    out.beta_c = labels::beta_ccc(out.qa_pool);
    try {
        const auto proto_rgb = labels::prototypes(acts_rgb.emb, out.qs, out.qa_pool);
        const auto proto_flow = labels::prototypes(acts_flow.emb, out.qs, out.qa_pool);
        const Mat pc_rgb = labels::cluster_fb_probs(proto_rgb, cfg.rho);
        const Mat pc_flow = labels::cluster_fb_probs(proto_flow, cfg.rho);
        const Mat pc_fused = labels::fuse_streams(pc_rgb, pc_flow);
        out.qc = labels::label_ccc(pc_fused, out.beta_c, cfg.eps_sharp, cfg.sinkhorn_iters);
        out.lc_active = true;
    } catch (const DegenerateError& e) {
        out.qc = qc_prev;  // carry the previous posterior
        out.lc_active = false;
        out.lc_skip_reason = e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss + gradient evaluation under frozen labels
// ---------------------------------------------------------------------------

namespace detail {

// Chain dL_C/d(rho*cos-logits) through the prototype construction into the
// pool embeddings.  Weighted-mean prototypes: cluster_i = sum_t w_ti e_t with
// w_ti = qs_ti / mass_i; fg/bg rows use qa / (1-qa) indicator weights.
inline Mat ccc_emb_grad(const Mat& emb, const Mat& qs, const std::vector<int>& qa,
                        const labels::Prototypes& pr, const Mat& d_logits, double rho,
                        double scale) {
    const int n = emb.rows, h = emb.cols, k = pr.cluster.rows;
    Mat d_cluster(k, h, 0.0), d_fb(2, h, 0.0);
    for (int i = 0; i < k; ++i) {
        const double* u = pr.cluster.row(i);
        const double un = l2_norm(u, h);
        for (int j = 0; j < 2; ++j) {
            const double* v = pr.fb.row(j);
            const double vn = l2_norm(v, h);
            const double gij = d_logits.at(i, j) * rho * scale;
            if (gij == 0.0 || un == 0.0 || vn == 0.0) continue;  // cos(0,.) := 0, flat
            const double c = dot(u, v, h) / (un * vn);
            double* du = d_cluster.row(i);
            double* dv = d_fb.row(j);
            const double inv_uv = 1.0 / (un * vn);
            const double cu = c / (un * un), cv = c / (vn * vn);
            for (int e = 0; e < h; ++e) {
                du[e] += gij * (v[e] * inv_uv - cu * u[e]);
                dv[e] += gij * (u[e] * inv_uv - cv * v[e]);
            }
        }
    }
    Vec mass(k, 0.0);
    for (int t = 0; t < n; ++t)
        for (int i = 0; i < k; ++i) mass[i] += qs.at(t, i);
    double n_pos = 0.0;
    for (int v : qa) n_pos += v;
    const double n_neg = n - n_pos;
    Mat d_emb(n, h, 0.0);
    for (int t = 0; t < n; ++t) {
        double* de = d_emb.row(t);
        for (int i = 0; i < k; ++i) {
            const double w = qs.at(t, i) / mass[i];
            if (w == 0.0) continue;
            const double* du = d_cluster.row(i);
            for (int e = 0; e < h; ++e) de[e] += w * du[e];
        }
        const double wf = qa[t] ? 1.0 / n_pos : 0.0;
        const double wb = qa[t] ? 0.0 : 1.0 / n_neg;
        const double* df = d_fb.row(0);
        const double* db = d_fb.row(1);
        for (int e = 0; e < h; ++e) de[e] += wf * df[e] + wb * db[e];
    }
    return d_emb;
}

}  // namespace detail

struct StreamEval {
    double l_v = 0.0, l_a = 0.0, l_s = 0.0, l_c = 0.0;
    net::StreamGradients grads;
};

// Loss terms and parameter gradients for one stream given precomputed
// activations.  All upstream seeds carry their lambda weights so `grads`
// is the gradient of the total objective.
inline StreamEval eval_stream(const Mat& x, const net::StreamParams& p,
                              const net::BatchActivations& acts, const BatchLabels& lab,
                              const TrainConfig& cfg) {
    const int n = acts.pv.rows, g = acts.pv.cols;
    const int b = static_cast<int>(lab.videos.size());
    require_shape(b >= 1 && n % b == 0, "eval_stream: pool/batch mismatch");
    const int t = n / b;

    StreamEval out;
    net::UpstreamGrads up;
    up.d_pv = Mat(n, g, 0.0);
    up.d_pa = Vec(n, 0.0);

    for (int vb = 0; vb < b; ++vb) {
        const auto& vl = lab.videos[vb];
        Mat pv_slice(t, g);
        Vec pa_slice(t);
        for (int i = 0; i < t; ++i) {
            const double* src = acts.pv.row(vb * t + i);
            std::copy(src, src + g, pv_slice.row(i));
            pa_slice[i] = acts.pa[vb * t + i];
        }
        const Vec probs = labels::video_score(pv_slice, vl.gamma);
        out.l_v += losses::loss_video(probs, vl.y);
        const Vec d_pool = losses::grad_video_pooled(probs, vl.y);
        for (int c = 0; c < g; ++c) {
            const double w = d_pool[c] / (static_cast<double>(vl.gamma[c].size()) * b);
            for (int idx : vl.gamma[c]) up.d_pv.at(vb * t + idx, c) += w;
        }
        out.l_a += losses::loss_attention_gce(pa_slice, vl.qa, cfg.gamma);
        const Vec d_pa = losses::grad_attention_gce(pa_slice, vl.qa, cfg.gamma);
        for (int i = 0; i < t; ++i) up.d_pa[vb * t + i] += d_pa[i] / b;
    }
    out.l_v /= b;
    out.l_a /= b;

    out.l_s = losses::loss_scc(acts.ps, lab.qs);
    up.d_ps_logits = losses::grad_scc_logits(acts.ps, lab.qs);
    for (auto& v : up.d_ps_logits.d) v *= cfg.lambda_s;

    if (lab.lc_active) {
        const auto protos = labels::prototypes(acts.emb, lab.qs, lab.qa_pool);
        const Mat pc = labels::cluster_fb_probs(protos, p.rho_head);
        out.l_c = losses::loss_ccc(pc, lab.qc);
        const Mat d_logits = losses::grad_ccc_logits(pc, lab.qc);
        up.d_emb = detail::ccc_emb_grad(acts.emb, lab.qs, lab.qa_pool, protos, d_logits,
                                        p.rho_head, cfg.lambda_c);
    }

    out.grads = net::backward(x, p, acts, up);
    return out;
}

struct EvalOut {
    losses::LossBreakdown lb;
    net::StreamGradients g_rgb, g_flow;
    double h_qs = 0.0, h_qc = 0.0, h_mean_ps = 0.0;
};

inline EvalOut eval_batch_with_acts(const net::ModelParams& model, const Mat& x_rgb,
                                    const Mat& x_flow, const net::BatchActivations& acts_rgb,
                                    const net::BatchActivations& acts_flow,
                                    const BatchLabels& lab, const TrainConfig& cfg) {
    EvalOut out;
    StreamEval er = eval_stream(x_rgb, model.rgb, acts_rgb, lab, cfg);
    StreamEval ef = eval_stream(x_flow, model.flow, acts_flow, lab, cfg);
    out.lb = losses::total_loss(er.l_v + ef.l_v, er.l_a + ef.l_a, er.l_s + ef.l_s,
                                er.l_c + ef.l_c, cfg.lambda_s, cfg.lambda_c);
    out.g_rgb = std::move(er.grads);
    out.g_flow = std::move(ef.grads);

    out.h_qs = ot::entropy(lab.qs);
    out.h_qc = ot::entropy(lab.qc);
    const int n = acts_rgb.ps.rows, k = acts_rgb.ps.cols;
    Vec mean_ps(k, 0.0);
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < k; ++j)
            mean_ps[j] += acts_rgb.ps.at(t, j) + acts_flow.ps.at(t, j);
    for (auto& v : mean_ps) v /= 2.0 * n;
    out.h_mean_ps = ot::entropy(mean_ps);
    return out;
}

// Fresh-forward variant: the finite-difference harness perturbs parameters
// while holding `lab` fixed.
inline EvalOut eval_batch(const net::ModelParams& model, const Mat& x_rgb, const Mat& x_flow,
                          const BatchLabels& lab, const TrainConfig& cfg) {
    const auto ar = net::forward(x_rgb, model.rgb);
    const auto af = net::forward(x_flow, model.flow);
    return eval_batch_with_acts(model, x_rgb, x_flow, ar, af, lab, cfg);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct Dataset {
    data::Manifest man;
    std::vector<Mat> rgb, flow;  // per video, full L x D
    int feat_dim = 0;
};

inline Dataset load_dataset(const std::string& manifest_path) {
    Dataset ds;
    ds.man = data::load_manifest(manifest_path);
    require(!ds.man.videos.empty(), "dataset: manifest lists no videos");
    for (const auto& v : ds.man.videos) {
        Mat r, f;
        try {
            r = data::read_features(data::resolve_path(manifest_path, v.rgb_path));
            f = data::read_features(data::resolve_path(manifest_path, v.flow_path));
        } catch (const IoError& e) {
            throw IoError("video '" + v.id + "': " + e.what());
        }
        if (r.cols != f.cols || r.rows != f.rows)
            throw InputError("video '" + v.id + "': stream shape mismatch");
        if (ds.feat_dim == 0) ds.feat_dim = r.cols;
        if (r.cols != ds.feat_dim)
            throw InputError("video '" + v.id + "': feature dim differs from corpus");
        ds.rgb.push_back(std::move(r));
        ds.flow.push_back(std::move(f));
    }
    return ds;
}

struct MetricsRow {
    long long iteration = 0;
    double l_v = 0, l_a = 0, l_s = 0, l_c = 0, total = 0;
    double h_qc = 0, h_qs = 0, h_mean_ps = 0;
};

struct TrainResult {
    net::ModelParams model;
    Mat qc;  // K x 2 posterior from the last iteration
    std::vector<MetricsRow> history;
    BatchLabels last_labels;
    std::vector<std::string> warnings;
};

namespace detail {

// Fisher-Yates with an explicit rejection-sampled bound: std::shuffle's draw
// order is implementation-defined, which would break cross-toolchain
// determinism of checkpoints.
inline void seeded_shuffle(std::vector<int>& v, std::mt19937_64& eng) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        const std::uint64_t span = static_cast<std::uint64_t>(i) + 1;
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() -
            std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t x;
        do {
            x = eng();
        } while (x >= limit);
        std::swap(v[i], v[static_cast<int>(x % span)]);
    }
}

}  // namespace detail

inline TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                         std::ostream* metrics = nullptr, std::ostream* log = nullptr) {
    cfg.validate();
    require(!ds.man.videos.empty(), "train: empty dataset");
    const int g = ds.man.num_classes;
    const int n_videos = static_cast<int>(ds.man.videos.size());

    std::mt19937_64 init_rng(cfg.seed);
    TrainResult res;
    res.model = net::init_model(ds.feat_dim, cfg.hidden, g, cfg.clusters, cfg.rho, init_rng);
    res.qc = Mat(cfg.clusters, 2, 0.5);

    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<int> order(n_videos);
    for (int i = 0; i < n_videos; ++i) order[i] = i;

    AdamState adam;
    long long iteration = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::seeded_shuffle(order, shuffle_rng);
        for (int start = 0; start < n_videos; start += cfg.batch) {
            const int b = std::min(cfg.batch, n_videos - start);
            const int t = cfg.t_snippets;
            Mat x_rgb(b * t, ds.feat_dim), x_flow(b * t, ds.feat_dim);
            std::vector<std::vector<int>> video_y;
            for (int i = 0; i < b; ++i) {
                const int vi = order[start + i];
                const Mat sr = sample_snippets(ds.rgb[vi], t);
                const Mat sf = sample_snippets(ds.flow[vi], t);
                std::copy(sr.d.begin(), sr.d.end(), x_rgb.row(i * t));
                std::copy(sf.d.begin(), sf.d.end(), x_flow.row(i * t));
                std::vector<int> y(g, 0);
                for (int c : ds.man.videos[vi].labels) y[c] = 1;
                video_y.push_back(std::move(y));
            }

            const auto acts_rgb = net::forward(x_rgb, res.model.rgb);
            const auto acts_flow = net::forward(x_flow, res.model.flow);
            BatchLabels lab = make_labels(acts_rgb, acts_flow, video_y, res.qc, cfg);
            if (!lab.lc_active) {
                const std::string w = "iteration " + std::to_string(iteration + 1) +
                                      ": skipping cluster-classification loss (" +
                                      lab.lc_skip_reason + ")";
                res.warnings.push_back(w);
                if (log) (*log) << "warning: " << w << '\n';
            }
            const EvalOut ev =
                eval_batch_with_acts(res.model, x_rgb, x_flow, acts_rgb, acts_flow, lab, cfg);
            if (!std::isfinite(ev.lb.total))
                throw NumericalError("non-finite loss at iteration " +
                                     std::to_string(iteration + 1));

            std::vector<ParamRef> refs;
            collect_refs(res.model.rgb, ev.g_rgb, "rgb.", refs);
            collect_refs(res.model.flow, ev.g_flow, "flow.", refs);
            adam_step(refs, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam);

            res.qc = lab.qc;
            ++iteration;
            MetricsRow row{iteration, ev.lb.l_v,  ev.lb.l_a, ev.lb.l_s,     ev.lb.l_c,
                           ev.lb.total, ev.h_qc, ev.h_qs,   ev.h_mean_ps};
            res.history.push_back(row);
            if (metrics) {
                (*metrics) << "{\"iteration\":" << row.iteration << ",\"l_v\":" << row.l_v
                           << ",\"l_a\":" << row.l_a << ",\"l_s\":" << row.l_s
                           << ",\"l_c\":" << row.l_c << ",\"total\":" << row.total
                           << ",\"h_qc\":" << row.h_qc << ",\"h_qs\":" << row.h_qs
                           << ",\"h_mean_ps\":" << row.h_mean_ps << "}\n";
            }
            res.last_labels = std::move(lab);
        }
    }
    return res;
}

}  // namespace wtal::train
