// Acceptance suite: ten release criteria, one PASS/FAIL line each.
//
// Criteria 6-8 share one synthetic training run (built lazily, reused across
// test cases); criterion 10 drives the CLI binary on the same corpus.

#include <catch2/catch_amalgamated.hpp>

#ifndef WTAL_CLI_PATH
#error "WTAL_CLI_PATH must be defined (path to the wtal binary)"
#endif

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "wtal/eval.hpp"
#include "wtal/synthetic.hpp"
#include "wtal/trainer.hpp"

using namespace wtal;
using infer::Proposal;

namespace {

// ---- harness -----------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    return buf;
}

// One line per criterion, printed before the assertion so it always appears.
void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    REQUIRE(ok);
}

const std::string& scratch() {
    static const std::string dir = [] {
        std::string d = "/tmp/wtal_acceptance_" + std::to_string(::getpid());
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(WTAL_CLI_PATH) + " " + args + " > " + scratch() +
                            "/cli_out.txt 2> " + scratch() + "/cli_err.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// ---- shared synthetic training run (criteria 6-8, 10) -------------------------

// Corpus: 40 videos, 3 classes, T=60, D=32, one action class per video,
// 16 archetypes total (3 fg + 13 bg) so the K=16 cluster head has one natural
// mode per head, fg_fraction 0.25 so archetype masses are close to uniform.
// Config: B=8, K=16, 200 epochs; omega=0.9 keeps the top-k selection anchored
// to the supervised classifier while the attention bootstraps.
struct SharedRun {
    synth::SyntheticSpec sp;
    std::string dir;
    train::Dataset ds;
    train::TrainConfig cfg;
    train::TrainResult res;
    double train_secs = 0.0;
};

const SharedRun& shared_run() {
    static const SharedRun run = [] {
        SharedRun s;
        s.sp.bg_archetypes = 13;
        s.sp.fg_fraction = 0.25;
        s.dir = scratch() + "/corpus";
        synth::generate(s.sp, s.dir);
        s.ds = train::load_dataset(s.dir + "/manifest.json");
        s.cfg.t_snippets = 60;
        s.cfg.batch = 8;
        s.cfg.clusters = 16;
        s.cfg.hidden = 64;
        s.cfg.epochs = 200;
        s.cfg.lr = 1e-3;
        s.cfg.omega = 0.9;
        s.cfg.seed = 1;
        const auto t0 = Clock::now();
        s.res = train::train(s.ds, s.cfg);
        s.train_secs = secs_since(t0);
        return s;
    }();
    return run;
}

// ---- small numeric helpers -----------------------------------------------------

// Mann-Whitney ROC-AUC with midranks for ties.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
    const int n = static_cast<int>(scores.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * (i + j) + 1.0;
        for (int t = i; t <= j; ++t) rank[idx[t]] = mid;
        i = j + 1;
    }
    double rank_sum = 0.0;
    long n_pos = 0;
    for (int t = 0; t < n; ++t)
        if (positive[t]) {
            rank_sum += rank[t];
            ++n_pos;
        }
    const long n_neg = n - n_pos;
    REQUIRE(n_pos > 0);
    REQUIRE(n_neg > 0);
    return (rank_sum - static_cast<double>(n_pos) * (n_pos + 1.0) / 2.0) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// ---- independent oracles (criterion 9) -----------------------------------------

// Greedy NMS re-derived from the ordering contract.
std::vector<Proposal> oracle_nms(const std::vector<Proposal>& props, double thr) {
    std::vector<int> order(props.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (props[a].score != props[b].score) return props[a].score > props[b].score;
        return props[a].start_sec < props[b].start_sec;
    });
    std::vector<Proposal> kept;
    for (int i : order) {
        bool ok = true;
        for (const auto& q : kept)
            if (infer::tiou(props[i].start_sec, props[i].end_sec, q.start_sec, q.end_sec) >=
                thr) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(props[i]);
    }
    return kept;
}

// AP by enumerating every greedy-consistent injective det->gt assignment and
// keeping the best score (ties in the greedy argmax branch both ways).
double oracle_ap(const std::vector<Proposal>& dets_in, const std::vector<eval::GtInstance>& gts,
                 double thr, bool interpolated) {
    if (gts.empty()) return 0.0;
    std::vector<int> order(dets_in.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (dets_in[a].score != dets_in[b].score) return dets_in[a].score > dets_in[b].score;
        if (dets_in[a].start_sec != dets_in[b].start_sec)
            return dets_in[a].start_sec < dets_in[b].start_sec;
        return dets_in[a].video_id < dets_in[b].video_id;
    });
    const int n = static_cast<int>(dets_in.size());
    const int m = static_cast<int>(gts.size());

    std::vector<std::vector<double>> iou(n, std::vector<double>(m, 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (dets_in[order[i]].video_id == gts[j].video_id)
                iou[i][j] = eval::tiou(dets_in[order[i]].start_sec, dets_in[order[i]].end_sec,
                                       gts[j].start_sec, gts[j].end_sec);

    std::vector<std::vector<int>> valid;
    std::vector<int> cur(n, -1);
    std::vector<char> used(m, 0);
    auto rec = [&](auto&& self, int i) -> void {
        if (i == n) {
            valid.push_back(cur);
            return;
        }
        double best = 0.0;
        for (int j = 0; j < m; ++j)
            if (!used[j]) best = std::max(best, iou[i][j]);
        if (best < thr) {
            cur[i] = -1;
            self(self, i + 1);
            return;
        }
        for (int j = 0; j < m; ++j) {
            if (used[j] || iou[i][j] != best) continue;
            cur[i] = j;
            used[j] = 1;
            self(self, i + 1);
            used[j] = 0;
            cur[i] = -1;
        }
    };
    rec(rec, 0);
    REQUIRE_FALSE(valid.empty());

    double best_ap = -1.0;
    for (const auto& assign : valid) {
        Vec prec(n);
        int cum = 0;
        for (int i = 0; i < n; ++i) {
            cum += assign[i] >= 0 ? 1 : 0;
            prec[i] = static_cast<double>(cum) / (i + 1);
        }
        if (interpolated) {
            double run = 0.0;
            for (int i = n - 1; i >= 0; --i) {
                run = std::max(run, prec[i]);
                prec[i] = run;
            }
        }
        double ap = 0.0;
        for (int i = 0; i < n; ++i)
            if (assign[i] >= 0) ap += prec[i];
        best_ap = std::max(best_ap, ap / m);
    }
    return best_ap;
}

// ---- tiny-model gradient harness (criterion 4) ---------------------------------

double kink_margin(const Mat& x, const net::StreamParams& p) {
    double m = std::numeric_limits<double>::max();
    const Mat z1 = matmul(x, p.enc_video_w);
    const Mat z2 = matmul(x, p.enc_attn_w);
    for (int r = 0; r < x.rows; ++r)
        for (int j = 0; j < p.hidden(); ++j) {
            m = std::min(m, std::abs(z1.at(r, j) + p.enc_video_b[j]));
            m = std::min(m, std::abs(z2.at(r, j) + p.enc_attn_b[j]));
        }
    return m;
}

struct TinyBatch {
    net::ModelParams model;
    Mat x_rgb, x_flow;
    train::BatchLabels lab;
    train::TrainConfig cfg;
};

// T'=8 (B=2 x T=4), D=6, H=5, G=2, K=4; draws near a ReLU kink are rejected.
TinyBatch make_tiny(uint64_t seed) {
    const int b = 2, t = 4, d = 6, h = 5, g = 2, k = 4, n = b * t;
    TinyBatch tb;
    tb.cfg.t_snippets = t;
    tb.cfg.batch = b;
    tb.cfg.clusters = k;
    tb.cfg.hidden = h;
    tb.cfg.lambda_s = 0.7;
    tb.cfg.lambda_c = 0.4;
    tb.cfg.sinkhorn_iters = 5;

    std::mt19937_64 rng(seed);
    tb.model = net::init_model(d, h, g, k, 10.0, rng);
    tb.x_rgb = Mat(n, d);
    tb.x_flow = Mat(n, d);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : tb.x_rgb.d) v = nd(rng);
    for (auto& v : tb.x_flow.d) v = nd(rng);

    std::vector<std::vector<int>> y(b, std::vector<int>(g, 0));
    for (int vb = 0; vb < b; ++vb) y[vb][static_cast<int>(rng() % g)] = 1;
    Mat qc_prev(k, 2);
    for (int i = 0; i < k; ++i) {
        const double a = 0.3 + 0.4 * (static_cast<double>(rng() % 1000) / 1000.0);
        qc_prev.at(i, 0) = a;
        qc_prev.at(i, 1) = 1.0 - a;
    }
    const auto ar = net::forward(tb.x_rgb, tb.model.rgb);
    const auto af = net::forward(tb.x_flow, tb.model.flow);
    tb.lab = train::make_labels(ar, af, y, qc_prev, tb.cfg);
    return tb;
}

bool fd_valid(const TinyBatch& tb) {
    return tb.lab.lc_active &&
           std::min(kink_margin(tb.x_rgb, tb.model.rgb), kink_margin(tb.x_flow, tb.model.flow)) >=
               5e-3;
}

Proposal prop(const char* vid, int cls, double s, double e, double score) {
    Proposal p;
    p.video_id = vid;
    p.class_index = cls;
    p.start_sec = s;
    p.end_sec = e;
    p.score = score;
    return p;
}

bool same_props(const std::vector<Proposal>& a, const std::vector<Proposal>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].video_id != b[i].video_id || a[i].class_index != b[i].class_index ||
            a[i].start_sec != b[i].start_sec || a[i].end_sec != b[i].end_sec ||
            a[i].score != b[i].score)
            return false;
    return true;
}

}  // namespace

// ================================================================================
// 1-2: model size and cost
// ================================================================================

TEST_CASE("acceptance criterion 1: parameter count") {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    const net::ModelParams model = net::init_model(1024, 512, 20, 16, 10.0, rng);
    const long long params = net::count_params(model);
    const double el = secs_since(t0);
    const bool ok = params >= 2'100'000 && params <= 2'170'000 && el < 1.0;
    report(1, ok, strf("%lld trainable parameters in [2.10M, 2.17M] (%.2fs)", params, el));
}

TEST_CASE("acceptance criterion 2: MAC count") {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    const net::ModelParams model = net::init_model(1024, 512, 20, 16, 10.0, rng);
    const long long macs = net::count_macs(model, 750);
    const double el = secs_since(t0);
    const bool ok = macs >= 1'520'000'000LL && macs <= 1'680'000'000LL && el < 1.0;
    report(2, ok, strf("%lld MACs at T=750 in [1.52G, 1.68G] (%.2fs)", macs, el));
}

// ================================================================================
// 3: solver vs independent dual-ascent oracle
// ================================================================================

TEST_CASE("acceptance criterion 3: sinkhorn correctness on 100 random instances") {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dn(1, 8), dk(2, 5);
    std::uniform_real_distribution<double> dl(-1.0, 1.0), du(0.05, 1.0);
    const double eps = 2.0;

    double worst_oracle = 0.0, worst_row = 0.0, worst_col = 0.0, worst_rank1 = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = dn(rng), k = dk(rng);
        Mat logits(n, k);
        for (auto& v : logits.d) v = dl(rng);
        Vec beta(k);
        double bs = 0.0;
        for (auto& b : beta) {
            b = du(rng);
            bs += b;
        }
        for (auto& b : beta) b /= bs;
        Mat prior;
        const bool with_prior = trial % 2 == 0;
        if (with_prior) {
            prior = Mat(n, k);
            for (auto& v : prior.d) v = du(rng);
        }
        const Mat* pp = with_prior ? &prior : nullptr;

        const Mat q = ot::sinkhorn(logits, beta, pp, eps, 800);
        const Mat o = ot::ot_dual_oracle(logits, beta, pp, eps);
        for (size_t i = 0; i < q.size(); ++i)
            worst_oracle = std::max(worst_oracle, std::abs(q.d[i] - o.d[i]));

        for (int r = 0; r < n; ++r) {
            double rs = 0.0;
            for (int c = 0; c < k; ++c) rs += q.at(r, c);
            worst_row = std::max(worst_row, std::abs(rs - 1.0));
        }
        for (int c = 0; c < k; ++c) {
            double cs = 0.0;
            for (int r = 0; r < n; ++r) cs += q.at(r, c);
            worst_col = std::max(worst_col, std::abs(cs - n * beta[c]) / n);
        }

        // rank-1 factorization over the kernel: cross-ratios of Q ./ kernel agree
        double mx = -1e300;
        for (double v : logits.d) mx = std::max(mx, eps * v);
        Mat r(n, k);
        double scale = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) {
                double kern = std::exp(eps * logits.at(i, j) - mx);
                if (with_prior) kern *= prior.at(i, j);
                r.at(i, j) = q.at(i, j) / kern;
                scale = std::max(scale, r.at(i, j));
            }
        for (int i = 0; i < n; ++i)
            for (int m2 = 0; m2 < n; ++m2)
                for (int j = 0; j < k; ++j)
                    for (int l = 0; l < k; ++l)
                        worst_rank1 = std::max(
                            worst_rank1, std::abs(r.at(i, j) * r.at(m2, l) -
                                                  r.at(i, l) * r.at(m2, j)) /
                                             (scale * scale));
    }
    const double el = secs_since(t0);
    const bool ok = worst_oracle <= 1e-5 && worst_row <= 1e-6 && worst_col <= 1e-6 &&
                    worst_rank1 <= 1e-6 && el < 10.0;
    report(3, ok,
           strf("oracle diff %.1e <= 1e-5, marginals %.1e/%.1e <= 1e-6, rank-1 %.1e <= 1e-6 "
                "(%.2fs)",
                worst_oracle, worst_row, worst_col, worst_rank1, el));
}

// ================================================================================
// 4: analytic gradients vs finite differences
// ================================================================================

TEST_CASE("acceptance criterion 4: gradient suite on a tiny model over 10 seeds") {
    const auto t0 = Clock::now();
    int accepted = 0;
    double worst = 0.0;
    bool runaway = false;
    for (uint64_t seed = 1; accepted < 10; ++seed) {
        if (seed >= 200) {
            runaway = true;
            break;
        }
        TinyBatch tb = make_tiny(seed);
        if (!fd_valid(tb)) continue;
        ++accepted;

        const auto base = train::eval_batch(tb.model, tb.x_rgb, tb.x_flow, tb.lab, tb.cfg);
        std::vector<train::ParamRef> refs;
        train::collect_refs(tb.model.rgb, base.g_rgb, "rgb.", refs);
        train::collect_refs(tb.model.flow, base.g_flow, "flow.", refs);

        for (auto& r : refs)
            for (size_t j = 0; j < r.n; ++j) {
                const double save = r.p[j];
                auto fd = [&](double h) {
                    r.p[j] = save + h;
                    const double fp =
                        train::eval_batch(tb.model, tb.x_rgb, tb.x_flow, tb.lab, tb.cfg)
                            .lb.total;
                    r.p[j] = save - h;
                    const double fm =
                        train::eval_batch(tb.model, tb.x_rgb, tb.x_flow, tb.lab, tb.cfg)
                            .lb.total;
                    r.p[j] = save;
                    return (fp - fm) / (2.0 * h);
                };
                // h=1e-3 central differences with one Richardson refinement to
                // cancel the h^2 truncation of the sharp cosine-head path.
                const double numeric = (4.0 * fd(5e-4) - fd(1e-3)) / 3.0;
                const double analytic = r.g[j];
                worst = std::max(worst, std::abs(analytic - numeric) /
                                            std::max({std::abs(analytic), std::abs(numeric),
                                                      1e-6}));
            }
    }
    const double el = secs_since(t0);
    const bool ok = !runaway && accepted == 10 && worst <= 1e-4 && el < 30.0;
    report(4, ok,
           strf("max relative gradient error %.2e <= 1e-4 over %d seeds (%.2fs)", worst,
                accepted, el));
}

// ================================================================================
// 5: GCE limits
// ================================================================================

TEST_CASE("acceptance criterion 5: GCE limiting behavior") {
    const auto t0 = Clock::now();
    // gamma -> 0 recovers CE: per-snippet GCE via a single positive snippet.
    double worst_rel = 0.0;
    for (int i = 1; i <= 9; ++i) {
        const double p = 0.1 * i;
        const double gce = losses::loss_attention_gce({p}, {1}, 1e-3);
        worst_rel = std::max(worst_rel, std::abs(gce - (-std::log(p))) / (-std::log(p)));
    }
    // frozen value plus an independent scalar evaluation
    const double got = losses::loss_attention_gce({0.5}, {1}, 0.7);
    const double independent = (1.0 - std::pow(0.5, 0.7)) / 0.7;
    const double el = secs_since(t0);
    const bool ok = worst_rel <= 1e-2 && std::abs(got - 0.5492) <= 1e-4 &&
                    std::abs(got - independent) <= 1e-12 && el < 1.0;
    report(5, ok,
           strf("gamma->0 max rel err %.2e <= 1e-2; GCE(0.5, 0.7) = %.6f = 0.5492 +/- 1e-4 "
                "(%.2fs)",
                worst_rel, got, el));
}

// ================================================================================
// 6-8: synthetic training run
// ================================================================================

TEST_CASE("acceptance criterion 6: equipartition of the mean cluster assignment") {
    const auto& run = shared_run();
    // mean P^S over the whole corpus with the trained model, streams averaged
    Vec mass(run.cfg.clusters, 0.0);
    long rows = 0;
    for (size_t v = 0; v < run.ds.rgb.size(); ++v) {
        const auto ar = net::forward(run.ds.rgb[v], run.res.model.rgb);
        const auto af = net::forward(run.ds.flow[v], run.res.model.flow);
        for (int t = 0; t < run.ds.rgb[v].rows; ++t, ++rows)
            for (int k = 0; k < run.cfg.clusters; ++k)
                mass[k] += 0.5 * (ar.ps.at(t, k) + af.ps.at(t, k));
    }
    const double h = ot::entropy(mass);
    const double bar = 0.95 * std::log(static_cast<double>(run.cfg.clusters));
    const bool ok = h >= bar && run.train_secs < 600.0;
    report(6, ok,
           strf("H(mean P^S) = %.4f >= %.4f nats after 200 epochs (train %.1fs < 600s)", h,
                bar, run.train_secs));
}

TEST_CASE("acceptance criterion 7: cluster-label entropy collapses and stays low") {
    const auto& run = shared_run();
    const auto& hist = run.res.history;
    const int n = static_cast<int>(hist.size());
    int first_below = -1;
    for (int t = 0; t < n; ++t)
        if (hist[t].h_qc < 0.2) {
            first_below = t;
            break;
        }
    double max_final_half = 0.0;
    for (int t = n / 2; t < n; ++t) max_final_half = std::max(max_final_half, hist[t].h_qc);
    const bool ok = first_below >= 0 && first_below < n / 4 && max_final_half < 0.2;
    report(7, ok,
           strf("H(Q^C) < 0.2 nats from iteration %d of %d (first quarter ends at %d); "
                "final-half max %.4f",
                first_below, n, n / 4 - 1, max_final_half));
}

TEST_CASE("acceptance criterion 8: clustering-assisted ranking on held-out splits") {
    const auto& run = shared_run();
    const auto t0 = Clock::now();
    const auto& sp = run.sp;
    const int n_fg = sp.fg_count(), n_arch = n_fg + sp.bg_archetypes;

    // test videos drawn around the same archetype means as the training corpus
    synth::Gauss mean_rng(sp.seed);
    Mat means(n_arch, sp.feat_dim);
    for (size_t i = 0; i < means.size(); ++i) means.d[i] = 4.0 * mean_rng.next();

    Vec qc_fg(run.cfg.clusters);
    for (int k = 0; k < run.cfg.clusters; ++k) qc_fg[k] = run.res.qc.at(k, 0);

    double sum_pa = 0.0, sum_pm = 0.0;
    for (std::uint64_t split_seed : {101u, 202u, 303u}) {
        std::mt19937_64 structure(split_seed ^ 0x7e57u);
        synth::Gauss noise_r(split_seed + 11), noise_f(split_seed + 12);
        std::vector<double> score_pa, score_pm;
        std::vector<int> is_fg;
        for (int v = 0; v < 12; ++v) {
            const int len_video = 60;
            Mat rgb(len_video, sp.feat_dim), flow(len_video, sp.feat_dim);
            std::vector<int> fg(len_video, 0);
            const int video_class = synth::detail::uniform_int(structure, 0, n_fg - 1);
            int filled = 0, fg_filled = 0;
            while (filled < len_video) {
                int len = synth::detail::uniform_int(structure, sp.len_min, sp.len_max);
                len = std::min(len, len_video - filled);
                const bool want_fg = fg_filled < sp.fg_fraction * filled;
                const int arch =
                    want_fg ? video_class
                            : n_fg + synth::detail::uniform_int(structure, 0,
                                                                sp.bg_archetypes - 1);
                for (int t = filled; t < filled + len; ++t) {
                    fg[t] = arch < n_fg ? 1 : 0;
                    for (int d = 0; d < sp.feat_dim; ++d) {
                        rgb.at(t, d) = means.at(arch, d) + noise_r.next();
                        flow.at(t, d) = means.at(arch, d) + noise_f.next();
                    }
                }
                if (arch < n_fg) fg_filled += len;
                filled += len;
            }
            const auto ar = net::forward(rgb, run.res.model.rgb);
            const auto af = net::forward(flow, run.res.model.flow);
            Mat ps_avg(len_video, run.cfg.clusters);
            Vec pa_avg(len_video);
            for (int t = 0; t < len_video; ++t) {
                pa_avg[t] = 0.5 * (ar.pa[t] + af.pa[t]);
                for (int k = 0; k < run.cfg.clusters; ++k)
                    ps_avg.at(t, k) = 0.5 * (ar.ps.at(t, k) + af.ps.at(t, k));
            }
            const Vec pt = infer::transform_pt(ps_avg, qc_fg);
            const Vec pm = infer::fuse_pm(pa_avg, pt);
            for (int t = 0; t < len_video; ++t) {
                score_pa.push_back(pa_avg[t]);
                score_pm.push_back(pm[t]);
                is_fg.push_back(fg[t]);
            }
        }
        sum_pa += roc_auc(score_pa, is_fg);
        sum_pm += roc_auc(score_pm, is_fg);
    }
    const double mean_pa = sum_pa / 3.0, mean_pm = sum_pm / 3.0;
    const double el = secs_since(t0);
    const bool ok = mean_pm >= mean_pa - 0.01 && mean_pm >= 0.90 && el < 60.0;
    report(8, ok,
           strf("AUC(P^M) = %.4f >= max(AUC(P^A) - 0.01 = %.4f, 0.90) over 3 splits (%.2fs)",
                mean_pm, mean_pa - 0.01, el));
}

// ================================================================================
// 9: detection pipeline oracles
// ================================================================================

TEST_CASE("acceptance criterion 9: NMS / AP oracles and exact cases") {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string fail;

    // run-extraction example: one plateau above threshold
    {
        const auto runs = infer::extract_runs({0.0, 0.0, 1.0, 1.0, 0.0, 0.0}, 0.5);
        if (!(runs.size() == 1 && runs[0].first == 2 && runs[0].last == 3)) {
            ok = false;
            fail += " run-extraction";
        }
    }

    // NMS: exhaustive subsets (size <= 4) of a fixed pool, plus random instances
    {
        const std::vector<Proposal> pool = {
            prop("v", 0, 0.0, 2.0, 0.90), prop("v", 0, 1.0, 3.0, 0.80),
            prop("v", 1, 1.5, 2.5, 0.70), prop("v", 0, 4.0, 6.0, 0.60),
            prop("v", 1, 4.5, 5.0, 0.50), prop("v", 0, 0.5, 1.5, 0.40)};
        bool nms_ok = true;
        for (unsigned mask = 0; mask < (1u << pool.size()); ++mask) {
            if (__builtin_popcount(mask) > 4) continue;
            std::vector<Proposal> props;
            for (size_t i = 0; i < pool.size(); ++i)
                if (mask & (1u << i)) props.push_back(pool[i]);
            for (double thr : {0.2, 0.5, 0.8})
                nms_ok = nms_ok && same_props(infer::nms(props, thr), oracle_nms(props, thr));
        }
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> ds(0.0, 10.0), dl(0.5, 3.0), dscore(0.0, 1.0),
            dthr(0.2, 0.8);
        for (int trial = 0; trial < 200; ++trial) {
            const int n = trial % 5;
            std::vector<Proposal> props;
            for (int i = 0; i < n; ++i) {
                const double s = ds(rng);
                props.push_back(prop("v", 0, s, s + dl(rng), dscore(rng)));
            }
            const double thr = dthr(rng);
            nms_ok = nms_ok && same_props(infer::nms(props, thr), oracle_nms(props, thr));
        }
        if (!nms_ok) {
            ok = false;
            fail += " nms-oracle";
        }
    }

    // AP: exhaustive det subsets (<= 4) of a pool against every gt subset,
    // plus random instances; both variants
    {
        bool ap_ok = true;
        const std::vector<eval::GtInstance> gt_pool = {
            {"v", 0.0, 2.0}, {"v", 5.0, 8.0}, {"w", 1.0, 3.0}};
        const std::vector<Proposal> det_pool = {
            prop("v", 0, 0.0, 2.0, 0.9), prop("v", 0, 0.5, 2.5, 0.8),
            prop("v", 0, 5.5, 8.5, 0.7), prop("w", 0, 1.0, 2.0, 0.6),
            prop("w", 0, 6.0, 7.0, 0.5)};
        for (unsigned dm = 0; dm < (1u << det_pool.size()); ++dm) {
            if (__builtin_popcount(dm) > 4) continue;
            std::vector<Proposal> dets;
            for (size_t i = 0; i < det_pool.size(); ++i)
                if (dm & (1u << i)) dets.push_back(det_pool[i]);
            for (unsigned gm = 1; gm < (1u << gt_pool.size()); ++gm) {
                std::vector<eval::GtInstance> gts;
                for (size_t i = 0; i < gt_pool.size(); ++i)
                    if (gm & (1u << i)) gts.push_back(gt_pool[i]);
                for (double thr : {0.3, 0.5, 0.7}) {
                    const double a1 = eval::average_precision(dets, gts, thr,
                                                              eval::ApVariant::interpolated);
                    const double a2 =
                        eval::average_precision(dets, gts, thr, eval::ApVariant::plain);
                    ap_ok = ap_ok && std::abs(a1 - oracle_ap(dets, gts, thr, true)) <= 1e-12 &&
                            std::abs(a2 - oracle_ap(dets, gts, thr, false)) <= 1e-12;
                }
            }
        }
        std::mt19937_64 rng(32);
        std::uniform_real_distribution<double> ds(0.0, 10.0), dl(0.5, 3.0);
        for (int trial = 0; trial < 60; ++trial) {
            std::vector<eval::GtInstance> gts;
            const int m = 1 + trial % 4;
            for (int i = 0; i < m; ++i) {
                const double s = ds(rng);
                gts.push_back({i % 2 ? "v" : "w", s, s + dl(rng)});
            }
            std::vector<Proposal> dets;
            const int n = (trial * 7) % 5;
            for (int i = 0; i < n; ++i) {
                const double s = ds(rng);
                dets.push_back(prop(i % 2 ? "v" : "w", 0, s, s + dl(rng), 0.9 - 0.07 * i));
            }
            for (double thr : {0.3, 0.5, 0.7}) {
                const double a1 =
                    eval::average_precision(dets, gts, thr, eval::ApVariant::interpolated);
                const double a2 =
                    eval::average_precision(dets, gts, thr, eval::ApVariant::plain);
                ap_ok = ap_ok && std::abs(a1 - oracle_ap(dets, gts, thr, true)) <= 1e-12 &&
                        std::abs(a2 - oracle_ap(dets, gts, thr, false)) <= 1e-12;
            }
        }
        if (!ap_ok) {
            ok = false;
            fail += " ap-oracle";
        }
    }

    // perfect detections give mAP exactly 1.0
    {
        data::Manifest man;
        man.num_classes = 2;
        man.class_names = {"jump", "swim"};
        man.snippet_seconds = 1.0;
        data::VideoEntry v0;
        v0.id = "v0";
        v0.labels = {0, 1};
        v0.segments.push_back({0.0, 2.0, 0});
        v0.segments.push_back({5.0, 8.0, 0});
        v0.segments.push_back({10.0, 12.0, 1});
        man.videos.push_back(v0);
        data::VideoEntry v1;
        v1.id = "v1";
        v1.labels = {1};
        v1.segments.push_back({3.0, 6.0, 1});
        man.videos.push_back(v1);

        std::vector<Proposal> dets;
        double score = 0.9;
        for (const auto& v : man.videos)
            for (const auto& s : v.segments) {
                dets.push_back(prop(v.id.c_str(), s.class_index, s.start_sec, s.end_sec, score));
                score -= 0.1;
            }
        const auto rep = eval::map_report(dets, man, eval::grid_thumos());
        for (double m : rep.map)
            if (m != 1.0) {
                ok = false;
                fail += " perfect-map";
                break;
            }
    }

    const double el = secs_since(t0);
    ok = ok && el < 10.0;
    report(9, ok,
           strf("NMS and AP match brute-force oracles; perfect detections score mAP 1.0; "
                "run extraction exact%s%s (%.2fs)",
                fail.empty() ? "" : "; FAILED:", fail.c_str(), el));
}

// ================================================================================
// 10: bitwise determinism through the CLI
// ================================================================================

TEST_CASE("acceptance criterion 10: cmd_train determinism at --threads 1") {
    const auto& run = shared_run();  // corpus + criterion-6 budget
    const auto t0 = Clock::now();

    const std::string cfg_path = scratch() + "/c10_config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << "{\"t_snippets\":60,\"batch\":8,\"clusters\":16,\"hidden\":64,"
            << "\"epochs\":5,\"lr\":0.001,\"omega\":0.9,\"seed\":1}\n";
    }
    const std::string ck1 = scratch() + "/c10_run1.ckpt";
    const std::string ck2 = scratch() + "/c10_run2.ckpt";
    const int rc1 = run_cli("train --data " + run.dir + " --out " + ck1 + " --config " +
                            cfg_path + " --threads 1");
    const int rc2 = run_cli("train --data " + run.dir + " --out " + ck2 + " --config " +
                            cfg_path + " --threads 1");
    const double el = secs_since(t0);
    const bool identical = rc1 == 0 && rc2 == 0 && read_bytes(ck1) == read_bytes(ck2);
    const bool ok = identical && el <= 2.0 * 600.0;
    report(10, ok,
           strf("two --threads 1 runs: exit %d/%d, checkpoints byte-identical=%s (%.1fs <= "
                "2x criterion-6 budget)",
                rc1, rc2, identical ? "yes" : "no", el));
}
