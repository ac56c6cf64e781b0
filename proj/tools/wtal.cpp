// wtal: weakly-supervised temporal action localization toolkit.
// Subcommands: gen-data, train, infer, eval, sinkhorn.
// Exit codes: 0 success, 2 invalid input, 3 IO failure, 4 incompatible
// checkpoint.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wtal/checkpoint.hpp"
#include "wtal/dataset.hpp"
#include "wtal/errors.hpp"
#include "wtal/eval.hpp"
#include "wtal/inference.hpp"
#include "wtal/mat.hpp"
#include "wtal/network.hpp"
#include "wtal/ot.hpp"
#include "wtal/synthetic.hpp"
#include "wtal/threading.hpp"
#include "wtal/trainer.hpp"

namespace {

using json = nlohmann::json;
using namespace wtal;

json read_json_file(const std::string& path, bool parse_error_is_input) {
    std::istream* in = nullptr;
    std::ifstream file;
    if (path == "-") {
        in = &std::cin;
    } else {
        file.open(path);
        if (!file) throw IoError("cannot open: " + path);
        in = &file;
    }
    try {
        json j;
        (*in) >> j;
        return j;
    } catch (const json::exception& e) {
        const std::string msg = "JSON parse failure (" + path + "): " + e.what();
        if (parse_error_is_input) throw InputError(msg);
        throw IoError(msg);
    }
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& what) {
    if (!j.is_object()) throw InputError(what + ": expected a JSON object");
    for (const auto& [k, v] : j.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw InputError(what + ": unknown key '" + k + "'");
}

Mat mat_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw InputError(what + ": expected a non-empty 2-d array");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j.at(0).size());
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j.at(r);
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw InputError(what + ": ragged rows");
        for (int c = 0; c < cols; ++c) m.at(r, c) = row.at(c).get<double>();
    }
    return m;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows; ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir) {
    synth::SyntheticSpec spec;
    if (!spec_path.empty()) {
        const json j = read_json_file(spec_path, /*parse_error_is_input=*/true);
        check_keys(j,
                   {"n_videos", "num_classes", "fg_archetypes", "bg_archetypes", "feat_dim",
                    "t_min", "t_max", "len_min", "len_max", "fg_fraction", "noise_scale",
                    "snippet_seconds", "seed"},
                   "gen-data spec");
        try {
            if (j.contains("n_videos")) spec.n_videos = j["n_videos"].get<int>();
            if (j.contains("num_classes")) spec.num_classes = j["num_classes"].get<int>();
            if (j.contains("fg_archetypes")) spec.fg_archetypes = j["fg_archetypes"].get<int>();
            if (j.contains("bg_archetypes")) spec.bg_archetypes = j["bg_archetypes"].get<int>();
            if (j.contains("feat_dim")) spec.feat_dim = j["feat_dim"].get<int>();
            if (j.contains("t_min")) spec.t_min = j["t_min"].get<int>();
            if (j.contains("t_max")) spec.t_max = j["t_max"].get<int>();
            if (j.contains("len_min")) spec.len_min = j["len_min"].get<int>();
            if (j.contains("len_max")) spec.len_max = j["len_max"].get<int>();
            if (j.contains("fg_fraction")) spec.fg_fraction = j["fg_fraction"].get<double>();
            if (j.contains("noise_scale")) spec.noise_scale = j["noise_scale"].get<double>();
            if (j.contains("snippet_seconds"))
                spec.snippet_seconds = j["snippet_seconds"].get<double>();
            if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw InputError(std::string("gen-data spec: bad value: ") + e.what());
        }
    }
    const auto man = synth::generate(spec, out_dir);
    long segments = 0;
    for (const auto& v : man.videos) segments += static_cast<long>(v.segments.size());
    std::cout << "generated " << man.videos.size() << " videos, " << man.num_classes
              << " classes, " << segments << " ground-truth segments in " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainFlags {
    std::string config, data, out, metrics, dump_labels;
    double lambda_s = -1.0, lambda_c = -1.0;  // <0: not set
    long long seed = -1;
    int threads = 0;
    int epochs = 0;
};

train::TrainConfig parse_train_config(const std::string& path) {
    train::TrainConfig cfg;
    if (path.empty()) return cfg;
    const json j = read_json_file(path, /*parse_error_is_input=*/true);
    check_keys(j,
               {"t_snippets", "batch", "clusters", "hidden", "gamma", "omega", "eps", "rho",
                "sigma", "lambda_s", "lambda_c", "lr", "beta1", "beta2", "eps_adam", "epochs",
                "sinkhorn_iters", "seed", "threads", "scc_fuse_space"},
               "train config");
    try {
        if (j.contains("t_snippets")) cfg.t_snippets = j["t_snippets"].get<int>();
        if (j.contains("batch")) cfg.batch = j["batch"].get<int>();
        if (j.contains("clusters")) cfg.clusters = j["clusters"].get<int>();
        if (j.contains("hidden")) cfg.hidden = j["hidden"].get<int>();
        if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
        if (j.contains("omega")) cfg.omega = j["omega"].get<double>();
        if (j.contains("eps")) cfg.eps_sharp = j["eps"].get<double>();
        if (j.contains("rho")) cfg.rho = j["rho"].get<double>();
        if (j.contains("sigma")) cfg.sigma = j["sigma"].get<double>();
        if (j.contains("lambda_s")) cfg.lambda_s = j["lambda_s"].get<double>();
        if (j.contains("lambda_c")) cfg.lambda_c = j["lambda_c"].get<double>();
        if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
        if (j.contains("beta1")) cfg.beta1 = j["beta1"].get<double>();
        if (j.contains("beta2")) cfg.beta2 = j["beta2"].get<double>();
        if (j.contains("eps_adam")) cfg.eps_adam = j["eps_adam"].get<double>();
        if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
        if (j.contains("sinkhorn_iters")) cfg.sinkhorn_iters = j["sinkhorn_iters"].get<int>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
        if (j.contains("scc_fuse_space")) {
            const std::string s = j["scc_fuse_space"].get<std::string>();
            if (s == "logits")
                cfg.scc_fuse_probs = false;
            else if (s == "probs")
                cfg.scc_fuse_probs = true;
            else
                throw InputError("train config: scc_fuse_space must be 'logits' or 'probs'");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("train config: bad value: ") + e.what());
    }
    return cfg;
}

int cmd_train(const TrainFlags& f) {
    train::TrainConfig cfg = parse_train_config(f.config);
    if (f.lambda_s >= 0.0) cfg.lambda_s = f.lambda_s;
    if (f.lambda_c >= 0.0) cfg.lambda_c = f.lambda_c;
    if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
    if (f.threads > 0) cfg.threads = f.threads;
    if (f.epochs > 0) cfg.epochs = f.epochs;
    cfg.validate();

    const auto ds = train::load_dataset(f.data + "/manifest.json");
    const std::string metrics_path = f.metrics.empty() ? f.out + ".metrics.jsonl" : f.metrics;
    std::ofstream mf(metrics_path);
    if (!mf) throw IoError("cannot write metrics log: " + metrics_path);

    const auto res = train::train(ds, cfg, &mf, &std::cerr);
    ckpt::save_model(f.out, res.model, res.qc);

    if (!f.dump_labels.empty()) {
        json d;
        d["qa_pool"] = res.last_labels.qa_pool;
        d["rank"] = res.last_labels.rank;
        d["beta_c"] = res.last_labels.beta_c;
        d["qc"] = mat_to_json(res.last_labels.qc);
        d["qs"] = mat_to_json(res.last_labels.qs);
        d["lc_active"] = res.last_labels.lc_active;
        std::ofstream df(f.dump_labels);
        if (!df) throw IoError("cannot write label dump: " + f.dump_labels);
        df << d.dump(2) << '\n';
    }

    const auto& last = res.history.back();
    std::cout << "trained " << res.history.size() << " iterations; final total loss "
              << last.total << " (l_v " << last.l_v << ", l_a " << last.l_a << ", l_s "
              << last.l_s << ", l_c " << last.l_c << ")\n"
              << "checkpoint: " << f.out << "\nmetrics: " << metrics_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferFlags {
    std::string ckpt, data, out, config;
    int threads = 1;
};

infer::InferenceConfig parse_infer_config(const std::string& path) {
    infer::InferenceConfig cfg;
    if (path.empty()) return cfg;
    const json j = read_json_file(path, /*parse_error_is_input=*/true);
    check_keys(j, {"video_class_threshold", "thresholds", "nms_tiou", "oic_inflation", "omega"},
               "infer config");
    try {
        if (j.contains("video_class_threshold"))
            cfg.video_class_threshold = j["video_class_threshold"].get<double>();
        if (j.contains("thresholds")) cfg.thresholds = j["thresholds"].get<std::vector<double>>();
        if (j.contains("nms_tiou")) cfg.nms_tiou = j["nms_tiou"].get<double>();
        if (j.contains("oic_inflation")) cfg.oic_inflation = j["oic_inflation"].get<double>();
        if (j.contains("omega")) cfg.omega = j["omega"].get<double>();
    } catch (const json::exception& e) {
        throw InputError(std::string("infer config: bad value: ") + e.what());
    }
    return cfg;
}

int cmd_infer(const InferFlags& f) {
    const infer::InferenceConfig cfg = parse_infer_config(f.config);
    cfg.validate();
    const auto lm = ckpt::load_model(f.ckpt);  // CompatibilityError -> exit 4
    const std::string manifest_path = f.data + "/manifest.json";
    const auto man = data::load_manifest(manifest_path);

    Vec qc_fg(lm.qc.rows);
    for (int k = 0; k < lm.qc.rows; ++k) qc_fg[k] = lm.qc.at(k, 0);

    const int n = static_cast<int>(man.videos.size());
    std::vector<std::vector<infer::Proposal>> per_video(n);
    parallel_for(n, f.threads, [&](int i) {
        const auto& v = man.videos[i];
        Mat xr, xf;
        try {
            xr = data::read_features(data::resolve_path(manifest_path, v.rgb_path));
            xf = data::read_features(data::resolve_path(manifest_path, v.flow_path));
        } catch (const IoError& e) {
            throw IoError("video '" + v.id + "': " + e.what());
        }
        const auto ar = net::forward(xr, lm.model.rgb, /*cache=*/false);
        const auto af = net::forward(xf, lm.model.flow, /*cache=*/false);
        per_video[i] = infer::detect(ar, af, qc_fg, cfg, v.id, man.snippet_seconds);
    });

    std::vector<infer::Proposal> all;
    for (auto& props : per_video) all.insert(all.end(), props.begin(), props.end());
    eval::save_detections(f.out, all, man);
    std::cout << "wrote " << all.size() << " proposals for " << n << " videos to " << f.out
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalFlags {
    std::string dets, data, grid = "thumos", ap = "interp", out = "report";
};

int cmd_eval(const EvalFlags& f) {
    const auto man = data::load_manifest(f.data + "/manifest.json");
    const auto props = eval::load_detections(f.dets, man);

    std::vector<double> grid;
    std::vector<std::pair<double, double>> ranges;
    if (f.grid == "thumos") {
        grid = eval::grid_thumos();
        ranges = {{0.1, 0.5}, {0.1, 0.7}};
    } else if (f.grid == "anet") {
        grid = eval::grid_anet();
        ranges = {{0.5, 0.95}};
    } else {
        throw InputError("eval: --grid must be 'thumos' or 'anet'");
    }
    eval::ApVariant variant;
    if (f.ap == "interp")
        variant = eval::ApVariant::interpolated;
    else if (f.ap == "plain")
        variant = eval::ApVariant::plain;
    else
        throw InputError("eval: --ap must be 'interp' or 'plain'");

    const auto report = eval::map_report(props, man, grid, variant, ranges);
    eval::write_report_json(f.out + ".json", report);
    eval::write_report_csv(f.out + ".csv", report);

    for (size_t j = 0; j < report.tious.size(); ++j)
        std::cout << "mAP@" << report.tious[j] << " = " << report.map[j] << "\n";
    for (const auto& [name, v] : report.averages) std::cout << name << " = " << v << "\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "report: " << f.out << ".json, " << f.out << ".csv\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sinkhorn
// ---------------------------------------------------------------------------

int cmd_sinkhorn(const std::string& in_path) {
    const json j = read_json_file(in_path, /*parse_error_is_input=*/true);
    check_keys(j, {"logits", "beta", "prior", "eps", "iters"}, "sinkhorn input");
    if (!j.contains("logits") || !j.contains("beta"))
        throw InputError("sinkhorn input: 'logits' and 'beta' are required");
    const Mat logits = mat_from_json(j["logits"], "sinkhorn logits");
    Vec beta;
    try {
        beta = j["beta"].get<Vec>();
    } catch (const json::exception& e) {
        throw InputError(std::string("sinkhorn beta: ") + e.what());
    }
    Mat prior;
    const bool has_prior = j.contains("prior");
    if (has_prior) prior = mat_from_json(j["prior"], "sinkhorn prior");
    const double eps = j.contains("eps") ? j["eps"].get<double>() : 20.0;
    const int iters = j.contains("iters") ? j["iters"].get<int>() : 50;

    const Mat plan = ot::sinkhorn(logits, beta, has_prior ? &prior : nullptr, eps, iters);
    json out;
    out["plan"] = mat_to_json(plan);
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weakly-supervised temporal action localization toolkit"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic two-stream corpus");
    std::string gen_spec, gen_out;
    gen->add_option("--spec", gen_spec, "spec JSON (defaults apply when omitted)");
    gen->add_option("--out", gen_out, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model on a corpus");
    TrainFlags tf;
    tr->add_option("--config", tf.config, "training config JSON");
    tr->add_option("--data", tf.data, "corpus directory (contains manifest.json)")->required();
    tr->add_option("--out", tf.out, "checkpoint output path")->required();
    tr->add_option("--metrics", tf.metrics, "metrics JSONL path (default <out>.metrics.jsonl)");
    tr->add_option("--dump-labels", tf.dump_labels, "write final-iteration pseudo-labels JSON");
    tr->add_option("--lambda-s", tf.lambda_s, "override SCC loss weight");
    tr->add_option("--lambda-c", tf.lambda_c, "override CCC loss weight");
    tr->add_option("--seed", tf.seed, "override RNG seed");
    tr->add_option("--threads", tf.threads, "worker threads (1 = bitwise deterministic)");
    tr->add_option("--epochs", tf.epochs, "override epoch count");

    auto* inf = app.add_subcommand("infer", "run detection with a trained checkpoint");
    InferFlags iff;
    inf->add_option("--ckpt", iff.ckpt, "checkpoint path")->required();
    inf->add_option("--data", iff.data, "corpus directory")->required();
    inf->add_option("--out", iff.out, "detections JSON output path")->required();
    inf->add_option("--config", iff.config, "inference config JSON");
    inf->add_option("--threads", iff.threads, "worker threads");

    auto* ev = app.add_subcommand("eval", "score detections against ground truth");
    EvalFlags ef;
    ev->add_option("--dets", ef.dets, "detections JSON")->required();
    ev->add_option("--data", ef.data, "corpus directory")->required();
    ev->add_option("--grid", ef.grid, "tIoU grid: thumos (0.1:0.1:0.7) or anet (0.5:0.05:0.95)");
    ev->add_option("--ap", ef.ap, "AP variant: interp (all-point) or plain");
    ev->add_option("--out", ef.out, "report path prefix (default 'report')");

    auto* sk = app.add_subcommand("sinkhorn", "standalone entropic OT solve");
    std::string sk_in = "-";
    sk->add_option("--in", sk_in, "input JSON path ('-' for stdin)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_spec, gen_out);
        if (tr->parsed()) return cmd_train(tf);
        if (inf->parsed()) return cmd_infer(iff);
        if (ev->parsed()) return cmd_eval(ef);
        if (sk->parsed()) return cmd_sinkhorn(sk_in);
    } catch (const wtal::CompatibilityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const wtal::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const wtal::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
