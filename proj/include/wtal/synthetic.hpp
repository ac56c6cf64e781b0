#pragma once
// Synthetic corpus generator: archetype-mean Gaussian features at desk scale.
// Three independent RNG streams (structure, RGB noise, Flow noise) keep the
// two stream files correlated in content but independent in noise, and make
// the whole corpus byte-identical for a given seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "wtal/dataset.hpp"
#include "wtal/errors.hpp"
#include "wtal/mat.hpp"

namespace wtal::synth {

// Box-Muller over the standardized mt19937_64 sequence; avoids the
// implementation-defined std::normal_distribution draw order.
struct Gauss {
    std::mt19937_64 eng;
    bool have_spare = false;
    double spare = 0.0;

    explicit Gauss(std::uint64_t seed) : eng(seed) {}

    double uniform01() {
        // 53-bit mantissa draw in (0,1]; never 0 so log() is safe.
        return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
    }

    double next() {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare = r * std::sin(a);
        have_spare = true;
        return r * std::cos(a);
    }
};

struct SyntheticSpec {
    int n_videos = 40;
    int num_classes = 3;        // G
    int fg_archetypes = 0;      // 0 -> num_classes (archetype a -> class a % G)
    int bg_archetypes = 2;      // >= 1 so M >= G + 1
    int feat_dim = 32;          // D
    int t_min = 60, t_max = 60; // snippets per video
    int len_min = 8, len_max = 20;  // segment length in snippets
    double fg_fraction = 0.4;   // target foreground snippet share
    double noise_scale = 1.0;
    double snippet_seconds = 1.0;
    std::uint64_t seed = 7;

    int fg_count() const { return fg_archetypes > 0 ? fg_archetypes : num_classes; }

    void validate() const {
        require(n_videos >= 1, "synthetic: n_videos must be >= 1");
        require(num_classes >= 1, "synthetic: num_classes must be >= 1");
        require(bg_archetypes >= 1, "synthetic: need at least one background archetype");
        require(fg_count() >= num_classes, "synthetic: need an archetype for every class");
        require(feat_dim >= 1, "synthetic: feat_dim must be >= 1");
        require(1 <= t_min && t_min <= t_max, "synthetic: bad video length range");
        require(1 <= len_min && len_min <= len_max, "synthetic: bad segment length range");
        require(fg_fraction > 0.0 && fg_fraction < 1.0, "synthetic: fg_fraction in (0,1)");
        require(noise_scale >= 0.0, "synthetic: noise_scale must be >= 0");
        require(snippet_seconds > 0.0, "synthetic: snippet_seconds must be positive");
    }
};

namespace detail {

struct SegmentPlan {
    int len;
    int archetype;  // < fg_count -> foreground, else background
};

inline int uniform_int(std::mt19937_64& eng, int lo, int hi) {
    // rejection-free modulo is biased; range here is tiny so draw 64 bits
    // and reduce over a rejection band for exact uniformity.
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return lo + static_cast<int>(x % span);
}

}  // namespace detail

// Generates feature files + manifest under out_dir.  Returns the manifest
// (already saved to out_dir/manifest.json).
inline data::Manifest generate(const SyntheticSpec& spec, const std::string& out_dir) {
    spec.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    const int g = spec.num_classes;
    const int n_fg = spec.fg_count();
    const int n_arch = n_fg + spec.bg_archetypes;

    // archetype means: M x D entries of 4 * N(0,1), fixed draw order
    Gauss mean_rng(spec.seed);
    Mat means(n_arch, spec.feat_dim);
    for (size_t i = 0; i < means.size(); ++i) means.d[i] = 4.0 * mean_rng.next();

    std::mt19937_64 structure(spec.seed ^ 0x5eed0001u);
    Gauss rgb_noise(spec.seed + 1);
    Gauss flow_noise(spec.seed + 2);

    data::Manifest man;
    man.num_classes = g;
    man.snippet_seconds = spec.snippet_seconds;
    for (int c = 0; c < g; ++c) man.class_names.push_back("class_" + std::to_string(c));

    // bang-bang controller on the global foreground snippet share
    long fg_snips = 0, total_snips = 0;

    for (int v = 0; v < spec.n_videos; ++v) {
        const int len_video = detail::uniform_int(structure, spec.t_min, spec.t_max);

        // One action class per video: weak supervision needs video label sets
        // that discriminate, so foreground segments draw only from archetypes
        // mapping to this class (archetype a -> class a % G).
        const int video_class = detail::uniform_int(structure, 0, g - 1);
        const int n_arch_class = (n_fg - 1 - video_class) / g + 1;
        auto fg_archetype = [&] {
            return video_class + g * detail::uniform_int(structure, 0, n_arch_class - 1);
        };

        std::vector<detail::SegmentPlan> plan;
        int filled = 0;
        bool has_fg = false;
        while (filled < len_video) {
            int len = detail::uniform_int(structure, spec.len_min, spec.len_max);
            len = std::min(len, len_video - filled);
            const double frac =
                total_snips + filled == 0
                    ? 0.0
                    : static_cast<double>(fg_snips + [&] {
                          int s = 0;
                          for (const auto& p : plan)
                              if (p.archetype < n_fg) s += p.len;
                          return s;
                      }()) / (total_snips + filled);
            const bool want_fg = frac < spec.fg_fraction;
            int arch;
            if (want_fg) {
                arch = fg_archetype();
                has_fg = true;
            } else {
                arch = n_fg + detail::uniform_int(structure, 0, spec.bg_archetypes - 1);
            }
            plan.push_back({len, arch});
            filled += len;
        }
        if (!has_fg) {
            // weak supervision requires at least one action per video
            plan.back().archetype = fg_archetype();
        }

        // realized counters
        for (const auto& p : plan)
            if (p.archetype < n_fg) fg_snips += p.len;
        total_snips += len_video;

        // features: snippet t of a segment = mean[archetype] + noise
        Mat rgb(len_video, spec.feat_dim), flow(len_video, spec.feat_dim);
        int t = 0;
        for (const auto& p : plan) {
            for (int i = 0; i < p.len; ++i, ++t) {
                const double* mu = means.row(p.archetype);
                double* r = rgb.row(t);
                double* f = flow.row(t);
                for (int dd = 0; dd < spec.feat_dim; ++dd) {
                    r[dd] = mu[dd] + spec.noise_scale * rgb_noise.next();
                    f[dd] = mu[dd] + spec.noise_scale * flow_noise.next();
                }
            }
        }

        data::VideoEntry entry;
        entry.id = "vid_" + std::to_string(v);
        entry.rgb_path = entry.id + "_rgb.casf";
        entry.flow_path = entry.id + "_flow.casf";
        data::write_features((fs::path(out_dir) / entry.rgb_path).string(), rgb);
        data::write_features((fs::path(out_dir) / entry.flow_path).string(), flow);

        // ground truth: maximal same-class foreground runs
        int pos = 0;
        int run_start = -1, run_class = -1;
        auto flush = [&](int end_idx) {
            if (run_start >= 0) {
                data::GtSegment s;
                s.start_sec = run_start * spec.snippet_seconds;
                s.end_sec = end_idx * spec.snippet_seconds;
                s.class_index = run_class;
                entry.segments.push_back(s);
                run_start = -1;
            }
        };
        for (const auto& p : plan) {
            const int cls = p.archetype < n_fg ? p.archetype % g : -1;
            if (cls != run_class) {
                flush(pos);
                if (cls >= 0) {
                    run_start = pos;
                }
                run_class = cls;
            }
            pos += p.len;
        }
        flush(pos);

        std::vector<int> labels;
        for (const auto& s : entry.segments) labels.push_back(s.class_index);
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        entry.labels = std::move(labels);

        man.videos.push_back(std::move(entry));
    }

    data::save_manifest((fs::path(out_dir) / "manifest.json").string(), man);
    return man;
}

}  // namespace wtal::synth
