#pragma once
// Dataset plumbing: per-stream binary feature files and the JSON manifest
// that ties videos, weak labels, and (optionally) ground-truth segments
// together.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wtal/errors.hpp"
#include "wtal/mat.hpp"

namespace wtal::data {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Manifest model
// ---------------------------------------------------------------------------

struct GtSegment {
    double start_sec = 0.0;
    double end_sec = 0.0;
    int class_index = 0;
};

struct VideoEntry {
    std::string id;
    std::string rgb_path;   // relative to the manifest directory unless absolute
    std::string flow_path;
    std::vector<int> labels;          // video-level class indices, at least one
    std::vector<GtSegment> segments;  // optional for training, needed for eval
};

struct Manifest {
    int num_classes = 0;
    std::vector<std::string> class_names;
    double snippet_seconds = 1.0;
    std::vector<VideoEntry> videos;
};

inline void validate_manifest(const Manifest& m) {
    require(m.num_classes >= 1, "manifest: num_classes must be >= 1");
    require(m.snippet_seconds > 0.0, "manifest: snippet_seconds must be positive");
    if (!m.class_names.empty())
        require(static_cast<int>(m.class_names.size()) == m.num_classes,
                "manifest: class_names length must match num_classes");
    for (const auto& v : m.videos) {
        require(!v.id.empty(), "manifest: video id must be non-empty");
        require(!v.labels.empty(), "manifest: video '" + v.id + "' has no labels");
        for (int c : v.labels)
            require(c >= 0 && c < m.num_classes,
                    "manifest: label out of range in video '" + v.id + "'");
        for (const auto& s : v.segments) {
            require(s.start_sec >= 0.0 && s.end_sec > s.start_sec,
                    "manifest: bad segment bounds in video '" + v.id + "'");
            require(s.class_index >= 0 && s.class_index < m.num_classes,
                    "manifest: segment class out of range in video '" + v.id + "'");
        }
    }
}

inline Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("manifest parse failure (" + path + "): " + e.what());
    }
    Manifest m;
    try {
        m.num_classes = j.at("num_classes").get<int>();
        m.snippet_seconds = j.at("snippet_seconds").get<double>();
        if (j.contains("class_names"))
            m.class_names = j["class_names"].get<std::vector<std::string>>();
        for (const auto& jv : j.at("videos")) {
            VideoEntry v;
            v.id = jv.at("id").get<std::string>();
            v.rgb_path = jv.at("rgb_path").get<std::string>();
            v.flow_path = jv.at("flow_path").get<std::string>();
            v.labels = jv.at("labels").get<std::vector<int>>();
            if (jv.contains("segments")) {
                for (const auto& js : jv["segments"]) {
                    GtSegment s;
                    s.start_sec = js.at("start_sec").get<double>();
                    s.end_sec = js.at("end_sec").get<double>();
                    s.class_index = js.at("class").get<int>();
                    v.segments.push_back(s);
                }
            }
            m.videos.push_back(std::move(v));
        }
    } catch (const json::exception& e) {
        throw InputError("manifest schema violation (" + path + "): " + e.what());
    }
    validate_manifest(m);
    return m;
}

inline void save_manifest(const std::string& path, const Manifest& m) {
    validate_manifest(m);
    json j;
    j["num_classes"] = m.num_classes;
    j["snippet_seconds"] = m.snippet_seconds;
    if (!m.class_names.empty()) j["class_names"] = m.class_names;
    j["videos"] = json::array();
    for (const auto& v : m.videos) {
        json jv;
        jv["id"] = v.id;
        jv["rgb_path"] = v.rgb_path;
        jv["flow_path"] = v.flow_path;
        jv["labels"] = v.labels;
        jv["segments"] = json::array();
        for (const auto& s : v.segments)
            jv["segments"].push_back(
                {{"start_sec", s.start_sec}, {"end_sec", s.end_sec}, {"class", s.class_index}});
        j["videos"].push_back(std::move(jv));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("manifest write failure: " + path);
}

// Feature paths in the manifest resolve against the manifest's directory.
inline std::string resolve_path(const std::string& manifest_path, const std::string& rel) {
    namespace fs = std::filesystem;
    fs::path p(rel);
    if (p.is_absolute()) return p.string();
    return (fs::path(manifest_path).parent_path() / p).string();
}

// ---------------------------------------------------------------------------
// Feature files: magic "CASF", version u32=1, T u32, D u32, T*D f32 LE
// row-major.  Stored single precision; widened to double on load.
// ---------------------------------------------------------------------------

inline constexpr char kFeatureMagic[4] = {'C', 'A', 'S', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

namespace detail {

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated feature file: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32_le(out, bits);
}

inline float get_f32_le(std::istream& in, const std::string& path) {
    std::uint32_t bits = get_u32_le(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

inline void write_features(const std::string& path, const Mat& x) {
    require_shape(x.rows >= 1 && x.cols >= 1, "write_features: empty matrix");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write feature file: " + path);
    out.write(kFeatureMagic, 4);
    detail::put_u32_le(out, kFeatureVersion);
    detail::put_u32_le(out, static_cast<std::uint32_t>(x.rows));
    detail::put_u32_le(out, static_cast<std::uint32_t>(x.cols));
    for (double v : x.d) detail::put_f32_le(out, static_cast<float>(v));
    if (!out) throw IoError("feature write failure: " + path);
}

inline Mat read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0)
        throw IoError("not a feature file: " + path);
    const std::uint32_t version = detail::get_u32_le(in, path);
    if (version != kFeatureVersion)
        throw IoError("unsupported feature file version in " + path);
    const std::uint32_t t = detail::get_u32_le(in, path);
    const std::uint32_t d = detail::get_u32_le(in, path);
    if (t == 0 || d == 0 || t > (1u << 24) || d > (1u << 24))
        throw IoError("implausible feature dimensions in " + path);
    Mat x(static_cast<int>(t), static_cast<int>(d));
    for (size_t i = 0; i < x.size(); ++i)
        x.d[i] = static_cast<double>(detail::get_f32_le(in, path));
    return x;
}

}  // namespace wtal::data
