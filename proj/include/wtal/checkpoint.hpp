#pragma once

// Binary tensor container used for model checkpoints.
//
// Layout (all integers little-endian u32, payloads little-endian f64):
//
//   "CASE" | version | record* (until EOF)
//   record := name_len | name bytes | rank | dims[rank] | f64[prod(dims)]
//
// A model checkpoint stores every trainable tensor of both streams, the two
// cosine temperatures, and the cluster F&B posterior ("qc") from the last
// training iteration, which inference requires.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wtal/errors.hpp"
#include "wtal/mat.hpp"
#include "wtal/network.hpp"

namespace wtal::ckpt {

constexpr char kMagic[4] = {'C', 'A', 'S', 'E'};
constexpr uint32_t kVersion = 1;

struct Tensor {
    std::vector<uint32_t> dims;
    Vec data;

    static Tensor scalar(double v) { return Tensor{{1}, Vec{v}}; }
    static Tensor from_vec(const Vec& v) { return Tensor{{static_cast<uint32_t>(v.size())}, v}; }
    static Tensor from_mat(const Mat& m) {
        return Tensor{{static_cast<uint32_t>(m.rows), static_cast<uint32_t>(m.cols)}, m.d};
    }
    Mat to_mat() const {
        if (dims.size() != 2) throw IoError("checkpoint: tensor is not rank-2");
        Mat m(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
        m.d = data;
        return m;
    }
};

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_u32(std::istream& is, uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

inline bool get_f64(std::istream& is, double& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &u, 8);
    return true;
}

}  // namespace detail

inline void save_tensors(const std::string& path,
                         const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 4);
    detail::put_u32(os, kVersion);
    for (const auto& [name, t] : tensors) {
        size_t count = 1;
        for (uint32_t d : t.dims) count *= d;
        if (count != t.data.size()) throw IoError("checkpoint: dims/payload mismatch for " + name);
        detail::put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::put_u32(os, static_cast<uint32_t>(t.dims.size()));
        for (uint32_t d : t.dims) detail::put_u32(os, d);
        for (double v : t.data) detail::put_f64(os, v);
    }
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

inline std::map<std::string, Tensor> load_tensors(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: corrupt magic: " + path);
    uint32_t version = 0;
    if (!detail::get_u32(is, version)) throw IoError("checkpoint: truncated header: " + path);
    if (version != kVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));

    std::map<std::string, Tensor> out;
    for (;;) {
        uint32_t name_len = 0;
        if (!detail::get_u32(is, name_len)) {
            if (is.eof()) break;  // clean end of records
            throw IoError("checkpoint: truncated record: " + path);
        }
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw IoError("checkpoint: truncated name: " + path);
        uint32_t rank = 0;
        if (!detail::get_u32(is, rank)) throw IoError("checkpoint: truncated rank: " + path);
        if (rank > 8) throw IoError("checkpoint: implausible rank in " + path);
        Tensor t;
        size_t count = 1;
        for (uint32_t i = 0; i < rank; ++i) {
            uint32_t d = 0;
            if (!detail::get_u32(is, d)) throw IoError("checkpoint: truncated dims: " + path);
            t.dims.push_back(d);
            count *= d;
        }
        t.data.resize(count);
        for (size_t i = 0; i < count; ++i)
            if (!detail::get_f64(is, t.data[i]))
                throw IoError("checkpoint: truncated payload: " + path);
        out[name] = std::move(t);
    }
    return out;
}

// ---- model-level helpers ----------------------------------------------------

inline void append_stream(std::vector<std::pair<std::string, Tensor>>& recs,
                          const std::string& prefix, const net::StreamParams& p) {
    recs.emplace_back(prefix + ".enc_video.w", Tensor::from_mat(p.enc_video_w));
    recs.emplace_back(prefix + ".enc_video.b", Tensor::from_vec(p.enc_video_b));
    recs.emplace_back(prefix + ".enc_attn.w", Tensor::from_mat(p.enc_attn_w));
    recs.emplace_back(prefix + ".enc_attn.b", Tensor::from_vec(p.enc_attn_b));
    recs.emplace_back(prefix + ".classifier.w", Tensor::from_mat(p.classifier_w));
    recs.emplace_back(prefix + ".classifier.b", Tensor::from_vec(p.classifier_b));
    recs.emplace_back(prefix + ".attention.w", Tensor::from_vec(p.attention_w));
    recs.emplace_back(prefix + ".attention.b", Tensor::scalar(p.attention_b));
    recs.emplace_back(prefix + ".cluster_head", Tensor::from_mat(p.cluster_head));
    recs.emplace_back(prefix + ".rho_head", Tensor::scalar(p.rho_head));
}

inline void save_model(const std::string& path, const net::ModelParams& model, const Mat& qc) {
    std::vector<std::pair<std::string, Tensor>> recs;
    append_stream(recs, "rgb", model.rgb);
    append_stream(recs, "flow", model.flow);
    recs.emplace_back("qc", Tensor::from_mat(qc));
    save_tensors(path, recs);
}

inline net::StreamParams read_stream(const std::map<std::string, Tensor>& recs,
                                     const std::string& prefix) {
    auto need = [&](const std::string& name) -> const Tensor& {
        auto it = recs.find(name);
        if (it == recs.end()) throw IoError("checkpoint: missing tensor " + name);
        return it->second;
    };
    net::StreamParams p;
    p.enc_video_w = need(prefix + ".enc_video.w").to_mat();
    p.enc_video_b = need(prefix + ".enc_video.b").data;
    p.enc_attn_w = need(prefix + ".enc_attn.w").to_mat();
    p.enc_attn_b = need(prefix + ".enc_attn.b").data;
    p.classifier_w = need(prefix + ".classifier.w").to_mat();
    p.classifier_b = need(prefix + ".classifier.b").data;
    p.attention_w = need(prefix + ".attention.w").data;
    p.attention_b = need(prefix + ".attention.b").data.at(0);
    p.cluster_head = need(prefix + ".cluster_head").to_mat();
    p.rho_head = need(prefix + ".rho_head").data.at(0);
    try {
        p.validate();
    } catch (const Error& e) {
        throw IoError(std::string("checkpoint: inconsistent tensors: ") + e.what());
    }
    return p;
}

struct LoadedModel {
    net::ModelParams model;
    Mat qc;  // K x 2 cluster F&B posterior
};

inline LoadedModel load_model(const std::string& path) {
    auto recs = load_tensors(path);
    LoadedModel lm;
    lm.model.rgb = read_stream(recs, "rgb");
    lm.model.flow = read_stream(recs, "flow");
    auto it = recs.find("qc");
    if (it == recs.end())
        throw CompatibilityError("checkpoint predates CCC: no persisted cluster posterior (qc)");
    lm.qc = it->second.to_mat();
    if (lm.qc.rows != lm.model.rgb.clusters() || lm.qc.cols != 2)
        throw IoError("checkpoint: qc must be K x 2");
    return lm;
}

}  // namespace wtal::ckpt
