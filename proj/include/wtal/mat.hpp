#pragma once

// Small dense row-major double matrix plus the few elementwise helpers the
// model needs. Deliberately minimal: at desk scale plain loops are fast
// enough, keep every reduction order explicit, and make bitwise determinism
// easy to reason about.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "wtal/errors.hpp"

namespace wtal {

using Vec = std::vector<double>;

struct Mat {
    int rows = 0;
    int cols = 0;
    Vec d;  // row-major, rows*cols entries

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), d(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw ShapeError("Mat: negative dimension");
    }
    Mat(std::initializer_list<std::initializer_list<double>> init) {
        rows = static_cast<int>(init.size());
        cols = rows ? static_cast<int>(init.begin()->size()) : 0;
        d.reserve(static_cast<size_t>(rows) * cols);
        for (const auto& row : init) {
            if (static_cast<int>(row.size()) != cols) throw ShapeError("Mat: ragged initializer");
            d.insert(d.end(), row.begin(), row.end());
        }
    }

    double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return d.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return d.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return d.size(); }
    bool empty() const { return d.empty(); }
};

inline void require(bool cond, const char* msg) {
    if (!cond) throw InputError(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

inline void require_shape(bool cond, const char* msg) {
    if (!cond) throw ShapeError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

inline bool all_finite(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline bool all_finite(const Mat& m) { return all_finite(m.d); }

inline double vec_sum(const Vec& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

inline double vec_max(const Vec& v) {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

// Cosine similarity with the zero-vector convention cos(0, .) := 0.
inline double cosine(const double* a, const double* b, int n) {
    double na = l2_norm(a, n), nb = l2_norm(b, n);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b, n) / (na * nb);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// In-place softmax over a contiguous range, max-shifted for stability.
inline void softmax_inplace(double* p, int n) {
    double m = p[0];
    for (int i = 1; i < n; ++i) m = std::max(m, p[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        p[i] = std::exp(p[i] - m);
        z += p[i];
    }
    for (int i = 0; i < n; ++i) p[i] /= z;
}

inline Vec softmax(Vec v) {
    if (v.empty()) throw ShapeError("softmax: empty input");
    softmax_inplace(v.data(), static_cast<int>(v.size()));
    return v;
}

inline Mat row_softmax(Mat m) {
    for (int r = 0; r < m.rows; ++r) softmax_inplace(m.row(r), m.cols);
    return m;
}

// C = A * B, (n x k) * (k x m). Plain triple loop, k-inner for locality.
inline Mat matmul(const Mat& a, const Mat& b) {
    require_shape(a.cols == b.rows, "matmul: inner dimensions differ");
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            double av = ai[k];
            if (av == 0.0) continue;
            const double* bk = b.row(k);
            for (int j = 0; j < b.cols; ++j) ci[j] += av * bk[j];
        }
    }
    return c;
}

// C = A^T * B, (k x n)^T is formed implicitly: result is (n x m) from A (k x n), B (k x m).
inline Mat matmul_at_b(const Mat& a, const Mat& b) {
    require_shape(a.rows == b.rows, "matmul_at_b: row counts differ");
    Mat c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (int i = 0; i < a.cols; ++i) {
            double av = ak[i];
            if (av == 0.0) continue;
            double* ci = c.row(i);
            for (int j = 0; j < b.cols; ++j) ci[j] += av * bk[j];
        }
    }
    return c;
}

// C = A * B^T, A (n x k), B (m x k) -> (n x m).
inline Mat matmul_a_bt(const Mat& a, const Mat& b) {
    require_shape(a.cols == b.cols, "matmul_a_bt: column counts differ");
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (int j = 0; j < b.rows; ++j) ci[j] = dot(ai, b.row(j), a.cols);
    }
    return c;
}

inline Vec col_sums(const Mat& m) {
    Vec s(m.cols, 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double* mr = m.row(r);
        for (int c = 0; c < m.cols; ++c) s[c] += mr[c];
    }
    return s;
}

inline Vec row_sums(const Mat& m) {
    Vec s(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r) s[r] = std::accumulate(m.row(r), m.row(r) + m.cols, 0.0);
    return s;
}

}  // namespace wtal
