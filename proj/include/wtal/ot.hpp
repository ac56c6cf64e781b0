#pragma once

// Entropy-regularized optimal-transport self-labeling.
//
// The label matrices used as clustering / classification targets are the
// solutions of
//
//     min_Q  <Q, -L> + (1/eps) * KL(Q || Q_hat)
//     s.t.   Q 1 = alpha (uniform rows),  Q^T 1 = beta
//
// solved two ways: `sinkhorn` (alternating row/column rescaling of the
// kernel Q_hat .* exp(eps * L), the production path) and `ot_dual_oracle`
// (gradient ascent on the Lagrangian dual with closed-form primal recovery,
// used as an independent reference in tests). Both return the plan in the
// same convention: every row sums to 1 and column k sums to N * beta[k].

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "wtal/errors.hpp"
#include "wtal/mat.hpp"

namespace wtal::ot {

// Shared validation for both solvers. beta holds per-column mass fractions.
inline void validate_problem(const Mat& logits, const Vec& beta, const Mat* prior,
                             double eps_sharp) {
    require_shape(logits.rows >= 1 && logits.cols >= 1, "ot: logits must be non-empty");
    require_shape(static_cast<int>(beta.size()) == logits.cols,
                  "ot: beta length must equal the number of columns");
    if (!all_finite(logits)) throw InputError("ot: logits contain NaN/Inf");
    double bsum = 0.0;
    for (double b : beta) {
        if (!std::isfinite(b) || b < 0.0) throw InputError("ot: beta entries must be >= 0");
        bsum += b;
    }
    if (std::abs(bsum - 1.0) > 1e-9) throw InputError("ot: beta must sum to 1");
    if (!(eps_sharp > 0.0) || !std::isfinite(eps_sharp))
        throw InputError("ot: eps_sharp must be positive");
    if (prior != nullptr) {
        require_shape(prior->rows == logits.rows && prior->cols == logits.cols,
                      "ot: prior shape must match logits");
        for (double q : prior->d)
            if (!(q > 0.0) || !std::isfinite(q))
                throw InputError("ot: prior entries must be strictly positive");
    }
}

// Kernel Q_hat .* exp(eps * L), max-shifted before exponentiation so the
// largest exponent is 0. The shift only rescales the kernel, which the
// marginal scaling absorbs; the optimal plan is unchanged.
inline Mat build_kernel(const Mat& logits, const Mat* prior, double eps_sharp) {
    Mat k(logits.rows, logits.cols);
    double m = logits.d[0] * eps_sharp;
    for (double v : logits.d) m = std::max(m, v * eps_sharp);
    for (size_t i = 0; i < logits.size(); ++i) k.d[i] = std::exp(logits.d[i] * eps_sharp - m);
    if (prior != nullptr) {
        double psum = vec_sum(prior->d);
        for (size_t i = 0; i < k.size(); ++i) k.d[i] *= prior->d[i] / psum;
    }
    return k;
}

// Alternating rescaling (columns to beta, rows to uniform), run for a fixed
// number of sweeps in linear space on the stabilized kernel. When `trace` is
// given, the mass-1 iterate after every full sweep is appended (used by the
// monotone-objective tests).
inline Mat sinkhorn(const Mat& logits, const Vec& beta, const Mat* prior, double eps_sharp,
                    int n_iter, std::vector<Mat>* trace = nullptr) {
    validate_problem(logits, beta, prior, eps_sharp);
    require(n_iter >= 1, "ot: n_iter must be >= 1");
    const int n = logits.rows, k = logits.cols;

    Mat q = build_kernel(logits, prior, eps_sharp);
    for (int c = 0; c < k; ++c)
        if (beta[c] == 0.0)
            for (int r = 0; r < n; ++r) q.at(r, c) = 0.0;
    double total = vec_sum(q.d);
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericalError("ot: kernel mass vanished or overflowed after stabilization");
    for (double& v : q.d) v /= total;

    for (int it = 0; it < n_iter; ++it) {
        Vec cs = col_sums(q);
        for (int c = 0; c < k; ++c) {
            if (beta[c] == 0.0) continue;
            if (!(cs[c] > 0.0) || !std::isfinite(cs[c]))
                throw NumericalError("ot: column mass vanished for beta > 0 (underflow)");
            double scale = beta[c] / cs[c];
            for (int r = 0; r < n; ++r) q.at(r, c) *= scale;
        }
        Vec rs = row_sums(q);
        for (int r = 0; r < n; ++r) {
            if (!(rs[r] > 0.0) || !std::isfinite(rs[r]))
                throw NumericalError("ot: row mass vanished (underflow)");
            double scale = 1.0 / (n * rs[r]);
            double* qr = q.row(r);
            for (int c = 0; c < k; ++c) qr[c] *= scale;
        }
        if (trace != nullptr) trace->push_back(q);
    }

    // TransportPlan convention: exact unit row sums.
    Vec rs = row_sums(q);
    for (int r = 0; r < n; ++r) {
        double* qr = q.row(r);
        for (int c = 0; c < k; ++c) qr[c] /= rs[r];
    }
    if (!all_finite(q)) throw NumericalError("ot: non-finite transport plan");
    return q;
}

// Independent reference solver: maximize the Lagrangian dual
//
//   g(mu, nu) = -(1/eps) * sum_nk Q*(mu, nu) - sum_n mu_n a_n - sum_k nu_k b_k,
//   Q*(mu, nu) = S .* exp(-eps * (mu_n + nu_k)),   S = kernel (constants folded),
//
// by gradient ascent (Barzilai-Borwein trial step, nonmonotone backtracking
// against the worst of the last few accepted values -- plain Armijo truncates
// the BB step on ill-conditioned duals and stalls) until the dual gradient
// norm -- the marginal violation -- drops to `grad_tol`. The primal is then
// recovered in closed form from (mu, nu).
inline Mat ot_dual_oracle(const Mat& logits, const Vec& beta, const Mat* prior, double eps_sharp,
                          double grad_tol = 1e-10, long max_iter = 500000) {
    validate_problem(logits, beta, prior, eps_sharp);
    const int n = logits.rows;

    // Work on the columns with positive mass; beta == 0 forces a zero column.
    std::vector<int> active;
    for (int c = 0; c < logits.cols; ++c)
        if (beta[c] > 0.0) active.push_back(c);
    const int ka = static_cast<int>(active.size());

    Mat kernel_full = build_kernel(logits, prior, eps_sharp);
    Mat s(n, ka);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < ka; ++c) s.at(r, c) = kernel_full.at(r, active[c]);

    const double a_row = 1.0 / n;  // uniform row marginal, total mass 1
    Vec b(ka);
    for (int c = 0; c < ka; ++c) b[c] = beta[active[c]];

    Vec mu(n, 0.0), nu(ka, 0.0);
    Mat q(n, ka);
    Vec grad_mu(n), grad_nu(ka);

    auto eval = [&](const Vec& m_, const Vec& n_, Mat& q_out) -> double {
        double mass = 0.0;
        for (int r = 0; r < n; ++r) {
            double em = eps_sharp * m_[r];
            for (int c = 0; c < ka; ++c) {
                double v = s.at(r, c) * std::exp(-(em + eps_sharp * n_[c]));
                q_out.at(r, c) = v;
                mass += v;
            }
        }
        if (!std::isfinite(mass)) return -std::numeric_limits<double>::infinity();
        double g = -mass / eps_sharp;
        for (int r = 0; r < n; ++r) g -= m_[r] * a_row;
        for (int c = 0; c < ka; ++c) g -= n_[c] * b[c];
        return g;
    };

    double g = eval(mu, nu, q);
    double step = static_cast<double>(n) / eps_sharp;  // ~inverse dual curvature
    Vec prev_grad, prev_x;
    Vec g_window(10, g);  // nonmonotone reference: worst of the last 10
    size_t g_cursor = 0;
    Mat q_try(n, ka);
    long it = 0;
    for (;; ++it) {
        if (it >= max_iter)
            throw ConvergenceError("ot_dual_oracle: no convergence in " + std::to_string(max_iter) +
                                   " iterations");
        Vec rs = row_sums(q), cs = col_sums(q);
        double gnorm2 = 0.0;
        for (int r = 0; r < n; ++r) {
            grad_mu[r] = rs[r] - a_row;
            gnorm2 += grad_mu[r] * grad_mu[r];
        }
        for (int c = 0; c < ka; ++c) {
            grad_nu[c] = cs[c] - b[c];
            gnorm2 += grad_nu[c] * grad_nu[c];
        }
        if (std::sqrt(gnorm2) <= grad_tol) break;

        // Barzilai-Borwein trial step from the previous (x, grad) pair.
        if (!prev_grad.empty()) {
            double sy = 0.0, ss = 0.0;
            for (int r = 0; r < n; ++r) {
                double sx = mu[r] - prev_x[r];
                ss += sx * sx;
                sy += sx * (prev_grad[r] - grad_mu[r]);
            }
            for (int c = 0; c < ka; ++c) {
                double sx = nu[c] - prev_x[n + c];
                ss += sx * sx;
                sy += sx * (prev_grad[n + c] - grad_nu[c]);
            }
            if (sy > 0.0 && ss > 0.0) step = std::min(std::max(ss / sy, 1e-12), 1e12);
        }
        prev_x.resize(n + ka);
        prev_grad.resize(n + ka);
        for (int r = 0; r < n; ++r) {
            prev_x[r] = mu[r];
            prev_grad[r] = grad_mu[r];
        }
        for (int c = 0; c < ka; ++c) {
            prev_x[n + c] = nu[c];
            prev_grad[n + c] = grad_nu[c];
        }

        // Nonmonotone backtracking on the concave dual.
        double g_ref = g_window[0];
        for (double v : g_window) g_ref = std::min(g_ref, v);
        Vec mu_t(n), nu_t(ka);
        bool accepted = false;
        for (int ls = 0; ls < 80; ++ls) {
            for (int r = 0; r < n; ++r) mu_t[r] = mu[r] + step * grad_mu[r];
            for (int c = 0; c < ka; ++c) nu_t[c] = nu[c] + step * grad_nu[c];
            double g_t = eval(mu_t, nu_t, q_try);
            if (g_t >= g_ref + 1e-4 * step * gnorm2) {
                mu.swap(mu_t);
                nu.swap(nu_t);
                std::swap(q.d, q_try.d);
                g = g_t;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw ConvergenceError("ot_dual_oracle: line search failed (ill-conditioned dual)");
        g_window[g_cursor] = g;
        g_cursor = (g_cursor + 1) % g_window.size();
    }

    // Closed-form primal at the dual optimum, widened back to the full
    // column set and renormalized to the TransportPlan convention.
    Mat plan(n, logits.cols, 0.0);
    for (int r = 0; r < n; ++r) {
        double rs = std::accumulate(q.row(r), q.row(r) + ka, 0.0);
        for (int c = 0; c < ka; ++c) plan.at(r, active[c]) = q.at(r, c) / rs;
    }
    return plan;
}

// Shannon entropy in nats of a nonnegative vector, normalized to sum 1
// first; 0 * log 0 := 0.
inline double entropy(const Vec& dist) {
    require_shape(!dist.empty(), "entropy: empty distribution");
    double total = 0.0;
    for (double v : dist) {
        if (!std::isfinite(v) || v < 0.0) throw InputError("entropy: entries must be >= 0");
        total += v;
    }
    require(total > 0.0, "entropy: distribution has zero mass");
    double h = 0.0;
    for (double v : dist) {
        if (v == 0.0) continue;
        double p = v / total;
        h -= p * std::log(p);
    }
    return h;
}

// Matrix form: rows are treated as distributions; returns the mean per-row
// entropy (the Q^C / Q^S confidence diagnostic logged during training).
inline double entropy(const Mat& m) {
    require_shape(m.rows >= 1, "entropy: empty matrix");
    double h = 0.0;
    for (int r = 0; r < m.rows; ++r) h += entropy(Vec(m.row(r), m.row(r) + m.cols));
    return h / m.rows;
}

// KL(q || q_hat) in nats after normalizing both to total mass 1.
inline double kl_divergence(const Vec& q, const Vec& q_hat) {
    require_shape(q.size() == q_hat.size() && !q.empty(), "kl_divergence: size mismatch");
    double qs = 0.0, ps = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (!std::isfinite(q[i]) || q[i] < 0.0)
            throw InputError("kl_divergence: q entries must be >= 0");
        if (!std::isfinite(q_hat[i]) || q_hat[i] < 0.0)
            throw InputError("kl_divergence: q_hat entries must be >= 0");
        qs += q[i];
        ps += q_hat[i];
    }
    require(qs > 0.0 && ps > 0.0, "kl_divergence: zero mass");
    double kl = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        double a = q[i] / qs;
        if (a == 0.0) continue;
        double b = q_hat[i] / ps;
        if (b == 0.0) throw InputError("kl_divergence: q_hat vanishes where q has mass");
        kl += a * std::log(a / b);
    }
    return kl;
}

inline double kl_divergence(const Mat& q, const Mat& q_hat) {
    require_shape(q.rows == q_hat.rows && q.cols == q_hat.cols, "kl_divergence: shape mismatch");
    return kl_divergence(q.d, q_hat.d);
}

// Self-labeling objective  E(P, Q) + (1/eps) * KL(Q || Q_hat)  evaluated on a
// mass-1 iterate, with P = row-softmax(L). Diagnostic used by tests to check
// the objective is non-increasing across sinkhorn sweeps.
inline double labeling_objective(const Mat& q_mass1, const Mat& logits, const Mat* prior,
                                 double eps_sharp) {
    require_shape(q_mass1.rows == logits.rows && q_mass1.cols == logits.cols,
                  "labeling_objective: shape mismatch");
    Mat p = row_softmax(logits);
    double e = 0.0;
    for (size_t i = 0; i < q_mass1.size(); ++i)
        if (q_mass1.d[i] > 0.0) e -= q_mass1.d[i] * std::log(p.d[i]);
    Mat uniform_prior;
    const Mat* ref = prior;
    if (ref == nullptr) {
        uniform_prior = Mat(logits.rows, logits.cols, 1.0);
        ref = &uniform_prior;
    }
    return e + kl_divergence(q_mass1, *ref) / eps_sharp;
}

}  // namespace wtal::ot
