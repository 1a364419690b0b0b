#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "fedsim/common.hpp"

namespace fedsim {

// A client objective evaluates f_i and fills grad, returning the value.
// Oracles must be pure: two queries at the same point return identical
// results.
using OracleFn = std::function<double(const Vec& x, Vec& grad)>;

// Finite-sum objective f = (1/n) sum_i f_i over n clients in R^d.
// Clients are 0-indexed; the delegate client is index 0.
struct ProblemInstance {
    int n = 0;
    int d = 0;
    std::vector<OracleFn> clients;
    std::optional<double> lower_bound_hint;  // f* estimate for reporting F^0

    void validate() const {
        if (n < 1 || d < 1 || static_cast<int>(clients.size()) != n)
            throw invalid_input("ProblemInstance: inconsistent n/d/clients");
    }
};

// Similarity structure of a problem: delta (average dissimilarity of the
// h_i = f - f_i), delta1 (delegate dissimilarity), l1 (delegate smoothness).
struct SimilarityConstants {
    double delta = 0.0;
    double delta1 = 0.0;
    double l1 = 1.0;
    std::optional<double> lmax;
    std::optional<double> delta_max;

    static double n_m(int n, int m) { return static_cast<double>(n) / m; }
    static double q_m(int n, int m) {
        return n == 1 ? 0.0 : static_cast<double>(n - m) / (n - 1);
    }
    double delta_m(int n, int m) const { return std::sqrt(q_m(n, m) / m) * delta; }
};

// Exact f_i(x) and grad f_i(x). No cost-ledger side effects; accounting is
// the cost_model's job.
inline std::pair<double, Vec> oracle_query(const ProblemInstance& p, int i, const Vec& x) {
    if (i < 0 || i >= p.n) throw invalid_input("oracle_query: client index out of range");
    check_dim(x, static_cast<std::size_t>(p.d), "oracle_query");
    Vec grad(p.d, 0.0);
    const double val = p.clients[static_cast<std::size_t>(i)](x, grad);
    return {val, std::move(grad)};
}

inline double client_gradient(const ProblemInstance& p, int i, const Vec& x, Vec& grad) {
    if (i < 0 || i >= p.n) throw invalid_input("client_gradient: client index out of range");
    grad.assign(static_cast<std::size_t>(p.d), 0.0);
    return p.clients[static_cast<std::size_t>(i)](x, grad);
}

inline double full_objective(const ProblemInstance& p, const Vec& x) {
    check_dim(x, static_cast<std::size_t>(p.d), "full_objective");
    double s = 0.0;
    Vec grad(p.d);
    for (int i = 0; i < p.n; ++i) {
        grad.assign(static_cast<std::size_t>(p.d), 0.0);
        s += p.clients[static_cast<std::size_t>(i)](x, grad);
    }
    return s / p.n;
}

inline Vec full_gradient(const ProblemInstance& p, const Vec& x) {
    check_dim(x, static_cast<std::size_t>(p.d), "full_gradient");
    Vec acc(p.d, 0.0);
    Vec grad(p.d);
    for (int i = 0; i < p.n; ++i) {
        grad.assign(static_cast<std::size_t>(p.d), 0.0);
        p.clients[static_cast<std::size_t>(i)](x, grad);
        axpy(1.0, grad, acc);
    }
    scale(acc, 1.0 / p.n);
    return acc;
}

inline std::pair<double, Vec> full_value_gradient(const ProblemInstance& p, const Vec& x) {
    check_dim(x, static_cast<std::size_t>(p.d), "full_value_gradient");
    Vec acc(p.d, 0.0);
    Vec grad(p.d);
    double s = 0.0;
    for (int i = 0; i < p.n; ++i) {
        grad.assign(static_cast<std::size_t>(p.d), 0.0);
        s += p.clients[static_cast<std::size_t>(i)](x, grad);
        axpy(1.0, grad, acc);
    }
    scale(acc, 1.0 / p.n);
    return {s / p.n, std::move(acc)};
}

// One incremental sample of (L_1, delta, Delta_1) from a pair of points,
// following the plotting procedure: callers keep running maxima.
struct ConstantSample {
    double l1 = 0.0;
    double delta = 0.0;
    double delta1 = 0.0;
};

inline ConstantSample estimate_constants(const ProblemInstance& p, const Vec& x_prev,
                                         const Vec& x_next) {
    check_dim(x_prev, static_cast<std::size_t>(p.d), "estimate_constants");
    check_dim(x_next, static_cast<std::size_t>(p.d), "estimate_constants");
    const double disp_sq = dist_sq(x_prev, x_next);
    if (disp_sq == 0.0) throw invalid_input("estimate_constants: zero displacement");

    const Vec g_prev = full_gradient(p, x_prev);
    const Vec g_next = full_gradient(p, x_next);

    ConstantSample s;
    double h_acc = 0.0;
    Vec gi_prev(p.d), gi_next(p.d);
    for (int i = 0; i < p.n; ++i) {
        client_gradient(p, i, x_prev, gi_prev);
        client_gradient(p, i, x_next, gi_next);
        double fi_diff_sq = 0.0;
        double hi_diff_sq = 0.0;
        for (int k = 0; k < p.d; ++k) {
            const double df = gi_prev[k] - gi_next[k];
            const double dh = (g_prev[k] - gi_prev[k]) - (g_next[k] - gi_next[k]);
            fi_diff_sq += df * df;
            hi_diff_sq += dh * dh;
        }
        if (i == 0) {
            s.l1 = std::sqrt(fi_diff_sq / disp_sq);
            s.delta1 = std::sqrt(hi_diff_sq / disp_sq);
        }
        h_acc += hi_diff_sq;
    }
    s.delta = std::sqrt(h_acc / p.n / disp_sq);
    return s;
}

}  // namespace fedsim
