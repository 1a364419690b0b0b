#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "fedsim/problem.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Benchmark generator: f_i(x) = (1/b) sum_j 1/2 <A_{i,j}(x - b_{i,j}), x - b_{i,j}>
//                               + sum_k log(1 + alpha |x_k|),
// with diagonal A_{i,j} = clip(base + noise_{i,j}) and a fraction of diagonal
// entries forced near zero.
struct QuadLogSumParams {
    double alpha = 10.0;
    int b = 5;
    int n = 100;
    int d = 1000;
    double diag_base_lo = 0.0, diag_base_hi = 110.0;
    double noise_lo = 0.0, noise_hi = 18.0;
    double clip_lo = 1.0, clip_hi = 100.0;
    double zero_eig_fraction = 0.05;

    void validate() const {
        if (alpha <= 0.0) throw invalid_config("QuadLogSumParams: alpha must be > 0");
        if (b < 1 || n < 1 || d < 1) throw invalid_config("QuadLogSumParams: b, n, d must be >= 1");
        if (clip_lo < 0.0 || clip_hi < clip_lo)
            throw invalid_config("QuadLogSumParams: clip range must satisfy 0 <= lo <= hi");
    }
};

// value/gradient of the log-sum penalty; grad is accumulated into `grad`.
// The penalty gradient at x_k = 0 is taken as 0 (the kink's symmetric choice).
inline double logsum_penalty(double alpha, const Vec& x, Vec* grad) {
    double v = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double ax = alpha * std::fabs(x[k]);
        v += std::log1p(ax);
        if (grad && x[k] != 0.0) {
            (*grad)[k] += (x[k] > 0.0 ? alpha : -alpha) / (1.0 + ax);
        }
    }
    return v;
}

struct QuadraticProblem {
    QuadLogSumParams params;
    std::uint64_t seed = 0;

    // raw generated data, kept for inspection and analytic constants
    std::vector<std::vector<Vec>> diag;     // [n][b] diagonals of A_{i,j}
    std::vector<std::vector<Vec>> targets;  // [n][b] the b_{i,j}

    // collapsed per-client form: grad f_i(x) = M_i x - r_i + pen'(x)
    std::vector<Vec> mean_diag;  // M_i
    std::vector<Vec> mean_rhs;   // r_i = (1/b) sum_j A_{i,j} b_{i,j}
    std::vector<double> offset;  // (1/(2b)) sum_j <A_{i,j} b_{i,j}, b_{i,j}>

    ProblemInstance instance;

    // Exact constants from the diagonals. The penalty is shared by all
    // clients, so it cancels in every h_i = f - f_i; it only enters the
    // smoothness constants, contributing at most alpha^2 away from kinks.
    SimilarityConstants analytic_constants() const {
        const int n = params.n, d = params.d;
        Vec grand(d, 0.0);
        for (int i = 0; i < n; ++i) axpy(1.0 / n, mean_diag[i], grand);

        double delta1 = 0.0, delta_sq = 0.0, delta_max = 0.0;
        double l1 = 0.0, lmax = 0.0;
        for (int k = 0; k < d; ++k) {
            double mean_dev_sq = 0.0;
            for (int i = 0; i < n; ++i) {
                const double dev = std::fabs(grand[k] - mean_diag[i][k]);
                mean_dev_sq += dev * dev / n;
                delta_max = std::max(delta_max, dev);
                lmax = std::max(lmax, mean_diag[i][k]);
            }
            delta_sq = std::max(delta_sq, mean_dev_sq);
            delta1 = std::max(delta1, std::fabs(grand[k] - mean_diag[0][k]));
            l1 = std::max(l1, mean_diag[0][k]);
        }
        SimilarityConstants c;
        c.delta = std::sqrt(delta_sq);
        c.delta1 = delta1;
        c.l1 = std::max(l1, params.alpha * params.alpha);
        c.lmax = std::max(lmax, params.alpha * params.alpha);
        c.delta_max = delta_max;
        return c;
    }
};

inline QuadraticProblem gen_quadratic_logsum(const QuadLogSumParams& params, std::uint64_t seed) {
    params.validate();
    QuadraticProblem qp;
    qp.params = params;
    qp.seed = seed;

    const int n = params.n, d = params.d, b = params.b;
    Rng rng(split_seed(seed, 0x71ad));

    Vec base(d);
    for (int k = 0; k < d; ++k) base[k] = rng.uniform(params.diag_base_lo, params.diag_base_hi);

    const int n_zero = static_cast<int>(params.zero_eig_fraction * d);

    qp.diag.assign(n, std::vector<Vec>(b));
    qp.targets.assign(n, std::vector<Vec>(b));
    qp.mean_diag.assign(n, Vec(d, 0.0));
    qp.mean_rhs.assign(n, Vec(d, 0.0));
    qp.offset.assign(n, 0.0);

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < b; ++j) {
            Vec a(d), t(d);
            for (int k = 0; k < d; ++k) {
                const double noisy = base[k] + rng.uniform(params.noise_lo, params.noise_hi);
                a[k] = std::clamp(noisy, params.clip_lo, params.clip_hi);
                t[k] = rng.uniform(0.0, 10.0);
            }
            if (n_zero > 0) {
                const std::vector<int> idx = rng.subset(d, n_zero);
                for (int k : idx) a[k] = 1e-6;
            }
            for (int k = 0; k < d; ++k) {
                qp.mean_diag[i][k] += a[k] / b;
                qp.mean_rhs[i][k] += a[k] * t[k] / b;
                qp.offset[i] += 0.5 * a[k] * t[k] * t[k] / b;
            }
            qp.diag[i][j] = std::move(a);
            qp.targets[i][j] = std::move(t);
        }
    }

    qp.instance.n = n;
    qp.instance.d = d;
    qp.instance.clients.reserve(n);
    for (int i = 0; i < n; ++i) {
        // capture collapsed coefficients by value so clients stay valid if the
        // QuadraticProblem is moved
        Vec M = qp.mean_diag[i];
        Vec r = qp.mean_rhs[i];
        const double c0 = qp.offset[i];
        const double alpha = params.alpha;
        qp.instance.clients.push_back([M = std::move(M), r = std::move(r), c0,
                                       alpha](const Vec& x, Vec& grad) -> double {
            double v = c0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                v += 0.5 * M[k] * x[k] * x[k] - r[k] * x[k];
                grad[k] += M[k] * x[k] - r[k];
            }
            v += logsum_penalty(alpha, x, &grad);
            return v;
        });
    }
    qp.instance.validate();
    return qp;
}

}  // namespace fedsim
