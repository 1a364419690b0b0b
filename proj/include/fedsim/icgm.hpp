#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/estimators.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

enum class EstimatorKind { RgSaga, RgSvrg, SvrgDirect };
enum class LocalSolverKind { ConstK, Geometric };

inline std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::RgSaga: return "rg-saga";
        case EstimatorKind::RgSvrg: return "rg-svrg";
        default: return "svrg-direct";
    }
}

struct SolverConfig {
    double lambda = 1.0;
    EstimatorKind estimator = EstimatorKind::RgSaga;
    double beta = 0.1;           // RG mixing weight
    double p_b = 0.1;            // SVRG anchor-refresh probability
    LocalSolverKind local_solver = LocalSolverKind::Geometric;
    std::int64_t local_k = 1;    // const solver: K
    double local_p = 0.1;        // geometric solver: p
    std::int64_t iterations = 100;  // T
    double epsilon = 0.0;        // target gradient norm (early stop only)
    bool early_stop = false;
    std::uint64_t seed = 0;
    int init_mode = 2;           // t_0: full gradients computed at the start
    double local_smoothness = 0.0;  // 0 -> constants.l1
    bool diagnostics = true;

    void validate() const {
        if (lambda <= 0.0) throw invalid_config("SolverConfig: lambda must be > 0");
        if (!(beta > 0.0 && beta <= 1.0)) throw invalid_config("SolverConfig: beta in (0,1]");
        if (!(p_b > 0.0 && p_b <= 1.0)) throw invalid_config("SolverConfig: p_b in (0,1]");
        if (local_solver == LocalSolverKind::ConstK && local_k < 1)
            throw invalid_config("SolverConfig: K >= 1");
        if (local_solver == LocalSolverKind::Geometric && !(local_p > 0.0 && local_p <= 1.0))
            throw invalid_config("SolverConfig: p in (0,1]");
        if (iterations < 1) throw invalid_config("SolverConfig: T >= 1");
        if (init_mode < 0 || init_mode > 2) throw invalid_config("SolverConfig: t_0 in {0,1,2}");
    }
};

// ---------------------------------------------------------------------------
// Subproblem machinery
// ---------------------------------------------------------------------------

// grad F_t(x) = grad f_1(x) + g^t - grad f_1(x^t) + lambda (x - x^t)
inline Vec subproblem_gradient(const ProblemInstance& p, int client, const Vec& x, const Vec& x_t,
                               const Vec& g_t, double lambda, Round* round = nullptr) {
    check_dim(x, static_cast<std::size_t>(p.d), "subproblem_gradient");
    check_dim(x_t, static_cast<std::size_t>(p.d), "subproblem_gradient");
    check_dim(g_t, static_cast<std::size_t>(p.d), "subproblem_gradient");
    Vec gx(p.d, 0.0), gxt(p.d, 0.0);
    p.clients[static_cast<std::size_t>(client)](x, gx);
    p.clients[static_cast<std::size_t>(client)](x_t, gxt);
    if (round) round->record_queries(client, 2);
    for (int k = 0; k < p.d; ++k) {
        const auto u = static_cast<std::size_t>(k);
        gx[u] += g_t[u] - gxt[u] + lambda * (x[u] - x_t[u]);
    }
    return gx;
}

// F_t(x) = f_1(x) + h_1(x^t) + <g^t - grad f_1(x^t), x - x^t> + lambda/2 |x - x^t|^2.
// Diagnostic evaluation, never charged.
inline double subproblem_value(const ProblemInstance& p, int client, const Vec& x, const Vec& x_t,
                               const Vec& g_t, double lambda) {
    Vec gxt(p.d, 0.0);
    const double f1_xt = p.clients[static_cast<std::size_t>(client)](x_t, gxt);
    Vec gx(p.d, 0.0);
    const double f1_x = p.clients[static_cast<std::size_t>(client)](x, gx);
    const double h1_xt = full_objective(p, x_t) - f1_xt;
    double v = f1_x + h1_xt;
    for (int k = 0; k < p.d; ++k) {
        const auto u = static_cast<std::size_t>(k);
        const double dx = x[u] - x_t[u];
        v += (g_t[u] - gxt[u]) * dx + 0.5 * lambda * dx * dx;
    }
    return v;
}

// One composite-gradient step on F_t:
//   y_{k+1} = (L1 y_k + lambda x^t + grad f_1(x^t) - g^t - grad f_1(y_k)) / (lambda + L1).
// grad_xt and grad_yk are the delegate gradients at x^t and y_k; the caller
// owns the query accounting (one query per distinct point).
inline Vec local_cgm_step(const Vec& y_k, const Vec& x_t, const Vec& grad_xt, const Vec& grad_yk,
                          const Vec& g_t, double lambda, double l1) {
    if (l1 <= 0.0) throw invalid_config("local_cgm_step: L1 must be > 0");
    Vec y(y_k.size());
    const double denom = lambda + l1;
    for (std::size_t u = 0; u < y.size(); ++u)
        y[u] = (l1 * y_k[u] + lambda * x_t[u] + grad_xt[u] - g_t[u] - grad_yk[u]) / denom;
    return y;
}

struct LocalSolveResult {
    Vec x_next;
    double e_norm = 0.0;        // |grad F_t(x_next)|
    std::int64_t steps = 0;     // local CGM steps taken
    std::int64_t queries = 0;   // delegate oracle queries charged
};

// Fixed number of local steps; returns the iterate with the smallest |grad F_t|
// among y_1..y_K. The candidate gradients reuse the per-step oracle results;
// only y_K needs one extra evaluation.
inline LocalSolveResult cgm_const(const ProblemInstance& p, int client, double lambda, double l1,
                                  std::int64_t K, const Vec& x_t, const Vec& g_t, Round* round) {
    if (K < 1) throw invalid_config("cgm_const: K >= 1");
    Vec grad_xt(p.d, 0.0);
    p.clients[static_cast<std::size_t>(client)](x_t, grad_xt);
    std::int64_t queries = 1;

    LocalSolveResult best;
    best.e_norm = std::numeric_limits<double>::infinity();
    Vec y = x_t;
    Vec grad_y = grad_xt;
    for (std::int64_t k = 0; k < K; ++k) {
        y = local_cgm_step(y, x_t, grad_xt, grad_y, g_t, lambda, l1);
        grad_y.assign(static_cast<std::size_t>(p.d), 0.0);
        p.clients[static_cast<std::size_t>(client)](y, grad_y);
        ++queries;
        // grad F_t(y) from the freshly queried grad f_1(y)
        double e_sq = 0.0;
        for (int j = 0; j < p.d; ++j) {
            const auto u = static_cast<std::size_t>(j);
            const double gf = grad_y[u] + g_t[u] - grad_xt[u] + lambda * (y[u] - x_t[u]);
            e_sq += gf * gf;
        }
        const double e = std::sqrt(e_sq);
        if (k == 0 || e < best.e_norm) {  // first candidate always taken (NaN-safe)
            best.e_norm = e;
            best.x_next = y;
        }
    }
    best.steps = K;
    best.queries = queries;
    if (round) round->record_queries(client, queries);
    return best;
}

// Random number of local steps: K_hat ~ Geom(p), K_hat + 1 steps, last iterate
// returned. K_hat + 1 delegate queries; e_norm is an uncharged diagnostic.
inline LocalSolveResult cgm_rand(const ProblemInstance& p, int client, double lambda, double l1,
                                 double prob, const Vec& x_t, const Vec& g_t, Rng& rng,
                                 Round* round) {
    if (!(prob > 0.0 && prob <= 1.0)) throw invalid_config("cgm_rand: p must be in (0,1]");
    const std::int64_t steps = rng.geometric(prob) + 1;

    Vec grad_xt(p.d, 0.0);
    p.clients[static_cast<std::size_t>(client)](x_t, grad_xt);

    Vec y = x_t;
    Vec grad_y = grad_xt;
    for (std::int64_t k = 0; k < steps; ++k) {
        y = local_cgm_step(y, x_t, grad_xt, grad_y, g_t, lambda, l1);
        if (k + 1 < steps) {
            grad_y.assign(static_cast<std::size_t>(p.d), 0.0);
            p.clients[static_cast<std::size_t>(client)](y, grad_y);
        }
    }

    LocalSolveResult r;
    r.steps = steps;
    r.queries = steps;  // queries at x^t, y_1, ..., y_{steps-1}
    if (round) round->record_queries(client, r.queries);
    r.e_norm = norm(subproblem_gradient(p, client, y, x_t, g_t, lambda, nullptr));
    r.x_next = std::move(y);
    return r;
}

// ---------------------------------------------------------------------------
// Theorem-prescribed and experiment-grade parameters
// ---------------------------------------------------------------------------

struct RgSagaParams {
    double lambda = 0.0, beta = 0.0, p = 0.0;
    std::int64_t iterations = 0;
};

// lambda = 3 Delta_1 + 113 sqrt(n_m) delta_m, beta = 1/(112 n_m),
// p = (lambda - Delta_1) / (8 (L_1 + lambda)),
// T = ceil(256 (Delta_1 + 38 sqrt(n_m) delta_m) F^0 / eps^2).
inline RgSagaParams default_params_rg_saga(double delta1, double delta, int n, int m, double l1,
                                           double f0, double epsilon) {
    const double n_m = SimilarityConstants::n_m(n, m);
    SimilarityConstants c;
    c.delta = delta;
    const double delta_m = c.delta_m(n, m);
    RgSagaParams r;
    r.lambda = 3.0 * delta1 + 113.0 * std::sqrt(n_m) * delta_m;
    r.beta = 1.0 / (112.0 * n_m);
    r.p = (r.lambda - delta1) / (8.0 * (l1 + r.lambda));
    r.iterations = static_cast<std::int64_t>(
        std::ceil(256.0 * (delta1 + 38.0 * std::sqrt(n_m) * delta_m) * f0 / (epsilon * epsilon)));
    return r;
}

struct RgSvrgParams {
    double lambda = 0.0, beta = 0.0, p = 0.0, p_b = 0.0;
    std::int64_t iterations = 0;
};

// p_B = C_R / (C_A ceil(n_m)), lambda = 3 Delta_1 + 22 delta_m / sqrt(p_B),
// beta = p_B / 2, T = ceil(256 (Delta_1 + 8 delta_m / sqrt(p_B)) F^0 / eps^2).
inline RgSvrgParams default_params_rg_svrg(double delta1, double delta, int n, int m, double l1,
                                           const Cost& c_a, const Cost& c_r, double f0,
                                           double epsilon) {
    SimilarityConstants c;
    c.delta = delta;
    const double delta_m = c.delta_m(n, m);
    const std::int64_t ceil_nm = CostConfig::full_sync_rounds(n, m);
    RgSvrgParams r;
    r.p_b = to_double(c_r / (c_a * ceil_nm));
    r.lambda = 3.0 * delta1 + 22.0 * delta_m / std::sqrt(r.p_b);
    r.beta = r.p_b / 2.0;
    r.p = (r.lambda - delta1) / (8.0 * (l1 + r.lambda));
    r.iterations = static_cast<std::int64_t>(std::ceil(
        256.0 * (delta1 + 8.0 * delta_m / std::sqrt(r.p_b)) * f0 / (epsilon * epsilon)));
    return r;
}

struct Section7Params {
    double lambda = 0.0, beta = 0.0, p = 0.0, eta = 0.0;
};

// Experiment-grade settings: p = delta/L, lambda = (sqrt(n)/m) delta + Delta_1,
// beta = m/n, eta = 2 L.
inline Section7Params experiment_params_section7(double delta, double delta1, double L, int n,
                                                 int m) {
    Section7Params r;
    r.lambda = std::sqrt(static_cast<double>(n)) / m * delta + delta1;
    r.beta = static_cast<double>(m) / n;
    r.p = std::min(1.0, delta / L);
    r.eta = 2.0 * L;
    return r;
}

// ---------------------------------------------------------------------------
// The outer loop
// ---------------------------------------------------------------------------

struct IterationInfo {
    std::int64_t t = 0;
    const Vec* x_t = nullptr;
    const Vec* x_next = nullptr;
    const Vec* g_t = nullptr;     // estimate the solve used
    const Vec* inner = nullptr;   // inner estimator output G^t this round
    const Vec* g_next = nullptr;
    double e_t = 0.0;
    std::int64_t local_steps = 0;
};

using IterationObserver = std::function<void(const IterationInfo&)>;

struct IcgmResult {
    RunTrace trace;
    Vec x_bar;    // uniform over {x^1..x^T}
    Vec x_final;  // x^T
    Cost total_comm{0};
    std::int64_t total_local = 0;
    std::int64_t n_a = 0, n_r = 0, n_d = 0;
    std::vector<std::string> warnings;
};

namespace detail {

// Gradient estimator state shared across the run. Handles init charging,
// per-round updates and the deferred second synchronization of the
// theory-compliant SAGA initialization.
class GradientEstimator {
  public:
    GradientEstimator(const SolverConfig& cfg, const ProblemInstance& p) : cfg_(cfg) {
        rg_.beta = cfg.beta;
        saga_ = SagaState::zeros(p.n, p.d);
    }

    Vec init(const ProblemInstance& p, const Vec& x0, CostLedger& ledger, Rng& rng) {
        switch (cfg_.estimator) {
            case EstimatorKind::RgSaga: {
                if (cfg_.init_mode >= 1) {
                    std::vector<Vec> grads(static_cast<std::size_t>(p.n));
                    ledger.full_sync([&](Round& round) {
                        for (int i : round.subset()) {
                            Vec g(p.d, 0.0);
                            p.clients[static_cast<std::size_t>(i)](x0, g);
                            grads[static_cast<std::size_t>(i)] = std::move(g);
                            round.record_queries(i, 1);
                        }
                    });
                    saga_.refresh_all(std::move(grads));
                    rg_.g = saga_.aggregate;
                } else {
                    // cheap start: one RSS round, unsampled table entries stay zero
                    Round round = ledger.select_random(rng);
                    for (int i : round.subset()) {
                        Vec g(p.d, 0.0);
                        p.clients[static_cast<std::size_t>(i)](x0, g);
                        round.record_queries(i, 1);
                        saga_.table[static_cast<std::size_t>(i)] = std::move(g);
                    }
                    saga_.aggregate = saga_.recompute_aggregate();
                    rg_.g = subset_mean_gradient(p, round.subset(), x0, nullptr);
                    round.close();
                }
                pending_refresh_ = (cfg_.init_mode == 2);
                return rg_.g;
            }
            case EstimatorKind::RgSvrg: {
                svrg_ = svrg_init(p, x0, cfg_.p_b, ledger);
                rg_.g = svrg_.anchor_grad;
                return rg_.g;
            }
            case EstimatorKind::SvrgDirect:
            default: {
                svrg_ = svrg_init(p, x0, cfg_.p_b, ledger);
                return svrg_.anchor_grad;
            }
        }
    }

    // Estimator round of iteration t; opens the RSS round itself.
    Vec round(std::int64_t t, const ProblemInstance& p, const Vec& x_t, const Vec& x_next,
              Rng& rng, CostLedger& ledger) {
        switch (cfg_.estimator) {
            case EstimatorKind::RgSaga: {
                Round rss = ledger.select_random(rng);
                Vec g = rg_saga_round(rg_, saga_, p, x_t, x_next, rss.subset(), &rss, &inner_);
                rss.close();
                if (pending_refresh_ && t == 0) {
                    // second half of the two-full-gradient initialization
                    std::vector<Vec> grads(static_cast<std::size_t>(p.n));
                    ledger.full_sync([&](Round& round) {
                        for (int i : round.subset()) {
                            Vec gi(p.d, 0.0);
                            p.clients[static_cast<std::size_t>(i)](x_next, gi);
                            grads[static_cast<std::size_t>(i)] = std::move(gi);
                            round.record_queries(i, 1);
                        }
                    });
                    saga_.refresh_all(std::move(grads));
                    pending_refresh_ = false;
                }
                return g;
            }
            case EstimatorKind::RgSvrg: {
                Round rss = ledger.select_random(rng);
                Vec g = rg_svrg_round(rg_, svrg_, p, x_t, x_next, rss.subset(), rng, ledger, &rss,
                                      /*draw_refresh=*/t >= 1, &inner_);
                rss.close();
                return g;
            }
            case EstimatorKind::SvrgDirect:
            default: {
                // plain loopless SVRG evaluated at x^{t+1}
                Round rss = ledger.select_random(rng);
                Vec g = svrg_step(svrg_, p, x_next, rss.subset(), rng, ledger, &rss);
                inner_ = g;
                rss.close();
                return g;
            }
        }
    }

    const Vec& inner_estimate() const { return inner_; }
    const SagaState& saga() const { return saga_; }

  private:
    SolverConfig cfg_;
    RgState rg_;
    SagaState saga_;
    SvrgState svrg_;
    Vec inner_;
    bool pending_refresh_ = false;
};

}  // namespace detail

// The I-CGM outer loop. Diagnostics (grad f, f, Sigma_hat) are measurement,
// computed by an uncharged oracle.
inline IcgmResult run_icgm(const ProblemInstance& problem, const SimilarityConstants& constants,
                           const CostConfig& cost_cfg, const SolverConfig& cfg, const Vec& x0,
                           const IterationObserver& observer = {}) {
    problem.validate();
    cfg.validate();
    cost_cfg.validate(problem.n);
    check_dim(x0, static_cast<std::size_t>(problem.d), "run_icgm");

    IcgmResult res;
    if (cfg.lambda <= constants.delta1)
        res.warnings.push_back("lambda <= Delta_1: outside the convergent regime");

    const double l1 = cfg.local_smoothness > 0.0 ? cfg.local_smoothness : constants.l1;
    const int delegate = cost_cfg.delegate.front();
    const std::int64_t T = cfg.iterations;

    Rng rng(split_seed(cfg.seed, 0x1c6e));
    std::int64_t xbar_index = 1 + static_cast<std::int64_t>(rng.uniform_index(
                                      static_cast<std::uint64_t>(T)));

    CostLedger ledger(cost_cfg, problem.n);
    detail::GradientEstimator estimator(cfg, problem);

    Vec x = x0;
    Vec g = estimator.init(problem, x, ledger, rng);
    res.x_bar = x0;

    auto diag_row = [&](std::int64_t t, const Vec& xt, const Vec& gt) {
        TraceRow row;
        row.round = t;
        const LedgerSnapshot snap = LedgerSnapshot::take(ledger);
        row.cum_comm = snap.cum_comm;
        row.cum_local = snap.cum_local;
        row.n_a = snap.n_a;
        row.n_r = snap.n_r;
        row.n_d = snap.n_d;
        if (cfg.diagnostics) {
            const auto [fv, grad] = full_value_gradient(problem, xt);
            row.f_value = fv;
            row.grad_norm_sq = norm_sq(grad);
            row.sigma_hat_sq = dist_sq(gt, grad);
        }
        return row;
    };

    std::int64_t completed = 0;
    for (std::int64_t t = 0; t < T; ++t) {
        TraceRow row = diag_row(t, x, g);

        if (!all_finite(x) || !all_finite(g)) {
            res.trace.rows.push_back(row);
            res.trace.diverged = true;
            throw divergence_error("run_icgm: non-finite iterate at t=" + std::to_string(t),
                                   res.trace);
        }
        // the post-loop row reports the state at the stop point
        if (cfg.early_stop && cfg.diagnostics && t > 0 &&
            row.grad_norm_sq <= cfg.epsilon * cfg.epsilon)
            break;

        // (1) subproblem solve on the delegate via one DSS round
        Round dss = ledger.select_delegate();
        LocalSolveResult solve =
            cfg.local_solver == LocalSolverKind::ConstK
                ? cgm_const(problem, delegate, cfg.lambda, l1, cfg.local_k, x, g, &dss)
                : cgm_rand(problem, delegate, cfg.lambda, l1, cfg.local_p, x, g, rng, &dss);
        dss.close();
        if (!all_finite(solve.x_next)) {
            res.trace.rows.push_back(row);
            res.trace.diverged = true;
            throw divergence_error("run_icgm: local solve diverged at t=" + std::to_string(t),
                                   res.trace);
        }

        // (2)+(3) RSS round and estimator update producing g^{t+1}
        Vec g_next = estimator.round(t, problem, x, solve.x_next, rng, ledger);

        row.e_t = solve.e_norm;
        row.local_steps = solve.steps;
        res.trace.rows.push_back(row);

        if (observer) {
            IterationInfo info;
            info.t = t;
            info.x_t = &x;
            info.x_next = &solve.x_next;
            info.g_t = &g;
            info.inner = &estimator.inner_estimate();
            info.g_next = &g_next;
            info.e_t = solve.e_norm;
            info.local_steps = solve.steps;
            observer(info);
        }

        x = std::move(solve.x_next);
        g = std::move(g_next);
        completed = t + 1;
        if (completed == xbar_index) res.x_bar = x;
    }

    // early stop before the pre-drawn output index: the last iterate stands in
    if (completed < xbar_index && completed > 0) res.x_bar = x;

    res.trace.rows.push_back(diag_row(completed, x, g));
    res.x_final = x;
    const auto [comm, local] = ledger.totals();
    res.total_comm = comm;
    res.total_local = local;
    res.n_a = ledger.rounds_ass();
    res.n_r = ledger.rounds_rss();
    res.n_d = ledger.rounds_dss();
    return res;
}

}  // namespace fedsim
