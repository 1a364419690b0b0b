#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/estimators.hpp"
#include "fedsim/icgm.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

struct BaselineConfig {
    double step = 0.01;        // local learning rate 1/eta
    std::int64_t local_k = 20; // local GD steps K
    double lambda = 1.0;       // FedRed / SABER proximal weight
    double eta = 100.0;        // FedRed smoothing weight
    double p = 0.1;            // FedRed restart prob; SABER full-gradient prob
    std::int64_t iterations = 100;
    std::uint64_t seed = 0;
    LocalSolverKind local_solver = LocalSolverKind::Geometric;  // SABER subproblem
    double local_p = 0.1;
    double local_smoothness = 100.0;  // SABER subproblem smoothness
    bool diagnostics = true;

    void validate() const {
        if (step <= 0.0) throw invalid_config("BaselineConfig: step must be > 0");
        if (local_k < 1) throw invalid_config("BaselineConfig: K >= 1");
        if (iterations < 1) throw invalid_config("BaselineConfig: T >= 1");
    }
};

struct BaselineResult {
    RunTrace trace;
    Vec x_final;
    Cost total_comm{0};
    std::int64_t total_local = 0;
    std::int64_t n_a = 0, n_r = 0, n_d = 0;
};

namespace detail {

inline TraceRow baseline_row(const ProblemInstance& p, const CostLedger& ledger, std::int64_t t,
                             const Vec& x, bool diagnostics) {
    TraceRow row;
    row.round = t;
    const LedgerSnapshot snap = LedgerSnapshot::take(ledger);
    row.cum_comm = snap.cum_comm;
    row.cum_local = snap.cum_local;
    row.n_a = snap.n_a;
    row.n_r = snap.n_r;
    row.n_d = snap.n_d;
    if (diagnostics) {
        const auto [fv, grad] = full_value_gradient(p, x);
        row.f_value = fv;
        row.grad_norm_sq = norm_sq(grad);
    }
    return row;
}

inline void baseline_finish(BaselineResult& res, const ProblemInstance& p,
                            const CostLedger& ledger, std::int64_t t, const Vec& x,
                            bool diagnostics) {
    res.trace.rows.push_back(baseline_row(p, ledger, t, x, diagnostics));
    res.x_final = x;
    const auto [comm, local] = ledger.totals();
    res.total_comm = comm;
    res.total_local = local;
    res.n_a = ledger.rounds_ass();
    res.n_r = ledger.rounds_rss();
    res.n_d = ledger.rounds_dss();
}

inline void check_finite_or_diverge(const Vec& x, RunTrace& trace, std::int64_t t,
                                    const char* who) {
    if (!all_finite(x)) {
        trace.diverged = true;
        throw divergence_error(std::string(who) + ": non-finite iterate at t=" + std::to_string(t),
                               std::move(trace));
    }
}

// full synchronization that also hands back every per-client gradient
inline std::vector<Vec> charged_all_gradients(const ProblemInstance& p, const Vec& x,
                                              CostLedger& ledger) {
    std::vector<Vec> grads(static_cast<std::size_t>(p.n));
    ledger.full_sync([&](Round& round) {
        for (int i : round.subset()) {
            Vec g(p.d, 0.0);
            p.clients[static_cast<std::size_t>(i)](x, g);
            grads[static_cast<std::size_t>(i)] = std::move(g);
            round.record_queries(i, 1);
        }
    });
    return grads;
}

inline Vec mean_of(const std::vector<Vec>& grads) {
    Vec acc(grads.front().size(), 0.0);
    for (const Vec& g : grads) axpy(1.0 / static_cast<double>(grads.size()), g, acc);
    return acc;
}

}  // namespace detail

// Centralized GD: one full synchronization then x <- x - step * grad f(x).
inline BaselineResult run_gd(const ProblemInstance& p, const CostConfig& cost_cfg, std::int64_t T,
                             double step, const Vec& x0, bool diagnostics = true) {
    CostLedger ledger(cost_cfg, p.n);
    BaselineResult res;
    Vec x = x0;
    for (std::int64_t t = 0; t < T; ++t) {
        TraceRow row = detail::baseline_row(p, ledger, t, x, diagnostics);
        detail::check_finite_or_diverge(x, res.trace, t, "run_gd");
        const Vec grad = charged_full_gradient(p, x, ledger);
        axpy(-step, grad, x);
        row.local_steps = 1;
        res.trace.rows.push_back(row);
    }
    detail::baseline_finish(res, p, ledger, T, x, diagnostics);
    return res;
}

// FedAvg with client sampling: each selected client runs K local GD steps on
// its own objective and the server averages the results.
inline BaselineResult run_fedavg(const ProblemInstance& p, const CostConfig& cost_cfg,
                                 std::int64_t T, std::int64_t K, double step, std::uint64_t seed,
                                 const Vec& x0, bool diagnostics = true) {
    if (K < 1) throw invalid_config("run_fedavg: K >= 1");
    CostLedger ledger(cost_cfg, p.n);
    Rng rng(split_seed(seed, 0xfeda));
    BaselineResult res;
    Vec x = x0;
    Vec grad(p.d);
    for (std::int64_t t = 0; t < T; ++t) {
        TraceRow row = detail::baseline_row(p, ledger, t, x, diagnostics);
        detail::check_finite_or_diverge(x, res.trace, t, "run_fedavg");
        Round rss = ledger.select_random(rng);
        Vec next(p.d, 0.0);
        const double m = static_cast<double>(rss.subset().size());
        for (int i : rss.subset()) {
            Vec y = x;
            for (std::int64_t k = 0; k < K; ++k) {
                client_gradient(p, i, y, grad);
                axpy(-step, grad, y);
            }
            rss.record_queries(i, K);
            axpy(1.0 / m, y, next);
        }
        rss.close();
        x = std::move(next);
        row.local_steps = K;
        res.trace.rows.push_back(row);
    }
    detail::baseline_finish(res, p, ledger, T, x, diagnostics);
    return res;
}

// Scaffold: SAG aggregate b maintained from sampled control variates; the
// selected clients run K corrected local steps on f_i(y) + <b - grad f_i(x^t), y>.
inline BaselineResult run_scaffold(const ProblemInstance& p, const CostConfig& cost_cfg,
                                   std::int64_t T, std::int64_t K, double step,
                                   std::uint64_t seed, const Vec& x0, bool diagnostics = true) {
    if (K < 1) throw invalid_config("run_scaffold: K >= 1");
    CostLedger ledger(cost_cfg, p.n);
    Rng rng(split_seed(seed, 0x5caf));
    BaselineResult res;
    Vec x = x0;

    SagaState sag = SagaState::zeros(p.n, p.d);
    sag.refresh_all(detail::charged_all_gradients(p, x, ledger));

    Vec grad(p.d);
    for (std::int64_t t = 0; t < T; ++t) {
        TraceRow row = detail::baseline_row(p, ledger, t, x, diagnostics);
        detail::check_finite_or_diverge(x, res.trace, t, "run_scaffold");

        // RSS leg: fetch grad differences, update the SAG aggregate
        Round rss = ledger.select_random(rng);
        const std::vector<int> subset = rss.subset();
        saga_step(sag, p, x, subset, &rss);
        rss.close();
        const Vec& b = sag.aggregate;

        // ASS leg to the same clients: corrected local GD
        Round ass = ledger.select_arbitrary(subset);
        Vec next(p.d, 0.0);
        const double m = static_cast<double>(subset.size());
        for (int i : subset) {
            const Vec& ci = sag.table[static_cast<std::size_t>(i)];  // grad f_i(x^t)
            Vec y = x;
            for (std::int64_t k = 0; k < K; ++k) {
                client_gradient(p, i, y, grad);
                for (int j = 0; j < p.d; ++j) {
                    const auto u = static_cast<std::size_t>(j);
                    y[u] -= step * (grad[u] + b[u] - ci[u]);
                }
            }
            ass.record_queries(i, K);
            axpy(1.0 / m, y, next);
        }
        ass.close();
        x = std::move(next);
        row.local_steps = 1 + K;
        res.trace.rows.push_back(row);
    }
    detail::baseline_finish(res, p, ledger, T, x, diagnostics);
    return res;
}

// FedRed-GD: doubly regularized delegate step with closed-form solution,
// anchor refreshed with probability p (then one full synchronization).
inline BaselineResult run_fedred_gd(const ProblemInstance& p, const CostConfig& cost_cfg,
                                    std::int64_t T, double lambda, double eta, double prob,
                                    std::uint64_t seed, const Vec& x0, bool diagnostics = true) {
    if (lambda <= 0.0 || eta <= 0.0) throw invalid_config("run_fedred_gd: lambda, eta > 0");
    if (!(prob > 0.0 && prob <= 1.0)) throw invalid_config("run_fedred_gd: p in (0,1]");
    CostLedger ledger(cost_cfg, p.n);
    Rng rng(split_seed(seed, 0xfed1));
    BaselineResult res;
    const int delegate = cost_cfg.delegate.front();

    Vec x = x0;
    Vec anchor = x0;
    std::vector<Vec> sync = detail::charged_all_gradients(p, anchor, ledger);
    Vec grad_f_anchor = detail::mean_of(sync);
    Vec grad_delegate_anchor = sync[static_cast<std::size_t>(delegate)];

    for (std::int64_t t = 0; t < T; ++t) {
        TraceRow row = detail::baseline_row(p, ledger, t, x, diagnostics);
        detail::check_finite_or_diverge(x, res.trace, t, "run_fedred_gd");

        Round dss = ledger.select_delegate();
        Vec grad_delegate(p.d, 0.0);
        p.clients[static_cast<std::size_t>(delegate)](x, grad_delegate);
        dss.record_queries(delegate, 1);
        dss.close();

        Vec next(p.d);
        for (int j = 0; j < p.d; ++j) {
            const auto u = static_cast<std::size_t>(j);
            next[u] = (eta * x[u] + lambda * anchor[u] -
                       (grad_delegate[u] + grad_f_anchor[u] - grad_delegate_anchor[u])) /
                      (eta + lambda);
        }
        x = std::move(next);

        if (rng.bernoulli(prob)) {
            anchor = x;
            sync = detail::charged_all_gradients(p, anchor, ledger);
            grad_f_anchor = detail::mean_of(sync);
            grad_delegate_anchor = sync[static_cast<std::size_t>(delegate)];
        }
        row.local_steps = 1;
        res.trace.rows.push_back(row);
    }
    detail::baseline_finish(res, p, ledger, T, x, diagnostics);
    return res;
}

// SABER-full: PAGE-style tracking estimate v with probabilistic full refresh,
// subproblem solved at a uniformly sampled client by the shared local CGM
// solver.
inline BaselineResult run_saber_full(const ProblemInstance& p, const CostConfig& cost_cfg,
                                     const BaselineConfig& cfg, const Vec& x0) {
    cfg.validate();
    if (!(cfg.p > 0.0 && cfg.p <= 1.0)) throw invalid_config("run_saber_full: p in (0,1]");
    CostLedger ledger(cost_cfg, p.n);
    Rng rng(split_seed(cfg.seed, 0x5abe));
    BaselineResult res;

    Vec x = x0;
    Vec x_prev = x0;
    Vec v = charged_full_gradient(p, x, ledger);

    for (std::int64_t t = 0; t < cfg.iterations; ++t) {
        TraceRow row = detail::baseline_row(p, ledger, t, x, cfg.diagnostics);
        detail::check_finite_or_diverge(x, res.trace, t, "run_saber_full");

        if (rng.bernoulli(cfg.p)) {
            v = charged_full_gradient(p, x, ledger);
        } else {
            Round rss = ledger.select_random(rng);
            const Vec g_curr = subset_mean_gradient(p, rss.subset(), x, &rss);
            const Vec g_prev = subset_mean_gradient(p, rss.subset(), x_prev, &rss);
            rss.close();
            for (int j = 0; j < p.d; ++j) {
                const auto u = static_cast<std::size_t>(j);
                v[u] += g_curr[u] - g_prev[u];
            }
        }

        Round solve_round = ledger.select_random(rng, /*size=*/1);
        const int client = solve_round.subset().front();
        LocalSolveResult solve =
            cfg.local_solver == LocalSolverKind::ConstK
                ? cgm_const(p, client, cfg.lambda, cfg.local_smoothness, cfg.local_k, x, v,
                            &solve_round)
                : cgm_rand(p, client, cfg.lambda, cfg.local_smoothness, cfg.local_p, x, v, rng,
                           &solve_round);
        solve_round.close();

        x_prev = std::move(x);
        x = std::move(solve.x_next);
        row.e_t = solve.e_norm;
        row.local_steps = solve.steps;
        res.trace.rows.push_back(row);
    }
    detail::baseline_finish(res, p, ledger, cfg.iterations, x, cfg.diagnostics);
    return res;
}

}  // namespace fedsim
