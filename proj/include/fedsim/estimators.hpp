#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedsim/cost_model.hpp"
#include "fedsim/problem.hpp"

namespace fedsim {

// Mean gradient over a client subset, one oracle query per selected client.
// Reduction runs in ascending client order so results are bit-reproducible.
inline Vec subset_mean_gradient(const ProblemInstance& p, const std::vector<int>& subset,
                                const Vec& x, Round* round) {
    if (subset.empty()) throw invalid_input("subset_mean_gradient: empty subset");
    Vec acc(p.d, 0.0);
    Vec grad(p.d);
    for (int i : subset) {
        client_gradient(p, i, x, grad);
        axpy(1.0, grad, acc);
        if (round) round->record_queries(i, 1);
    }
    scale(acc, 1.0 / static_cast<double>(subset.size()));
    return acc;
}

// ---------------------------------------------------------------------------
// SAGA
// ---------------------------------------------------------------------------

// Per-client stored gradients b_i and their running mean b. The aggregate is
// maintained incrementally by the recurrence
//   b <- b + (m/n) [ grad_S(x) - mean_S(b_old) ]
// and must always equal the table mean.
struct SagaState {
    std::vector<Vec> table;
    Vec aggregate;
    std::int64_t t = 0;

    static SagaState zeros(int n, int d) {
        SagaState s;
        s.table.assign(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(d), 0.0));
        s.aggregate.assign(static_cast<std::size_t>(d), 0.0);
        return s;
    }

    Vec recompute_aggregate() const {
        Vec acc(aggregate.size(), 0.0);
        for (const Vec& b : table) axpy(1.0, b, acc);
        scale(acc, 1.0 / static_cast<double>(table.size()));
        return acc;
    }

    // full refresh: every entry set to grad f_i at x (given per-client grads)
    void refresh_all(std::vector<Vec> grads) {
        table = std::move(grads);
        aggregate = recompute_aggregate();
    }
};

struct SagaStepResult {
    Vec estimate;       // G^t = grad_S(x) - mean_S(b_old) + b_old_aggregate
    Vec grad_subset;    // grad_S(x), reusable by a composite round
};

// One SAGA round at point x with subset S: table entries for S are replaced by
// the fresh gradients, the aggregate is updated by the recurrence, and the
// conditionally unbiased estimate is returned. One query per selected client.
inline SagaStepResult saga_step(SagaState& state, const ProblemInstance& p, const Vec& x,
                                const std::vector<int>& subset, Round* round) {
    check_dim(x, static_cast<std::size_t>(p.d), "saga_step");
    const double m = static_cast<double>(subset.size());
    const double n = static_cast<double>(p.n);

    Vec grad_subset(p.d, 0.0);
    Vec old_subset_mean(p.d, 0.0);
    Vec grad(p.d);
    for (int i : subset) {
        client_gradient(p, i, x, grad);
        if (round) round->record_queries(i, 1);
        axpy(1.0 / m, grad, grad_subset);
        axpy(1.0 / m, state.table[static_cast<std::size_t>(i)], old_subset_mean);
        state.table[static_cast<std::size_t>(i)] = grad;
    }

    SagaStepResult r;
    r.estimate.assign(static_cast<std::size_t>(p.d), 0.0);
    for (int k = 0; k < p.d; ++k)
        r.estimate[static_cast<std::size_t>(k)] =
            grad_subset[static_cast<std::size_t>(k)] - old_subset_mean[static_cast<std::size_t>(k)] +
            state.aggregate[static_cast<std::size_t>(k)];

    // aggregate recurrence, 1/n_m = m/n
    for (int k = 0; k < p.d; ++k)
        state.aggregate[static_cast<std::size_t>(k)] +=
            (m / n) * (grad_subset[static_cast<std::size_t>(k)] -
                       old_subset_mean[static_cast<std::size_t>(k)]);

    state.t += 1;
    r.grad_subset = std::move(grad_subset);
    return r;
}

struct SagaInitResult {
    SagaState state;  // table at x1
    Vec g0;           // grad f(x0)
    Vec g1;           // grad f(x1)
};

// Two full synchronizations: b_i = grad f_i(x0), then b_i = grad f_i(x1).
// Charges 2*ceil(n/m) ASS rounds, one query per client per sync.
inline SagaInitResult saga_init(const ProblemInstance& p, const Vec& x0, const Vec& x1,
                                CostLedger& ledger) {
    SagaInitResult r;
    r.state = SagaState::zeros(p.n, p.d);

    auto sync_into = [&](const Vec& x, Vec& mean_out) {
        std::vector<Vec> grads(static_cast<std::size_t>(p.n));
        ledger.full_sync([&](Round& round) {
            for (int i : round.subset()) {
                Vec g(p.d, 0.0);
                p.clients[static_cast<std::size_t>(i)](x, g);
                grads[static_cast<std::size_t>(i)] = std::move(g);
                round.record_queries(i, 1);
            }
        });
        Vec mean(p.d, 0.0);
        for (const Vec& g : grads) axpy(1.0 / p.n, g, mean);
        mean_out = std::move(mean);
        r.state.refresh_all(std::move(grads));
    };

    sync_into(x0, r.g0);
    sync_into(x1, r.g1);
    r.state.t = 1;
    return r;
}

// ---------------------------------------------------------------------------
// loopless SVRG
// ---------------------------------------------------------------------------

struct SvrgState {
    Vec anchor;       // w
    Vec anchor_grad;  // grad f(w)
    double p_b = 0.1; // Bernoulli anchor-refresh probability
};

// Full synchronization collecting grad f(x); K_r = 1 per ASS round.
inline Vec charged_full_gradient(const ProblemInstance& p, const Vec& x, CostLedger& ledger) {
    Vec acc(p.d, 0.0);
    ledger.full_sync([&](Round& round) {
        Vec g(p.d);
        for (int i : round.subset()) {
            g.assign(static_cast<std::size_t>(p.d), 0.0);
            p.clients[static_cast<std::size_t>(i)](x, g);
            axpy(1.0 / p.n, g, acc);
            round.record_queries(i, 1);
        }
    });
    return acc;
}

inline SvrgState svrg_init(const ProblemInstance& p, const Vec& x0, double p_b,
                           CostLedger& ledger) {
    if (!(p_b > 0.0 && p_b <= 1.0)) throw invalid_config("svrg_init: p_B must be in (0,1]");
    SvrgState s;
    s.p_b = p_b;
    s.anchor = x0;
    s.anchor_grad = charged_full_gradient(p, x0, ledger);
    return s;
}

// Three-term estimate with the current (fixed) anchor:
//   G = grad_S(x) + grad f(w) - grad_S(w).
// Two queries per selected client.
inline Vec svrg_estimate(const SvrgState& state, const ProblemInstance& p, const Vec& x,
                         const std::vector<int>& subset, Round* round) {
    Vec est = subset_mean_gradient(p, subset, x, round);
    const Vec at_anchor = subset_mean_gradient(p, subset, state.anchor, round);
    for (int k = 0; k < p.d; ++k)
        est[static_cast<std::size_t>(k)] +=
            state.anchor_grad[static_cast<std::size_t>(k)] - at_anchor[static_cast<std::size_t>(k)];
    return est;
}

// Full SVRG round: omega is drawn before the mini-batch gradients. A refresh
// moves the anchor to x (one charged full synchronization) and makes the
// estimate exact, skipping the now-redundant subset queries.
inline Vec svrg_step(SvrgState& state, const ProblemInstance& p, const Vec& x,
                     const std::vector<int>& subset, Rng& rng, CostLedger& ledger,
                     Round* round) {
    if (rng.bernoulli(state.p_b)) {
        state.anchor = x;
        state.anchor_grad = charged_full_gradient(p, x, ledger);
        return state.anchor_grad;
    }
    return svrg_estimate(state, p, x, subset, round);
}

// ---------------------------------------------------------------------------
// Recursive Gradient
// ---------------------------------------------------------------------------

struct RgState {
    Vec g;        // current estimate g^t
    double beta = 0.1;

    void validate() const {
        if (!(beta > 0.0 && beta <= 1.0)) throw invalid_config("RgState: beta must be in (0,1]");
    }
};

// g^{t+1} = (1-beta) g^t + beta G^t + grad_S(x^{t+1}) - grad_S(x^t),
// with the same subset S throughout.
inline Vec rg_step(RgState& state, const Vec& inner_estimate, const Vec& grad_subset_next,
                   const Vec& grad_subset_curr) {
    state.validate();
    const std::size_t d = state.g.size();
    if (inner_estimate.size() != d || grad_subset_next.size() != d ||
        grad_subset_curr.size() != d)
        throw invalid_input("rg_step: dimension mismatch");
    for (std::size_t k = 0; k < d; ++k)
        state.g[k] = (1.0 - state.beta) * state.g[k] + state.beta * inner_estimate[k] +
                     grad_subset_next[k] - grad_subset_curr[k];
    return state.g;
}

// One RG-SAGA estimator round at iteration t: SAGA update at x_t composed with
// the RG recursion using the same subset at x_t and x_next. Each selected
// client answers two queries (x_t and x_next).
inline Vec rg_saga_round(RgState& rg, SagaState& saga, const ProblemInstance& p, const Vec& x_t,
                         const Vec& x_next, const std::vector<int>& subset, Round* round,
                         Vec* inner_out = nullptr) {
    const SagaStepResult step = saga_step(saga, p, x_t, subset, round);
    const Vec grad_next = subset_mean_gradient(p, subset, x_next, round);
    if (inner_out) *inner_out = step.estimate;
    return rg_step(rg, step.estimate, grad_next, step.grad_subset);
}

// One RG-SVRG estimator round. On non-refresh rounds each selected client
// answers three queries (x_t, anchor, x_next); a refresh replaces the x_t and
// anchor queries with the charged full synchronization.
// `draw_refresh` is false at t = 0, where the anchor is already current.
inline Vec rg_svrg_round(RgState& rg, SvrgState& svrg, const ProblemInstance& p, const Vec& x_t,
                         const Vec& x_next, const std::vector<int>& subset, Rng& rng,
                         CostLedger& ledger, Round* round, bool draw_refresh,
                         Vec* inner_out = nullptr) {
    bool anchor_current = svrg.anchor == x_t;
    if (draw_refresh && rng.bernoulli(svrg.p_b)) {
        svrg.anchor = x_t;
        svrg.anchor_grad = charged_full_gradient(p, x_t, ledger);
        anchor_current = true;
    }

    Vec inner, grad_curr;
    if (anchor_current) {
        // the server already holds every grad f_i(x_t) from the sync, so the
        // subset mean at x_t is reassembled without new queries
        inner = svrg.anchor_grad;
        grad_curr = subset_mean_gradient(p, subset, x_t, nullptr);
    } else {
        grad_curr = subset_mean_gradient(p, subset, x_t, round);
        const Vec at_anchor = subset_mean_gradient(p, subset, svrg.anchor, round);
        inner = grad_curr;
        for (int k = 0; k < p.d; ++k)
            inner[static_cast<std::size_t>(k)] += svrg.anchor_grad[static_cast<std::size_t>(k)] -
                                                  at_anchor[static_cast<std::size_t>(k)];
    }
    const Vec grad_next = subset_mean_gradient(p, subset, x_next, round);
    if (inner_out) *inner_out = inner;
    return rg_step(rg, inner, grad_next, grad_curr);
}

}  // namespace fedsim
