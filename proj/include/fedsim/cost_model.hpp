#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include <boost/rational.hpp>

#include "fedsim/common.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// Costs are exact rationals so that comm = C_A*N_A + C_R*N_R + N_D carries no
// float drift.
using Cost = boost::rational<std::int64_t>;

inline double to_double(const Cost& c) {
    return static_cast<double>(c.numerator()) / static_cast<double>(c.denominator());
}

enum class Strategy { Arbitrary, Random, Delegate };

// Client-selection cost configuration; the boxed relation 1 <= C_R <= C_A.
struct CostConfig {
    Cost c_a = 1;              // cost of one ASS round
    Cost c_r = 1;              // cost of one RSS round
    int m = 1;                 // max clients contacted per round
    std::vector<int> delegate = {0};  // fixed delegate set S_D

    void validate(int n) const {
        if (!(Cost(1) <= c_r && c_r <= c_a))
            throw invalid_config("CostConfig: need 1 <= C_R <= C_A");
        if (m < 1 || m > n) throw invalid_config("CostConfig: need 1 <= m <= n");
        if (delegate.empty() || static_cast<int>(delegate.size()) > m)
            throw invalid_config("CostConfig: need 1 <= |S_D| <= m");
        for (int i : delegate)
            if (i < 0 || i >= n) throw invalid_config("CostConfig: delegate index out of range");
    }

    static int full_sync_rounds(int n, int m) { return (n + m - 1) / m; }
};

class CostLedger;

// Handle for one open communication round. Per-client query counts accumulate
// and the round's local cost is their max, so recording order is irrelevant.
class Round {
  public:
    Round(CostLedger* ledger, Strategy strategy, std::vector<int> subset)
        : ledger_(ledger), strategy_(strategy), subset_(std::move(subset)) {
        counts_.assign(subset_.size(), 0);
    }
    Round(Round&& other) noexcept
        : ledger_(other.ledger_),
          strategy_(other.strategy_),
          subset_(std::move(other.subset_)),
          counts_(std::move(other.counts_)),
          closed_(other.closed_) {
        other.ledger_ = nullptr;
        other.closed_ = true;
    }
    Round(const Round&) = delete;
    Round& operator=(const Round&) = delete;
    ~Round() { close(); }

    const std::vector<int>& subset() const { return subset_; }
    Strategy strategy() const { return strategy_; }

    void record_queries(int client, std::int64_t k);
    void close();

  private:
    CostLedger* ledger_ = nullptr;
    Strategy strategy_;
    std::vector<int> subset_;             // sorted client indices
    std::vector<std::int64_t> counts_;    // query counts aligned with subset_
    bool closed_ = false;
};

// Counters N_A, N_R, N_D and the local-complexity sum of per-round maxima.
class CostLedger {
  public:
    explicit CostLedger(CostConfig config, int n) : config_(std::move(config)), n_(n) {
        config_.validate(n);
    }

    // ASS: any subset with |S| <= m.
    Round select_arbitrary(std::vector<int> subset) {
        validate_subset(subset);
        ++n_a_;
        ++open_rounds_;
        return Round(this, Strategy::Arbitrary, std::move(subset));
    }

    // RSS: uniform m-subset (or a smaller uniform subset when asked).
    Round select_random(Rng& rng, int size = 0) {
        if (size == 0) size = config_.m;
        if (size < 1 || size > config_.m)
            throw invalid_input("select_random: subset size must be in [1, m]");
        ++n_r_;
        ++open_rounds_;
        return Round(this, Strategy::Random, rng.subset(n_, size));
    }

    // DSS: the fixed delegate set, unit cost.
    Round select_delegate() {
        ++n_d_;
        ++open_rounds_;
        return Round(this, Strategy::Delegate, config_.delegate);
    }

    // Full synchronization: ceil(n/m) sequential ASS rounds over disjoint
    // blocks. visit(round) does the per-round client work.
    template <typename Visit>
    void full_sync(Visit&& visit) {
        for (int lo = 0; lo < n_; lo += config_.m) {
            const int hi = std::min(lo + config_.m, n_);
            std::vector<int> block(static_cast<std::size_t>(hi - lo));
            for (int i = lo; i < hi; ++i) block[static_cast<std::size_t>(i - lo)] = i;
            Round r = select_arbitrary(std::move(block));
            visit(r);
            r.close();
        }
    }

    Cost communication_total() const {
        return config_.c_a * n_a_ + config_.c_r * n_r_ + Cost(n_d_);
    }
    std::int64_t local_total() const { return local_total_; }

    // (communication complexity, local complexity); requires all rounds closed.
    std::pair<Cost, std::int64_t> totals() const {
        if (open_rounds_ != 0) throw accounting_error("totals: rounds still open");
        return {communication_total(), local_total_};
    }
    std::int64_t rounds_ass() const { return n_a_; }
    std::int64_t rounds_rss() const { return n_r_; }
    std::int64_t rounds_dss() const { return n_d_; }
    int open_rounds() const { return open_rounds_; }

    const CostConfig& config() const { return config_; }
    int n() const { return n_; }

    void set_log_rounds(bool on) { log_rounds_ = on; }
    const std::vector<std::pair<Strategy, std::int64_t>>& per_round_log() const {
        return per_round_log_;
    }

  private:
    friend class Round;

    void validate_subset(const std::vector<int>& subset) const {
        if (subset.empty() || static_cast<int>(subset.size()) > config_.m)
            throw invalid_input("select_arbitrary: need 1 <= |S| <= m");
        for (std::size_t i = 0; i < subset.size(); ++i) {
            if (subset[i] < 0 || subset[i] >= n_)
                throw invalid_input("select_arbitrary: client index out of range");
            if (i > 0 && subset[i] <= subset[i - 1])
                throw invalid_input("select_arbitrary: indices must be distinct and sorted");
        }
    }

    void finish_round(Strategy strategy, std::int64_t max_queries) {
        local_total_ += max_queries;
        --open_rounds_;
        if (log_rounds_) per_round_log_.emplace_back(strategy, max_queries);
    }

    CostConfig config_;
    int n_ = 0;
    std::int64_t n_a_ = 0, n_r_ = 0, n_d_ = 0;
    std::int64_t local_total_ = 0;
    int open_rounds_ = 0;
    bool log_rounds_ = false;
    std::vector<std::pair<Strategy, std::int64_t>> per_round_log_;
};

inline void Round::record_queries(int client, std::int64_t k) {
    if (closed_ || !ledger_) throw accounting_error("record_queries: round already closed");
    const auto it = std::lower_bound(subset_.begin(), subset_.end(), client);
    if (it == subset_.end() || *it != client)
        throw accounting_error("record_queries: client " + std::to_string(client) +
                               " is not in this round's subset");
    counts_[static_cast<std::size_t>(it - subset_.begin())] += k;
}

inline void Round::close() {
    if (closed_ || !ledger_) return;
    closed_ = true;
    std::int64_t max_q = 0;
    for (std::int64_t c : counts_) max_q = std::max(max_q, c);
    ledger_->finish_round(strategy_, max_q);
}

}  // namespace fedsim
