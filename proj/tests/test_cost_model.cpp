#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "fedsim/cost_model.hpp"
#include "fedsim/verification.hpp"

using namespace fedsim;

TEST_CASE("selection strategies and counters") {
    CostConfig cfg;
    cfg.m = 3;
    cfg.c_a = 5;
    cfg.c_r = 2;

    SECTION("arbitrary selection increments n_a") {
        CostLedger ledger(cfg, 10);
        Round r = ledger.select_arbitrary({0});
        r.close();
        CHECK(ledger.rounds_ass() == 1);
        CHECK(ledger.communication_total() == Cost(5));
    }
    SECTION("full sync uses ceil(n/m) sequential rounds over disjoint blocks") {
        CostLedger ledger(cfg, 10);
        int rounds = 0;
        std::vector<int> seen;
        ledger.full_sync([&](Round& r) {
            ++rounds;
            for (int i : r.subset()) {
                seen.push_back(i);
                r.record_queries(i, 1);
            }
        });
        CHECK(rounds == 4);  // ceil(10/3)
        CHECK(ledger.rounds_ass() == 4);
        CHECK(seen.size() == 10);
        CHECK(ledger.local_total() == 4);  // K_r = 1 each
    }
    SECTION("single-block sync when n == m") {
        CostConfig one = cfg;
        one.m = 10;
        CostLedger ledger(one, 10);
        int rounds = 0;
        ledger.full_sync([&](Round&) { ++rounds; });
        CHECK(rounds == 1);
    }
    SECTION("invalid arbitrary selections") {
        CostLedger ledger(cfg, 10);
        CHECK_THROWS_AS(ledger.select_arbitrary({0, 1, 2, 3}), invalid_input);  // |S| > m
        CHECK_THROWS_AS(ledger.select_arbitrary({11}), invalid_input);
        CHECK_THROWS_AS(ledger.select_arbitrary({2, 2}), invalid_input);
    }
    SECTION("random selection covers [n] when m == n") {
        CostConfig all = cfg;
        all.m = 4;
        CostLedger ledger(all, 4);
        Rng rng(1);
        Round r = ledger.select_random(rng);
        CHECK(r.subset() == std::vector<int>{0, 1, 2, 3});
        r.close();
        CHECK(ledger.rounds_rss() == 1);
        CHECK(ledger.communication_total() == Cost(2));
    }
    SECTION("delegate rounds cost exactly one each") {
        CostLedger ledger(cfg, 10);
        for (int i = 0; i < 5; ++i) ledger.select_delegate().close();
        CHECK(ledger.rounds_dss() == 5);
        CHECK(ledger.communication_total() == Cost(5));
    }
    SECTION("mixed strategy arithmetic: 3 ASS + 4 RSS + 7 DSS") {
        CostLedger ledger(cfg, 10);
        Rng rng(2);
        for (int i = 0; i < 3; ++i) ledger.select_arbitrary({0, 1}).close();
        for (int i = 0; i < 4; ++i) ledger.select_random(rng).close();
        for (int i = 0; i < 7; ++i) ledger.select_delegate().close();
        CHECK(ledger.communication_total() == Cost(5 * 3 + 2 * 4 + 7));
        CHECK(ledger.totals().first == Cost(30));
    }
}

TEST_CASE("empty ledger totals are zero") {
    CostConfig cfg;
    CostLedger ledger(cfg, 3);
    const auto [comm, local] = ledger.totals();
    CHECK(comm == Cost(0));
    CHECK(local == 0);
}

TEST_CASE("per-round query recording") {
    CostConfig cfg;
    cfg.m = 4;
    SECTION("local total takes the per-round max") {
        CostLedger ledger(cfg, 6);
        Round r = ledger.select_arbitrary({1, 3});
        r.record_queries(1, 3);
        r.record_queries(3, 5);
        r.close();
        CHECK(ledger.local_total() == 5);
    }
    SECTION("recording for a non-selected client is an accounting error") {
        CostLedger ledger(cfg, 6);
        Round r = ledger.select_arbitrary({1, 3});
        CHECK_THROWS_AS(r.record_queries(2, 1), accounting_error);
        r.close();
    }
    SECTION("empty round contributes zero local cost") {
        CostLedger ledger(cfg, 6);
        ledger.select_arbitrary({0}).close();
        CHECK(ledger.local_total() == 0);
    }
    SECTION("totals require all rounds closed") {
        CostLedger ledger(cfg, 6);
        Round r = ledger.select_delegate();
        CHECK_THROWS_AS(ledger.totals(), accounting_error);
        r.close();
        CHECK(ledger.totals().second == 0);
    }
    SECTION("order of recording does not matter") {
        const auto run = [&](bool flip) {
            CostLedger ledger(cfg, 6);
            Round r = ledger.select_arbitrary({1, 3});
            if (flip) {
                r.record_queries(3, 2);
                r.record_queries(1, 7);
                r.record_queries(3, 2);
            } else {
                r.record_queries(1, 7);
                r.record_queries(3, 2);
                r.record_queries(3, 2);
            }
            r.close();
            return ledger.local_total();
        };
        CHECK(run(false) == run(true));
        CHECK(run(false) == 7);
    }
}

TEST_CASE("rational cost exactness") {
    CostConfig cfg;
    cfg.c_a = Cost(7, 2);  // 3.5
    cfg.c_r = Cost(5, 4);  // 1.25
    cfg.m = 2;
    CostLedger ledger(cfg, 4);
    Rng rng(3);
    for (int i = 0; i < 3; ++i) ledger.select_arbitrary({0, 1}).close();
    for (int i = 0; i < 5; ++i) ledger.select_random(rng).close();
    for (int i = 0; i < 2; ++i) ledger.select_delegate().close();
    // 3*(7/2) + 5*(5/4) + 2 = 21/2 + 25/4 + 2 = 75/4
    CHECK(ledger.communication_total() == Cost(75, 4));
}

TEST_CASE("cost config invariants") {
    CostConfig cfg;
    cfg.c_a = 1;
    cfg.c_r = 2;  // violates C_R <= C_A
    CHECK_THROWS_AS(cfg.validate(4), invalid_config);
    cfg.c_r = Cost(1, 2);  // violates 1 <= C_R
    CHECK_THROWS_AS(cfg.validate(4), invalid_config);
    cfg.c_r = 1;
    cfg.m = 0;
    CHECK_THROWS_AS(cfg.validate(4), invalid_config);
    cfg.m = 2;
    CHECK_NOTHROW(cfg.validate(4));
}

TEST_CASE("replacing an RSS round by ASS never lowers the total") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        CostConfig cfg;
        const auto r = static_cast<std::int64_t>(1 + rng.uniform_index(5));
        const auto a = r + static_cast<std::int64_t>(rng.uniform_index(5));
        cfg.c_r = r;
        cfg.c_a = a;
        cfg.m = 2;
        CostLedger with_rss(cfg, 4), with_ass(cfg, 4);
        Rng draw(7);
        with_rss.select_random(draw).close();
        with_ass.select_arbitrary({0, 1}).close();
        CHECK(with_ass.communication_total() >= with_rss.communication_total());
    }
}

TEST_CASE("subset sampling is uniform (chi-squared at the 0.001 level)") {
    // critical values for df = C(n,m) - 1 at p = 0.001
    const std::map<std::pair<int, int>, double> critical{{{5, 2}, 27.877}, {{6, 3}, 43.820}};
    for (const auto& [nm, crit] : critical) {
        const auto [n, m] = nm;
        const std::int64_t cells = binomial(n, m);
        const std::int64_t draws = 100000;
        std::map<std::vector<int>, std::int64_t> counts;
        CostConfig cfg;
        cfg.m = m;
        CostLedger ledger(cfg, n);
        Rng rng(static_cast<std::uint64_t>(n * 100 + m));
        for (std::int64_t i = 0; i < draws; ++i) {
            Round r = ledger.select_random(rng);
            counts[r.subset()] += 1;
            r.close();
        }
        CHECK(static_cast<std::int64_t>(counts.size()) == cells);
        const double expected = static_cast<double>(draws) / static_cast<double>(cells);
        double chi_sq = 0.0;
        for (const auto& [subset, count] : counts) {
            const double dev = static_cast<double>(count) - expected;
            chi_sq += dev * dev / expected;
        }
        INFO("n=" << n << " m=" << m << " chi^2=" << chi_sq);
        CHECK(chi_sq < crit);
    }
}

TEST_CASE("pairs of a 4-choose-2 draw appear with frequency 1/6") {
    CostConfig cfg;
    cfg.m = 2;
    CostLedger ledger(cfg, 4);
    Rng rng(17);
    std::map<std::vector<int>, std::int64_t> counts;
    const std::int64_t draws = 60000;
    for (std::int64_t i = 0; i < draws; ++i) {
        Round r = ledger.select_random(rng);
        counts[r.subset()] += 1;
        r.close();
    }
    REQUIRE(counts.size() == 6);
    const double p = 1.0 / 6.0;
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
    for (const auto& [subset, count] : counts) {
        const double freq = static_cast<double>(count) / static_cast<double>(draws);
        CHECK(std::fabs(freq - p) <= 3.0 * se);
    }
}

TEST_CASE("optional per-round log records strategy and max queries") {
    CostConfig cfg;
    cfg.m = 2;
    CostLedger ledger(cfg, 4);
    ledger.set_log_rounds(true);
    Rng rng(9);
    Round a = ledger.select_arbitrary({0, 1});
    a.record_queries(1, 3);
    a.close();
    ledger.select_delegate().close();
    Round r = ledger.select_random(rng);
    r.record_queries(r.subset().front(), 7);
    r.close();
    const auto& log = ledger.per_round_log();
    REQUIRE(log.size() == 3);
    CHECK(log[0] == std::pair{Strategy::Arbitrary, std::int64_t{3}});
    CHECK(log[1] == std::pair{Strategy::Delegate, std::int64_t{0}});
    CHECK(log[2] == std::pair{Strategy::Random, std::int64_t{7}});
}
