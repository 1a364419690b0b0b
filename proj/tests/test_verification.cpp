#include <catch2/catch_amalgamated.hpp>

#include "fedsim/quadratic.hpp"
#include "fedsim/verification.hpp"

using namespace fedsim;

TEST_CASE("subset enumeration moments") {
    SECTION("hand example: scalars 0,1,2,3 with m = 2") {
        const std::vector<Vec> g{{0.0}, {1.0}, {2.0}, {3.0}};
        const SubsetMeanMoments mm = enumerate_subset_mean(g, 2);
        CHECK(mm.mean_sq_deviation == Catch::Approx(5.0 / 12.0).epsilon(1e-14));
        CHECK(mm.mean_of_means[0] == Catch::Approx(1.5).margin(1e-14));
        // matches (n-m)/(n-1) * sigma^2 / m = (2/3)(1.25/2)
        CHECK(subset_variance_identity(g, 2) == Catch::Approx(5.0 / 12.0).epsilon(1e-14));
    }
    SECTION("m = n has zero deviation") {
        const std::vector<Vec> g{{1.0, 2.0}, {0.0, -1.0}, {3.0, 0.5}};
        CHECK(enumerate_subset_mean(g, 3).mean_sq_deviation == 0.0);
    }
    SECTION("m = 1 recovers sigma^2 exactly") {
        const std::vector<Vec> g{{1.0}, {4.0}, {-2.0}};
        Vec mean{1.0};
        mean[0] = (1.0 + 4.0 - 2.0) / 3.0;
        double sigma_sq = 0.0;
        for (const Vec& v : g) sigma_sq += (v[0] - mean[0]) * (v[0] - mean[0]) / 3.0;
        CHECK(enumerate_subset_mean(g, 1).mean_sq_deviation ==
              Catch::Approx(sigma_sq).epsilon(1e-14));
    }
    SECTION("identity holds for random vector sets (all n <= 8, all m)") {
        Rng rng(77);
        for (int rep = 0; rep < 50; ++rep) {
            const int n = 2 + static_cast<int>(rng.uniform_index(7));
            const int d = 1 + static_cast<int>(rng.uniform_index(5));
            std::vector<Vec> g(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(d)));
            for (auto& v : g)
                for (auto& x : v) x = rng.uniform(-10.0, 10.0);
            for (int m = 1; m <= n; ++m) {
                const double obs = enumerate_subset_mean(g, m).mean_sq_deviation;
                const double ref = subset_variance_identity(g, m);
                CHECK(std::fabs(obs - ref) <= 1e-12 * std::max(1.0, std::fabs(ref)));
            }
        }
    }
    SECTION("n too large to enumerate is rejected") {
        std::vector<Vec> g(13, Vec{0.0});
        CHECK_THROWS_AS(enumerate_subset_mean(g, 2), invalid_input);
    }
}

TEST_CASE("conditional unbiasedness oracles") {
    for (int n = 4; n <= 8; ++n) {
        const ProblemInstance p = make_random_quadratic_instance(n, 3, 100 + n);
        for (int m = 1; m < n; ++m) {
            for (const auto kind : {UnbiasednessKind::Saga, UnbiasednessKind::Svrg,
                                    UnbiasednessKind::RgSaga, UnbiasednessKind::RgSvrg}) {
                const OracleReport rep = check_conditional_unbiasedness(kind, p, m, 55);
                INFO(rep.name);
                CHECK(rep.pass);
                CHECK(rep.observed <= 1e-10);
            }
        }
    }
}

TEST_CASE("SAG aggregate fails unbiasedness (negative control)") {
    const ProblemInstance p = make_random_quadratic_instance(4, 3, 321);
    const OracleReport rep =
        check_conditional_unbiasedness(UnbiasednessKind::SagAggregate, p, 2, 13);
    CHECK(rep.pass);           // pass = "the bias is there"
    CHECK(rep.observed > 1e-6);
}

TEST_CASE("SAG counterexample reports") {
    const auto reports = sag_counterexample();
    REQUIRE(reports.size() == 5);
    for (const OracleReport& r : reports) {
        INFO(r.name << " observed=" << r.observed << " reference=" << r.reference);
        CHECK(r.pass);
    }
    SECTION("hand algebra: f1 = (1/2)Lx^2, f2 = -(1/2)Lx^2 + cx") {
        // grad h_i differences are L|x0-x1| each, so the SAGA error is
        // (1/2) * 2 * L^2 (x0-x1)^2
        const double L = 3.0;
        const Vec x0{0.7}, x1{-0.4};
        const double delta_x = x0[0] - x1[0];
        const double want_saga = L * L * delta_x * delta_x;
        const auto& saga_form = reports[1];
        CHECK(saga_form.reference == Catch::Approx(want_saga).epsilon(1e-12));
    }
}

TEST_CASE("geometric sampler oracle") {
    for (const double p : {0.5, 0.1, 0.01}) {
        const OracleReport rep = check_geometric_sampler(p, 100000, 7);
        INFO(rep.name << " observed=" << rep.observed << " expected=" << rep.reference);
        CHECK(rep.pass);
    }
    SECTION("p = 1 gives all zeros") {
        const OracleReport rep = check_geometric_sampler(1.0, 1000, 7);
        CHECK(rep.pass);
        CHECK(rep.observed == 0.0);
    }
}

TEST_CASE("variance-bound envelopes on a small instance") {
    QuadLogSumParams qp;
    qp.n = 16;
    qp.d = 10;
    qp.b = 3;
    QuadraticProblem quad = gen_quadratic_logsum(qp, 515);
    CostConfig cost;
    cost.m = 4;
    const Vec x0(10, 1.0);
    // a reduced run count keeps the unit suite quick; the acceptance suite
    // runs the full 200
    const auto reports =
        check_variance_bounds(quad.instance, quad.analytic_constants(), cost, x0, 50, 40, 99);
    REQUIRE(reports.size() == 6);
    for (const OracleReport& r : reports) {
        INFO(r.name << " lhs=" << r.observed << " rhs=" << r.reference);
        CHECK(r.pass);
    }
}

TEST_CASE("full participation collapses every bound's left side") {
    QuadLogSumParams qp;
    qp.n = 6;
    qp.d = 5;
    qp.b = 2;
    QuadraticProblem quad = gen_quadratic_logsum(qp, 71);
    CostConfig cost;
    cost.m = 6;  // m = n
    const auto reports =
        check_variance_bounds(quad.instance, quad.analytic_constants(), cost, Vec(5, 1.0), 5, 20, 7);
    for (const OracleReport& r : reports) {
        if (r.name == "rg-saga-paired-improvement") continue;  // ill-posed at zero error
        INFO(r.name);
        CHECK(r.observed <= 1e-12);
        CHECK(r.pass);
    }
}

TEST_CASE("variance-bound envelopes along a fixed synthetic path") {
    QuadLogSumParams qp;
    qp.n = 12;
    qp.d = 6;
    qp.b = 2;
    QuadraticProblem quad = gen_quadratic_logsum(qp, 808);
    const auto reports = check_variance_bounds_synthetic(
        quad.instance, quad.analytic_constants(), /*m=*/3, Vec(6, 1.0), 60, 40, 17);
    REQUIRE(reports.size() == 6);
    for (const OracleReport& r : reports) {
        INFO(r.name << " lhs=" << r.observed << " rhs=" << r.reference);
        CHECK(r.pass);
    }
}
