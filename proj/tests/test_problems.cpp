#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fedsim/logistic.hpp"
#include "fedsim/problem.hpp"
#include "fedsim/quadratic.hpp"

using namespace fedsim;

namespace {

ProblemInstance one_client(OracleFn f, int d) {
    ProblemInstance p;
    p.n = 1;
    p.d = d;
    p.clients.push_back(std::move(f));
    return p;
}

OracleFn scalar_quadratic(double a, double c = 0.0) {
    return [a, c](const Vec& x, Vec& g) {
        g[0] += a * x[0] + c;
        return 0.5 * a * x[0] * x[0] + c * x[0];
    };
}

}  // namespace

TEST_CASE("oracle_query on quadratics") {
    SECTION("stationary point of 1/2|x|^2") {
        auto p = one_client([](const Vec& x, Vec& g) {
            double v = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                v += 0.5 * x[k] * x[k];
                g[k] += x[k];
            }
            return v;
        }, 3);
        const auto [v, g] = oracle_query(p, 0, Vec{0.0, 0.0, 0.0});
        CHECK(v == 0.0);
        CHECK(g == Vec{0.0, 0.0, 0.0});
    }
    SECTION("1/2 <A(x-b), x-b> with A=diag(2), b=(1), x=(0)") {
        auto p = one_client([](const Vec& x, Vec& g) {
            const double diff = x[0] - 1.0;
            g[0] += 2.0 * diff;
            return 0.5 * 2.0 * diff * diff;
        }, 1);
        const auto [v, g] = oracle_query(p, 0, Vec{0.0});
        CHECK(v == Catch::Approx(1.0));
        CHECK(g[0] == Catch::Approx(-2.0));
    }
    SECTION("log-sum penalty contributes nothing at the origin") {
        Vec g(4, 0.0);
        const double v = logsum_penalty(10.0, Vec(4, 0.0), &g);
        CHECK(v == 0.0);
        CHECK(g == Vec(4, 0.0));
    }
    SECTION("errors") {
        auto p = one_client(scalar_quadratic(1.0), 1);
        CHECK_THROWS_AS(oracle_query(p, 0, Vec{1.0, 2.0}), invalid_input);
        CHECK_THROWS_AS(oracle_query(p, 5, Vec{1.0}), invalid_input);
    }
    SECTION("oracle is deterministic") {
        QuadLogSumParams qp;
        qp.n = 3;
        qp.d = 8;
        qp.b = 2;
        auto prob = gen_quadratic_logsum(qp, 11);
        const Vec x{0.3, -1.2, 4.0, 0.0, 2.2, -0.7, 1.0, 9.9};
        const auto a = oracle_query(prob.instance, 1, x);
        const auto b = oracle_query(prob.instance, 1, x);
        CHECK(a.first == b.first);
        CHECK(a.second == b.second);
    }
}

TEST_CASE("full objective and gradient") {
    SECTION("cancellation: f_1 = x, f_2 = -x") {
        ProblemInstance p;
        p.n = 2;
        p.d = 1;
        p.clients.push_back([](const Vec& x, Vec& g) { g[0] += 1.0; return x[0]; });
        p.clients.push_back([](const Vec& x, Vec& g) { g[0] += -1.0; return -x[0]; });
        CHECK(full_objective(p, Vec{3.7}) == 0.0);
        CHECK(full_gradient(p, Vec{3.7}) == Vec{0.0});
    }
    SECTION("mean of scalar quadratics") {
        ProblemInstance p;
        p.n = 4;
        p.d = 1;
        for (double a : {1.0, 2.0, 3.0, 4.0}) p.clients.push_back(scalar_quadratic(a));
        CHECK(full_gradient(p, Vec{1.0})[0] == Catch::Approx(2.5));
    }
    SECTION("equals mean of oracle gradients") {
        QuadLogSumParams qp;
        qp.n = 7;
        qp.d = 12;
        qp.b = 3;
        auto prob = gen_quadratic_logsum(qp, 5);
        Rng rng(99);
        Vec x(12);
        for (auto& v : x) v = rng.uniform(-3.0, 3.0);
        Vec mean(12, 0.0);
        for (int i = 0; i < prob.instance.n; ++i)
            axpy(1.0 / prob.instance.n, oracle_query(prob.instance, i, x).second, mean);
        const Vec full = full_gradient(prob.instance, x);
        for (int k = 0; k < 12; ++k)
            CHECK(full[k] == Catch::Approx(mean[k]).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("quadratic log-sum generator") {
    SECTION("paper preset dimensions and spectral box") {
        QuadLogSumParams qp;  // defaults are the paper preset
        CHECK(qp.alpha == 10.0);
        CHECK(qp.b == 5);
        CHECK(qp.n == 100);
        CHECK(qp.d == 1000);
        CHECK(qp.diag_base_hi == 110.0);
        CHECK(qp.noise_hi == 18.0);
        CHECK(qp.clip_lo == 1.0);
        CHECK(qp.clip_hi == 100.0);
    }
    SECTION("desk preset diagonals stay in [0, 100]") {
        QuadLogSumParams qp;
        qp.n = 20;
        qp.d = 50;
        auto prob = gen_quadratic_logsum(qp, 2024);
        int near_zero = 0;
        for (const auto& client : prob.diag)
            for (const Vec& a : client)
                for (double v : a) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 100.0);
                    near_zero += v < 1e-5;
                }
        CHECK(near_zero == 20 * 5 * static_cast<int>(0.05 * 50));
    }
    SECTION("zero noise and zero_eig_fraction give identical clients") {
        QuadLogSumParams qp;
        qp.n = 6;
        qp.d = 10;
        qp.b = 2;
        qp.noise_lo = qp.noise_hi = 9.0;  // same shift for everyone
        qp.zero_eig_fraction = 0.0;
        auto prob = gen_quadratic_logsum(qp, 3);
        const auto c = prob.analytic_constants();
        CHECK(c.delta <= 1e-12);
        CHECK(c.delta1 <= 1e-12);

        Rng rng(7);
        Vec x(10), y(10);
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);
        for (auto& v : y) v = rng.uniform(-2.0, 2.0);
        const auto s = estimate_constants(prob.instance, x, y);
        CHECK(s.delta <= 1e-10);
        CHECK(s.delta1 <= 1e-10);
    }
    SECTION("same seed reproduces the instance bit for bit") {
        QuadLogSumParams qp;
        qp.n = 5;
        qp.d = 9;
        qp.b = 2;
        auto a = gen_quadratic_logsum(qp, 77);
        auto b = gen_quadratic_logsum(qp, 77);
        CHECK(a.diag == b.diag);
        CHECK(a.targets == b.targets);
        auto c = gen_quadratic_logsum(qp, 78);
        CHECK(a.diag != c.diag);
    }
}

TEST_CASE("dissimilarity variance identity") {
    // (1/n) sum |grad h_i(x) - grad h_i(y)|^2
    //   = (1/n) sum |grad f_i(x) - grad f_i(y)|^2 - |grad f(x) - grad f(y)|^2
    QuadLogSumParams qp;
    qp.n = 8;
    qp.d = 6;
    qp.b = 2;
    auto prob = gen_quadratic_logsum(qp, 13);
    const auto& p = prob.instance;
    Rng rng(31);
    for (int pair = 0; pair < 100; ++pair) {
        Vec x(6), y(6);
        for (auto& v : x) v = rng.uniform(-4.0, 4.0);
        for (auto& v : y) v = rng.uniform(-4.0, 4.0);
        const Vec fx = full_gradient(p, x), fy = full_gradient(p, y);
        double lhs = 0.0, fi_term = 0.0;
        for (int i = 0; i < p.n; ++i) {
            const Vec gx = oracle_query(p, i, x).second;
            const Vec gy = oracle_query(p, i, y).second;
            for (int k = 0; k < p.d; ++k) {
                const double dh = (fx[k] - gx[k]) - (fy[k] - gy[k]);
                const double df = gx[k] - gy[k];
                lhs += dh * dh / p.n;
                fi_term += df * df / p.n;
            }
        }
        const double rhs = fi_term - dist_sq(fx, fy);
        CHECK(lhs == Catch::Approx(rhs).epsilon(1e-9).margin(1e-9));
    }
}

TEST_CASE("estimate_constants") {
    SECTION("exact L1 for a pure quadratic delegate") {
        ProblemInstance p;
        p.n = 2;
        p.d = 1;
        p.clients.push_back(scalar_quadratic(4.5));
        p.clients.push_back(scalar_quadratic(4.5));
        const auto s = estimate_constants(p, Vec{-1.0}, Vec{2.0});
        CHECK(s.l1 == Catch::Approx(4.5));
        CHECK(s.delta == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("zero displacement is degenerate") {
        ProblemInstance p = one_client(scalar_quadratic(1.0), 1);
        CHECK_THROWS_AS(estimate_constants(p, Vec{1.0}, Vec{1.0}), invalid_input);
    }
    SECTION("delta sample below the brute-force diagonal bound") {
        QuadLogSumParams qp;
        qp.n = 4;
        qp.d = 3;
        qp.b = 2;
        auto prob = gen_quadratic_logsum(qp, 17);
        // brute-force bound: max_k sqrt(mean_i dev_{i,k}^2) over the collapsed diagonals
        Vec grand(3, 0.0);
        for (int i = 0; i < 4; ++i) axpy(0.25, prob.mean_diag[i], grand);
        double bound_sq = 0.0;
        for (int k = 0; k < 3; ++k) {
            double s = 0.0;
            for (int i = 0; i < 4; ++i) {
                const double dev = grand[k] - prob.mean_diag[i][k];
                s += dev * dev / 4.0;
            }
            bound_sq = std::max(bound_sq, s);
        }
        Rng rng(5);
        for (int rep = 0; rep < 20; ++rep) {
            Vec x(3), y(3);
            for (auto& v : x) v = rng.uniform(-2.0, 2.0);
            for (auto& v : y) v = rng.uniform(-2.0, 2.0);
            const auto s = estimate_constants(prob.instance, x, y);
            CHECK(s.delta <= std::sqrt(bound_sq) + 1e-9);
        }
    }
}

TEST_CASE("libsvm parsing") {
    SECTION("well-formed text with blank lines") {
        std::istringstream in("+1 1:0.5 3:2\n\n-1 2:1.5\n");
        const Dataset ds = parse_libsvm(in);
        REQUIRE(ds.rows.size() == 2);
        CHECK(ds.dim == 3);
        CHECK(ds.rows[0].label == 1.0);
        CHECK(ds.rows[0].index == std::vector<int>{0, 2});
        CHECK(ds.rows[1].value == std::vector<double>{1.5});
    }
    SECTION("malformed token aborts with line number") {
        std::istringstream in("+1 1:0.5\n-1 oops\n");
        CHECK_THROWS_WITH(parse_libsvm(in), Catch::Matchers::ContainsSubstring("line 2"));
    }
    SECTION("duplicate or non-increasing indices rejected") {
        std::istringstream in("+1 2:1 2:3\n");
        CHECK_THROWS_AS(parse_libsvm(in), data_error);
        std::istringstream in2("+1 3:1 2:3\n");
        CHECK_THROWS_AS(parse_libsvm(in2), data_error);
    }
    SECTION("zero-based index rejected") {
        std::istringstream in("+1 0:1\n");
        CHECK_THROWS_AS(parse_libsvm(in), data_error);
    }
}

TEST_CASE("logistic nonconvex generator") {
    SECTION("single row, alpha 0: value log 2, gradient -1/2") {
        Dataset ds;
        ds.dim = 1;
        ds.rows.push_back({1.0, {0}, {1.0}});
        LogisticParams lp;
        lp.n = 1;
        lp.alpha = 0.0;
        auto prob = gen_logistic_nonconvex(ds, lp);
        const auto [v, g] = oracle_query(prob.instance, 0, Vec{0.0});
        CHECK(v == Catch::Approx(std::log(2.0)));
        CHECK(g[0] == Catch::Approx(-0.5));
    }
    SECTION("regularizer is flat at the origin") {
        Dataset ds;
        ds.dim = 2;
        ds.rows.push_back({1.0, {0, 1}, {1.0, -2.0}});
        LogisticParams lp;
        lp.n = 1;
        lp.alpha = 0.7;
        auto prob = gen_logistic_nonconvex(ds, lp);
        const auto [v, g] = oracle_query(prob.instance, 0, Vec{0.0, 0.0});
        CHECK(v == Catch::Approx(std::log(2.0)));  // regularizer adds 0
        CHECK(g[1] == Catch::Approx(0.5 * 2.0));   // pure loss gradient
    }
    SECTION("label outside {-1,+1} rejected") {
        Dataset ds;
        ds.dim = 1;
        ds.rows.push_back({2.0, {0}, {1.0}});
        LogisticParams lp;
        lp.n = 1;
        CHECK_THROWS_AS(gen_logistic_nonconvex(ds, lp), data_error);
    }
    SECTION("more shards than rows rejected") {
        Dataset ds;
        ds.dim = 1;
        ds.rows.push_back({1.0, {0}, {1.0}});
        LogisticParams lp;
        lp.n = 2;
        CHECK_THROWS_AS(gen_logistic_nonconvex(ds, lp), invalid_input);
    }
    SECTION("mean of shards recovers the global mean loss plus regularizer") {
        Dataset ds;
        ds.dim = 2;
        Rng rng(3);
        for (int r = 0; r < 9; ++r)
            ds.rows.push_back({r % 2 == 0 ? 1.0 : -1.0,
                               {0, 1},
                               {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}});
        LogisticParams lp;
        lp.n = 3;
        lp.alpha = 0.2;
        auto prob = gen_logistic_nonconvex(ds, lp);
        const Vec x{0.4, -0.9};
        double direct = 0.0;
        for (const SparseRow& row : ds.rows) {
            double z = 0.0;
            for (std::size_t t = 0; t < row.index.size(); ++t)
                z += row.value[t] * x[static_cast<std::size_t>(row.index[t])];
            direct += std::log1p(std::exp(-row.label * z)) / 9.0;
        }
        for (double xk : x) direct += 0.2 * xk * xk / (1.0 + xk * xk);
        CHECK(full_objective(prob.instance, x) == Catch::Approx(direct).epsilon(1e-12));
    }
}
