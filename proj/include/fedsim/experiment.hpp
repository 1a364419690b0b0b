#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fedsim/baselines.hpp"
#include "fedsim/icgm.hpp"
#include "fedsim/logistic.hpp"
#include "fedsim/quadratic.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

using json = nlohmann::json;

struct ProblemSpec {
    std::string generator = "quad_logsum";  // or "logistic"
    QuadLogSumParams quad;
    std::uint64_t data_seed = 7;
    std::string dataset_path;
    LogisticParams logistic;
};

// Per-algorithm settings; negative values mean "derive from the problem
// constants" (the experiment-grade formulas).
struct AlgorithmSpec {
    std::string algo;  // icgm-rg-saga, icgm-rg-svrg, icgm-svrg, gd, fedavg,
                       // scaffold, fedred-gd, saber-full
    double lambda = -1.0;
    double beta = -1.0;
    double p = -1.0;    // local-solver p (icgm/saber) or restart/refresh prob
    double p_b = -1.0;  // SVRG anchor probability
    double step = -1.0;
    double eta = -1.0;  // fedred smoothing weight / icgm local smoothness
    std::int64_t iterations = 100;
    std::int64_t local_k = 20;
    std::string local_solver = "geometric";  // or "const"
    int init_mode = 2;
    double epsilon = 0.0;
};

struct SweepSpec {
    std::string param;  // empty = no sweep
    std::vector<double> values;
};

struct ExperimentConfig {
    ProblemSpec problem;
    CostConfig cost;
    std::vector<AlgorithmSpec> algorithms;
    std::vector<std::uint64_t> seeds = {1};
    std::uint64_t master_seed = 0;
    std::string out_dir = "out";
    bool diagnostics = true;
    SweepSpec sweep;
    int workers = 1;

    void validate() const {
        if (algorithms.empty()) throw invalid_config("ExperimentConfig: need >= 1 algorithm");
        if (seeds.empty()) throw invalid_config("ExperimentConfig: need >= 1 seed");
        if (!sweep.param.empty() && sweep.values.empty())
            throw invalid_config("ExperimentConfig: sweep values must be nonempty");
    }
};

// ---------------------------------------------------------------------------
// JSON config
// ---------------------------------------------------------------------------

inline Cost cost_from_json(const json& j) {
    if (j.is_number_integer()) return Cost(j.get<std::int64_t>());
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        const auto slash = s.find('/');
        if (slash == std::string::npos) return Cost(std::stoll(s));
        return Cost(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    }
    throw invalid_config("cost values must be integers or \"a/b\" strings");
}

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig cfg;
    if (j.contains("problem")) {
        const json& p = j.at("problem");
        cfg.problem.generator = p.value("generator", std::string("quad_logsum"));
        cfg.problem.data_seed = p.value("data_seed", 7ULL);
        if (cfg.problem.generator == "quad_logsum") {
            QuadLogSumParams& q = cfg.problem.quad;
            q.n = p.value("n", q.n);
            q.d = p.value("d", q.d);
            q.b = p.value("b", q.b);
            q.alpha = p.value("alpha", q.alpha);
            if (p.contains("diag_base")) {
                q.diag_base_lo = p.at("diag_base").at(0).get<double>();
                q.diag_base_hi = p.at("diag_base").at(1).get<double>();
            }
            if (p.contains("noise")) {
                q.noise_lo = p.at("noise").at(0).get<double>();
                q.noise_hi = p.at("noise").at(1).get<double>();
            }
            if (p.contains("clip")) {
                q.clip_lo = p.at("clip").at(0).get<double>();
                q.clip_hi = p.at("clip").at(1).get<double>();
            }
            q.zero_eig_fraction = p.value("zero_eig_fraction", q.zero_eig_fraction);
        } else if (cfg.problem.generator == "logistic") {
            cfg.problem.dataset_path = p.value("path", std::string());
            cfg.problem.logistic.n = p.value("n", cfg.problem.logistic.n);
            cfg.problem.logistic.alpha = p.value("alpha", cfg.problem.logistic.alpha);
            const std::string mode = p.value("shards", std::string("contiguous"));
            cfg.problem.logistic.shard_mode =
                mode == "dirichlet" ? ShardMode::Dirichlet : ShardMode::Contiguous;
            cfg.problem.logistic.dirichlet_concentration =
                p.value("dirichlet_concentration", 0.5);
        } else {
            throw invalid_config("unknown generator '" + cfg.problem.generator + "'");
        }
    }
    if (j.contains("cost")) {
        const json& c = j.at("cost");
        if (c.contains("c_a")) cfg.cost.c_a = cost_from_json(c.at("c_a"));
        if (c.contains("c_r")) cfg.cost.c_r = cost_from_json(c.at("c_r"));
        cfg.cost.m = c.value("m", cfg.cost.m);
    }
    for (const json& a : j.value("algorithms", json::array())) {
        AlgorithmSpec spec;
        spec.algo = a.at("algo").get<std::string>();
        spec.lambda = a.value("lambda", -1.0);
        spec.beta = a.value("beta", -1.0);
        spec.p = a.value("p", -1.0);
        spec.p_b = a.value("p_b", -1.0);
        spec.step = a.value("step", -1.0);
        spec.eta = a.value("eta", -1.0);
        spec.iterations = a.value("T", static_cast<std::int64_t>(100));
        spec.local_k = a.value("K", static_cast<std::int64_t>(20));
        spec.local_solver = a.value("local_solver", std::string("geometric"));
        spec.init_mode = a.value("init_mode", 2);
        spec.epsilon = a.value("epsilon", 0.0);
        cfg.algorithms.push_back(std::move(spec));
    }
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.master_seed = j.value("master_seed", 0ULL);
    cfg.out_dir = j.value("out", std::string("out"));
    cfg.diagnostics = j.value("diagnostics", true);
    if (j.contains("sweep")) {
        cfg.sweep.param = j.at("sweep").value("param", std::string());
        cfg.sweep.values = j.at("sweep").value("values", std::vector<double>());
    }
    cfg.workers = j.value("workers", 1);
    return cfg;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline std::vector<std::string> preset_names() {
    return {"quad-paper", "quad-desk",     "fig2",          "fig3-mushrooms", "fig3-duke",
            "ablation-CA", "ablation-p",   "ablation-lambda", "ablation-beta", "ablation-n"};
}

inline ExperimentConfig make_preset(const std::string& name) {
    ExperimentConfig cfg;
    const auto icgm_pair = [&](std::int64_t T) {
        AlgorithmSpec saga;
        saga.algo = "icgm-rg-saga";
        saga.iterations = T;
        AlgorithmSpec svrg;
        svrg.algo = "icgm-rg-svrg";
        svrg.iterations = T;
        return std::vector<AlgorithmSpec>{saga, svrg};
    };

    if (name == "quad-paper" || name == "fig2" || name == "quad-desk" ||
        name.rfind("ablation", 0) == 0) {
        cfg.problem.generator = "quad_logsum";
        cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    }

    if (name == "quad-paper") {
        cfg.problem.quad = QuadLogSumParams{};  // alpha 10, b 5, n 100, d 1000
        cfg.cost.m = 10;
        cfg.algorithms = icgm_pair(2000);
    } else if (name == "quad-desk") {
        cfg.problem.quad.n = 20;
        cfg.problem.quad.d = 50;
        cfg.cost.m = 4;
        cfg.algorithms = icgm_pair(1000);
    } else if (name == "fig2") {
        cfg.problem.quad.n = 40;
        cfg.problem.quad.d = 200;
        cfg.cost.m = 6;
        cfg.algorithms = icgm_pair(4000);
        AlgorithmSpec scaffold;
        scaffold.algo = "scaffold";
        scaffold.iterations = 3000;
        AlgorithmSpec fedavg;
        fedavg.algo = "fedavg";
        fedavg.iterations = 3000;
        AlgorithmSpec saber;
        saber.algo = "saber-full";
        saber.iterations = 4000;
        AlgorithmSpec gd;
        gd.algo = "gd";
        gd.iterations = 3000;
        cfg.algorithms.push_back(scaffold);
        cfg.algorithms.push_back(fedavg);
        cfg.algorithms.push_back(saber);
        cfg.algorithms.push_back(gd);
    } else if (name == "fig3-mushrooms" || name == "fig3-duke") {
        cfg.problem.generator = "logistic";
        cfg.problem.logistic.n = 10;
        cfg.problem.logistic.alpha = name == "fig3-duke" ? 0.001 : 0.1;
        cfg.cost.m = 1;
        cfg.algorithms = icgm_pair(2000);
        cfg.seeds = {1, 2, 3};
    } else if (name == "ablation-CA") {
        cfg.problem.quad.n = 20;
        cfg.problem.quad.d = 50;
        cfg.cost.m = 4;
        cfg.algorithms = icgm_pair(1500);
        cfg.sweep.param = "c_a";
        cfg.sweep.values = {1, 5, 10, 20};
    } else if (name == "ablation-p") {
        cfg.problem.quad.n = 20;
        cfg.problem.quad.d = 50;
        cfg.cost.m = 4;
        cfg.algorithms = {icgm_pair(1500)[0]};
        cfg.sweep.param = "p";
        cfg.sweep.values = {0.5, 0.05, 0.005};
    } else if (name == "ablation-lambda") {
        cfg.problem.quad.n = 20;
        cfg.problem.quad.d = 50;
        cfg.cost.m = 4;
        cfg.algorithms = {icgm_pair(1500)[0]};
        cfg.sweep.param = "lambda";
        cfg.sweep.values = {1, 10, 100};
    } else if (name == "ablation-beta") {
        cfg.problem.quad.n = 20;
        cfg.problem.quad.d = 50;
        cfg.cost.m = 4;
        cfg.algorithms = {icgm_pair(1500)[0]};
        cfg.sweep.param = "beta";
        cfg.sweep.values = {0.5, 0.1, 0.05, 0.01, 0.005, 0.001};
    } else if (name == "ablation-n") {
        cfg.problem.quad.d = 50;
        cfg.cost.m = 1;
        cfg.algorithms = {icgm_pair(30000)[0]};
        cfg.sweep.param = "n";
        cfg.sweep.values = {10, 100, 1000};
        cfg.seeds = {1, 2, 3};
    } else {
        throw invalid_config("unknown preset '" + name + "'");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

struct BuiltProblem {
    ProblemInstance instance;
    SimilarityConstants constants;
    Vec x0;
};

inline BuiltProblem build_problem(const ProblemSpec& spec) {
    BuiltProblem bp;
    if (spec.generator == "quad_logsum") {
        QuadraticProblem qp = gen_quadratic_logsum(spec.quad, spec.data_seed);
        bp.constants = qp.analytic_constants();
        bp.instance = std::move(qp.instance);
        bp.x0.assign(static_cast<std::size_t>(bp.instance.d), 1.0);
    } else if (spec.generator == "logistic") {
        if (spec.dataset_path.empty()) throw invalid_config("logistic: missing dataset path");
        LogisticProblem lp = gen_logistic_nonconvex(load_libsvm(spec.dataset_path), spec.logistic);
        bp.instance = std::move(lp.instance);
        bp.x0.assign(static_cast<std::size_t>(bp.instance.d), 0.1);
        // empirical running-maximum constants from a few probe pairs
        Rng rng(split_seed(spec.data_seed, 0xe571));
        SimilarityConstants c;
        c.l1 = 0.0;
        for (int probe = 0; probe < 10; ++probe) {
            Vec a(static_cast<std::size_t>(bp.instance.d)), b(a);
            for (std::size_t k = 0; k < a.size(); ++k) {
                a[k] = rng.uniform(-0.5, 0.5);
                b[k] = rng.uniform(-0.5, 0.5);
            }
            const ConstantSample s = estimate_constants(bp.instance, a, b);
            c.l1 = std::max(c.l1, s.l1);
            c.delta = std::max(c.delta, s.delta);
            c.delta1 = std::max(c.delta1, s.delta1);
        }
        c.lmax = c.l1;
        bp.constants = c;
    } else {
        throw invalid_config("unknown generator '" + spec.generator + "'");
    }
    return bp;
}

struct ResolvedParams {
    json as_json;
};

struct RunOutcome {
    std::string algo;
    std::uint64_t seed = 0;
    std::string sweep_label;
    RunTrace trace;
    json summary;
};

namespace detail {

inline std::string format_value(double v) {
    std::string s = format_double(v);
    for (char& c : s)
        if (c == '.' || c == '+' || c == '-') c = (c == '.') ? 'p' : (c == '+' ? 'P' : 'm');
    return s;
}

inline void apply_sweep(ExperimentConfig& cfg, const std::string& param, double value) {
    const auto as_int = [&]() {
        const auto v = static_cast<std::int64_t>(value);
        if (static_cast<double>(v) != value)
            throw invalid_config("sweep '" + param + "' needs an integral value");
        return v;
    };
    if (param == "c_a") {
        cfg.cost.c_a = Cost(as_int());
    } else if (param == "c_r") {
        cfg.cost.c_r = Cost(as_int());
    } else if (param == "m") {
        cfg.cost.m = static_cast<int>(as_int());
    } else if (param == "n") {
        cfg.problem.quad.n = static_cast<int>(as_int());
    } else if (param == "lambda") {
        for (auto& a : cfg.algorithms) a.lambda = value;
    } else if (param == "beta") {
        for (auto& a : cfg.algorithms) a.beta = value;
    } else if (param == "p") {
        for (auto& a : cfg.algorithms) a.p = value;
    } else if (param == "p_b") {
        for (auto& a : cfg.algorithms) a.p_b = value;
    } else if (param == "K") {
        for (auto& a : cfg.algorithms) a.local_k = as_int();
    } else if (param == "step") {
        for (auto& a : cfg.algorithms) a.step = value;
    } else if (param == "T") {
        for (auto& a : cfg.algorithms) a.iterations = as_int();
    } else {
        throw invalid_config("unknown sweep parameter '" + param + "'");
    }
}

}  // namespace detail

// Executes one (algorithm, seed) cell on an already-built problem.
inline RunOutcome execute_run(const BuiltProblem& bp, const CostConfig& cost,
                              const AlgorithmSpec& spec, std::uint64_t seed,
                              std::uint64_t master_seed, bool diagnostics,
                              const std::string& sweep_label) {
    RunOutcome out;
    out.algo = spec.algo;
    out.seed = seed;
    out.sweep_label = sweep_label;

    const auto t_start = std::chrono::steady_clock::now();
    const std::uint64_t run_seed = split_seed(master_seed, seed);

    const SimilarityConstants& c = bp.constants;
    const int n = bp.instance.n, m = cost.m;
    const double big_l = c.lmax.value_or(c.l1);
    const Section7Params s7 = experiment_params_section7(c.delta, c.delta1, big_l, n, m);

    json params;
    bool diverged = false;
    RunTrace trace;
    Vec x_final;

    try {
        if (spec.algo.rfind("icgm", 0) == 0) {
            SolverConfig sc;
            if (spec.algo == "icgm-rg-saga")
                sc.estimator = EstimatorKind::RgSaga;
            else if (spec.algo == "icgm-rg-svrg")
                sc.estimator = EstimatorKind::RgSvrg;
            else if (spec.algo == "icgm-svrg")
                sc.estimator = EstimatorKind::SvrgDirect;
            else
                throw invalid_config("unknown algorithm '" + spec.algo + "'");
            sc.lambda = spec.lambda > 0 ? spec.lambda : s7.lambda;
            sc.beta = spec.beta > 0 ? spec.beta : s7.beta;
            sc.p_b = spec.p_b > 0 ? spec.p_b : static_cast<double>(m) / n;
            sc.local_solver = spec.local_solver == "const" ? LocalSolverKind::ConstK
                                                           : LocalSolverKind::Geometric;
            sc.local_k = spec.local_k;
            sc.local_p = spec.p > 0 ? spec.p : s7.p;
            sc.local_smoothness = spec.eta > 0 ? spec.eta : s7.eta;
            sc.iterations = spec.iterations;
            sc.init_mode = spec.init_mode;
            sc.epsilon = spec.epsilon;
            sc.seed = run_seed;
            sc.diagnostics = diagnostics;
            params = {{"lambda", sc.lambda}, {"beta", sc.beta},
                      {"p", sc.local_p},     {"p_b", sc.p_b},
                      {"eta", sc.local_smoothness}, {"T", sc.iterations},
                      {"init_mode", sc.init_mode}};
            IcgmResult r = run_icgm(bp.instance, c, cost, sc, bp.x0);
            trace = std::move(r.trace);
            x_final = std::move(r.x_final);
        } else if (spec.algo == "gd") {
            const double step = spec.step > 0 ? spec.step : 1.0 / big_l;
            params = {{"step", step}, {"T", spec.iterations}};
            BaselineResult r =
                run_gd(bp.instance, cost, spec.iterations, step, bp.x0, diagnostics);
            trace = std::move(r.trace);
            x_final = std::move(r.x_final);
        } else if (spec.algo == "fedavg") {
            const double step = spec.step > 0 ? spec.step : 0.003;
            params = {{"step", step}, {"K", spec.local_k}, {"T", spec.iterations}};
            BaselineResult r = run_fedavg(bp.instance, cost, spec.iterations, spec.local_k, step,
                                          run_seed, bp.x0, diagnostics);
            trace = std::move(r.trace);
            x_final = std::move(r.x_final);
        } else if (spec.algo == "scaffold") {
            const double step = spec.step > 0 ? spec.step : 0.003;
            params = {{"step", step}, {"K", spec.local_k}, {"T", spec.iterations}};
            BaselineResult r = run_scaffold(bp.instance, cost, spec.iterations, spec.local_k,
                                            step, run_seed, bp.x0, diagnostics);
            trace = std::move(r.trace);
            x_final = std::move(r.x_final);
        } else if (spec.algo == "fedred-gd") {
            const double lambda = spec.lambda > 0 ? spec.lambda : std::max(c.delta1, 1e-6);
            const double eta = spec.eta > 0 ? spec.eta : c.l1;
            const double prob = spec.p > 0 ? spec.p : lambda / (c.l1 + lambda);
            params = {{"lambda", lambda}, {"eta", eta}, {"p", prob}, {"T", spec.iterations}};
            BaselineResult r = run_fedred_gd(bp.instance, cost, spec.iterations, lambda, eta,
                                             prob, run_seed, bp.x0, diagnostics);
            trace = std::move(r.trace);
            x_final = std::move(r.x_final);
        } else if (spec.algo == "saber-full") {
            BaselineConfig bc;
            bc.lambda = spec.lambda > 0 ? spec.lambda : s7.lambda;
            bc.p = spec.p_b > 0 ? spec.p_b : static_cast<double>(m) / n;
            bc.local_solver = spec.local_solver == "const" ? LocalSolverKind::ConstK
                                                           : LocalSolverKind::Geometric;
            bc.local_k = spec.local_k;
            bc.local_p = spec.p > 0 ? spec.p : s7.p;
            bc.local_smoothness = spec.eta > 0 ? spec.eta : s7.eta;
            bc.step = spec.step > 0 ? spec.step : 0.005;
            bc.iterations = spec.iterations;
            bc.seed = run_seed;
            bc.diagnostics = diagnostics;
            params = {{"lambda", bc.lambda}, {"p_full", bc.p},
                      {"local_p", bc.local_p}, {"T", bc.iterations}};
            BaselineResult r = run_saber_full(bp.instance, cost, bc, bp.x0);
            trace = std::move(r.trace);
            x_final = std::move(r.x_final);
        } else {
            throw invalid_config("unknown algorithm '" + spec.algo + "'");
        }
    } catch (const divergence_error& e) {
        trace = e.trace;
        diverged = true;
    }
    trace.diverged = diverged;

    const auto t_end = std::chrono::steady_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t_end - t_start);

    double min_gns = std::numeric_limits<double>::infinity();
    double final_f = 0.0;
    double total_comm = 0.0;
    std::int64_t total_local = 0;
    if (!trace.rows.empty()) {
        for (const TraceRow& row : trace.rows) min_gns = std::min(min_gns, row.grad_norm_sq);
        final_f = trace.rows.back().f_value;
        total_comm = trace.rows.back().cum_comm;
        total_local = trace.rows.back().cum_local;
    }

    out.trace = std::move(trace);
    out.summary = {{"algo", spec.algo},
                   {"seed", seed},
                   {"sweep", sweep_label.empty() ? json(nullptr) : json(sweep_label)},
                   {"total_comm", total_comm},
                   {"total_local", total_local},
                   {"min_grad_norm_sq", min_gns},
                   {"final_f", final_f},
                   {"diverged", diverged},
                   {"runtime_ms", ms.count()},
                   {"params", params}};
    return out;
}

// Runs the whole batch: every (algorithm, seed, sweep value) cell gets one
// trace CSV and one summary JSON; reruns with the same config are
// bit-identical (apart from runtime_ms in the summary).
inline std::vector<std::string> run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    struct Cell {
        ExperimentConfig cfg;   // sweep-applied copy
        AlgorithmSpec algo;
        std::uint64_t seed;
        std::string sweep_label;
        std::string file_stub;
    };
    std::vector<Cell> cells;

    std::vector<std::pair<std::string, double>> sweep_points;
    if (config.sweep.param.empty())
        sweep_points.emplace_back("", 0.0);
    else
        for (double v : config.sweep.values) sweep_points.emplace_back(config.sweep.param, v);

    for (const auto& [param, value] : sweep_points) {
        ExperimentConfig cfg = config;
        std::string label;
        if (!param.empty()) {
            detail::apply_sweep(cfg, param, value);
            label = param + "=" + format_double(value);
        }
        for (const AlgorithmSpec& a : cfg.algorithms) {
            for (std::uint64_t seed : cfg.seeds) {
                Cell cell{cfg, a, seed, label, ""};
                cell.file_stub = a.algo + "__s" + std::to_string(seed);
                if (!param.empty())
                    cell.file_stub += "__" + param + "-" + detail::format_value(value);
                cells.push_back(std::move(cell));
            }
        }
    }

    std::vector<std::string> written(cells.size());
    std::atomic<std::size_t> next{0};
    const int workers = std::max(1, config.workers);

    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                const Cell& cell = cells[i];
                const BuiltProblem bp = build_problem(cell.cfg.problem);
                const RunOutcome out = execute_run(bp, cell.cfg.cost, cell.algo, cell.seed,
                                                   cell.cfg.master_seed, cell.cfg.diagnostics,
                                                   cell.sweep_label);
                const std::string base = config.out_dir + "/" + cell.file_stub;
                write_trace_csv(out.trace, base + ".csv");
                std::ofstream js(base + ".json", std::ios::binary);
                js << out.summary.dump(2) << "\n";
                written[i] = base + ".csv";
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return written;
}

// ---------------------------------------------------------------------------
// Summaries: cost to reach gradient-norm thresholds
// ---------------------------------------------------------------------------

struct ThresholdSummaryRow {
    std::string algo;
    std::string sweep_label;
    double threshold = 0.0;
    int seeds = 0;
    int reached = 0;
    double comm_mean = 0.0, comm_min = 0.0, comm_max = 0.0;
    double local_mean = 0.0, local_min = 0.0, local_max = 0.0;
    std::string status;  // reached | partial | not_reached
};

// First row of a trace at or below the threshold; the total budget when the
// run never reaches it.
inline std::pair<bool, std::pair<double, double>> cost_to_threshold(const RunTrace& trace,
                                                                    double threshold) {
    for (const TraceRow& row : trace.rows)
        if (row.grad_norm_sq <= threshold) return {true, {row.cum_comm, double(row.cum_local)}};
    if (trace.rows.empty()) return {false, {0.0, 0.0}};
    return {false, {trace.rows.back().cum_comm, double(trace.rows.back().cum_local)}};
}

inline std::vector<ThresholdSummaryRow> summarize(const std::string& trace_dir,
                                                  const std::vector<double>& thresholds) {
    struct Key {
        std::string algo, sweep;
        bool operator<(const Key& o) const {
            return std::tie(algo, sweep) < std::tie(o.algo, o.sweep);
        }
    };
    std::map<Key, std::vector<RunTrace>> groups;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(trace_dir))
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const std::string stem = path.stem().string();
        // {algo}__s{seed}[__{param}-{value}]
        const auto first = stem.find("__s");
        if (first == std::string::npos) continue;
        Key key;
        key.algo = stem.substr(0, first);
        const auto second = stem.find("__", first + 3);
        key.sweep = second == std::string::npos ? "" : stem.substr(second + 2);
        groups[key].push_back(read_trace_csv_file(path.string()));
    }

    std::vector<ThresholdSummaryRow> rows;
    for (const auto& [key, traces] : groups) {
        for (double thr : thresholds) {
            ThresholdSummaryRow row;
            row.algo = key.algo;
            row.sweep_label = key.sweep;
            row.threshold = thr;
            row.seeds = static_cast<int>(traces.size());
            std::vector<std::pair<double, double>> costs;
            std::vector<std::pair<double, double>> budgets;
            for (const RunTrace& tr : traces) {
                const auto [ok, c] = cost_to_threshold(tr, thr);
                (ok ? costs : budgets).push_back(c);
            }
            row.reached = static_cast<int>(costs.size());
            const auto& basis = costs.empty() ? budgets : costs;
            row.comm_min = row.local_min = std::numeric_limits<double>::infinity();
            for (const auto& [comm, local] : basis) {
                row.comm_mean += comm / basis.size();
                row.local_mean += local / basis.size();
                row.comm_min = std::min(row.comm_min, comm);
                row.comm_max = std::max(row.comm_max, comm);
                row.local_min = std::min(row.local_min, local);
                row.local_max = std::max(row.local_max, local);
            }
            row.status = costs.empty() ? "not_reached"
                         : row.reached == row.seeds ? "reached"
                                                    : "partial";
            rows.push_back(row);
        }
    }
    return rows;
}

inline void write_summary_csv(const std::vector<ThresholdSummaryRow>& rows, std::ostream& out) {
    out << "algo,sweep,threshold,seeds,reached,comm_mean,comm_min,comm_max,"
           "local_mean,local_min,local_max,status\n";
    for (const auto& r : rows) {
        out << r.algo << ',' << r.sweep_label << ',' << format_double(r.threshold) << ','
            << r.seeds << ',' << r.reached << ',' << format_double(r.comm_mean) << ','
            << format_double(r.comm_min) << ',' << format_double(r.comm_max) << ','
            << format_double(r.local_mean) << ',' << format_double(r.local_min) << ','
            << format_double(r.local_max) << ',' << r.status << '\n';
    }
}

}  // namespace fedsim
