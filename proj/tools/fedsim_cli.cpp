// Command-line front end: batch experiment runner, verification oracles and
// trace summaries.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fedsim/fedsim.hpp"

namespace {

using namespace fedsim;

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stoull(tok));
    return out;
}

int cmd_run(const std::string& config_path, const std::string& preset, const std::string& seeds,
            const std::string& out_dir, int workers, bool no_diagnostics,
            const std::string& dataset) {
    ExperimentConfig cfg;
    if (!preset.empty()) cfg = make_preset(preset);
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) {
            std::cerr << "cannot open config '" << config_path << "'\n";
            return 2;
        }
        cfg = parse_experiment_config(json::parse(f));
    }
    if (config_path.empty() && preset.empty()) {
        std::cerr << "run: need --config or --preset\n";
        return 2;
    }
    if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (workers > 0) cfg.workers = workers;
    if (no_diagnostics) cfg.diagnostics = false;
    if (!dataset.empty()) cfg.problem.dataset_path = dataset;

    const auto files = run_experiment(cfg);
    std::cout << "wrote " << files.size() << " runs to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_verify(const std::string& report_path, std::uint64_t seed) {
    std::vector<OracleReport> reports;

    // sampling-without-replacement identity over random vector sets
    Rng rng(split_seed(seed, 0x1d));
    for (int rep = 0; rep < 10; ++rep) {
        const int n = 2 + static_cast<int>(rng.uniform_index(7));  // 2..8
        const int d = 1 + static_cast<int>(rng.uniform_index(4));
        std::vector<Vec> vectors(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(d)));
        for (auto& v : vectors)
            for (auto& x : v) x = rng.uniform(-5.0, 5.0);
        for (int m = 1; m <= n; ++m) {
            const double observed = enumerate_subset_mean(vectors, m).mean_sq_deviation;
            const double reference = subset_variance_identity(vectors, m);
            OracleReport r;
            r.name = "subset-variance-identity-n" + std::to_string(n) + "-m" + std::to_string(m);
            r.observed = observed;
            r.reference = reference;
            r.pass = std::fabs(observed - reference) <= 1e-12 * std::max(1.0, std::fabs(reference));
            r.samples = binomial(n, m);
            r.seed = seed;
            reports.push_back(r);
        }
    }

    // conditional unbiasedness by enumeration
    for (const auto kind : {UnbiasednessKind::Saga, UnbiasednessKind::Svrg,
                            UnbiasednessKind::RgSaga, UnbiasednessKind::RgSvrg}) {
        for (int n = 4; n <= 6; ++n) {
            const ProblemInstance p = make_random_quadratic_instance(n, 3, seed + n);
            for (int m = 1; m < n; ++m)
                reports.push_back(check_conditional_unbiasedness(kind, p, m, seed + m));
        }
    }
    {
        const ProblemInstance p = make_random_quadratic_instance(4, 3, seed + 4);
        reports.push_back(check_conditional_unbiasedness(UnbiasednessKind::SagAggregate, p, 2, seed));
    }

    // geometric local-step sampler
    for (const double p : {0.5, 0.1, 0.01})
        reports.push_back(check_geometric_sampler(p, 100000, seed));

    // SAG counterexample
    for (OracleReport& r : sag_counterexample()) reports.push_back(std::move(r));

    // variance-bound envelopes on the fixed small quadratic, along solver
    // trajectories and along a fixed synthetic path
    {
        QuadLogSumParams qp;
        qp.n = 16;
        qp.d = 10;
        qp.b = 3;
        QuadraticProblem quad = gen_quadratic_logsum(qp, 20240 + seed);
        CostConfig cost;
        cost.m = 4;
        const Vec x0(static_cast<std::size_t>(qp.d), 1.0);
        for (OracleReport& r : check_variance_bounds(quad.instance, quad.analytic_constants(),
                                                     cost, x0, 200, 60, seed))
            reports.push_back(std::move(r));
        for (OracleReport& r : check_variance_bounds_synthetic(
                 quad.instance, quad.analytic_constants(), cost.m, x0, 200, 60, seed))
            reports.push_back(std::move(r));
    }

    int failures = 0;
    for (const OracleReport& r : reports) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  observed=" << r.observed
                  << " reference=" << r.reference << " samples=" << r.samples;
        if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
        std::cout << "\n";
        failures += !r.pass;
    }
    std::cout << reports.size() - failures << "/" << reports.size() << " oracle checks passed\n";

    if (!report_path.empty()) {
        std::ofstream f(report_path, std::ios::binary);
        f << "name,observed,reference,pass,samples,seed,detail\n";
        for (const OracleReport& r : reports)
            f << r.name << ',' << format_double(r.observed) << ',' << format_double(r.reference)
              << ',' << (r.pass ? 1 : 0) << ',' << r.samples << ',' << r.seed << ",\"" << r.detail
              << "\"\n";
    }
    return failures == 0 ? 0 : 1;
}

int cmd_summarize(const std::string& in_dir, const std::string& thresholds,
                  const std::string& out_path) {
    const std::vector<double> thr = parse_double_list(thresholds);
    if (thr.empty()) {
        std::cerr << "summarize: need --thresholds t1,t2,...\n";
        return 2;
    }
    const auto rows = summarize(in_dir, thr);
    if (out_path.empty()) {
        write_summary_csv(rows, std::cout);
    } else {
        std::ofstream f(out_path, std::ios::binary);
        write_summary_csv(rows, f);
        std::cout << "wrote " << rows.size() << " summary rows to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) try {
    CLI::App app{"federated nonconvex optimization simulator"};
    app.require_subcommand(1);

    std::string config_path, preset, seeds, out_dir, dataset;
    int workers = 0;
    bool no_diagnostics = false;
    auto* run = app.add_subcommand("run", "run an experiment batch");
    run->add_option("--config", config_path, "JSON experiment config");
    run->add_option("--preset", preset, "named preset (see `presets`)");
    run->add_option("--seeds", seeds, "comma-separated seed list");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--workers", workers, "parallel runs");
    run->add_option("--data", dataset, "dataset path (logistic problems)");
    run->add_flag("--no-diagnostics", no_diagnostics, "skip uncharged measurement gradients");

    std::string report_path;
    std::uint64_t verify_seed = 0;
    auto* verify = app.add_subcommand("verify", "run the verification oracles");
    verify->add_option("--report", report_path, "write oracle reports to CSV");
    verify->add_option("--seed", verify_seed, "oracle seed");

    std::string in_dir, thresholds, summary_out;
    auto* summ = app.add_subcommand("summarize", "cost-to-threshold tables from traces");
    summ->add_option("--in", in_dir, "trace directory")->required();
    summ->add_option("--thresholds", thresholds, "comma-separated grad_norm_sq thresholds")
        ->required();
    summ->add_option("--out", summary_out, "output CSV (default stdout)");

    auto* presets = app.add_subcommand("presets", "list preset names");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, preset, seeds, out_dir, workers, no_diagnostics, dataset);
        if (verify->parsed()) return cmd_verify(report_path, verify_seed);
        if (summ->parsed()) return cmd_summarize(in_dir, thresholds, summary_out);
        if (presets->parsed()) {
            for (const std::string& name : fedsim::preset_names()) std::cout << name << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
} catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
}
