#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/common.hpp"
#include "fedsim/cost_model.hpp"

namespace fedsim {

// One record per outer iteration. cum_* fields are the totals charged to
// reach x^t (init included); e_t / local_steps describe the transition
// x^t -> x^{t+1} and are 0 on the final row.
struct TraceRow {
    std::int64_t round = 0;
    double cum_comm = 0.0;
    std::int64_t cum_local = 0;
    double grad_norm_sq = 0.0;
    double f_value = 0.0;
    double e_t = 0.0;
    double sigma_hat_sq = 0.0;
    std::int64_t local_steps = 0;
    std::int64_t n_a = 0, n_r = 0, n_d = 0;
};

struct RunTrace {
    std::vector<TraceRow> rows;
    bool diverged = false;
};

struct divergence_error : error {
    RunTrace trace;
    explicit divergence_error(std::string msg, RunTrace t)
        : error(std::move(msg)), trace(std::move(t)) {}
};

struct LedgerSnapshot {
    double cum_comm = 0.0;
    std::int64_t cum_local = 0;
    std::int64_t n_a = 0, n_r = 0, n_d = 0;

    static LedgerSnapshot take(const CostLedger& ledger) {
        LedgerSnapshot s;
        s.cum_comm = to_double(ledger.communication_total());
        s.cum_local = ledger.local_total();
        s.n_a = ledger.rounds_ass();
        s.n_r = ledger.rounds_rss();
        s.n_d = ledger.rounds_dss();
        return s;
    }
};

inline const char* trace_csv_header() {
    return "round,cum_comm,cum_local,grad_norm_sq,f_value,e_t,sigma_hat_sq,local_steps,n_a,n_r,n_d";
}

// shortest round-trip decimal form, locale-independent
inline std::string format_double(double v) {
    if (v == static_cast<double>(static_cast<long long>(v)) && std::fabs(v) < 1e15) {
        char ibuf[32];
        std::snprintf(ibuf, sizeof(ibuf), "%lld", static_cast<long long>(v));
        return ibuf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lg", &back);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[40];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
            std::sscanf(shorter, "%lg", &back);
            if (back == v) return shorter;
        }
    }
    return buf;
}

inline void write_trace_csv(const RunTrace& trace, std::ostream& out) {
    out << trace_csv_header() << '\n';
    for (const TraceRow& r : trace.rows) {
        out << r.round << ',' << format_double(r.cum_comm) << ',' << r.cum_local << ','
            << format_double(r.grad_norm_sq) << ',' << format_double(r.f_value) << ','
            << format_double(r.e_t) << ',' << format_double(r.sigma_hat_sq) << ','
            << r.local_steps << ',' << r.n_a << ',' << r.n_r << ',' << r.n_d << '\n';
    }
}

inline void write_trace_csv(const RunTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);  // binary: no platform newline translation
    if (!f) throw data_error("write_trace_csv: cannot open '" + path + "'");
    write_trace_csv(trace, f);
}

inline RunTrace read_trace_csv(std::istream& in) {
    RunTrace trace;
    std::string line;
    if (!std::getline(in, line)) throw data_error("read_trace_csv: empty file");
    if (line != trace_csv_header()) throw data_error("read_trace_csv: unexpected header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        TraceRow r;
        std::istringstream ls(line);
        char comma;
        ls >> r.round >> comma >> r.cum_comm >> comma >> r.cum_local >> comma >>
            r.grad_norm_sq >> comma >> r.f_value >> comma >> r.e_t >> comma >> r.sigma_hat_sq >>
            comma >> r.local_steps >> comma >> r.n_a >> comma >> r.n_r >> comma >> r.n_d;
        if (!ls) throw data_error("read_trace_csv: malformed row '" + line + "'");
        trace.rows.push_back(r);
    }
    return trace;
}

inline RunTrace read_trace_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw data_error("read_trace_csv: cannot open '" + path + "'");
    return read_trace_csv(f);
}

}  // namespace fedsim
