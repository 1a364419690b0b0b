#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/problem.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct SparseRow {
    double label = 0.0;
    std::vector<int> index;    // 0-based column indices, strictly increasing
    std::vector<double> value;
};

struct Dataset {
    std::vector<SparseRow> rows;
    int dim = 0;
};

// LIBSVM text format: one example per line, "label index:value index:value ...".
// Indices are 1-based and must be strictly increasing (duplicates rejected).
// Blank lines are ignored; malformed tokens abort with the line number.
inline Dataset parse_libsvm(std::istream& in) {
    Dataset ds;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments and whitespace-only lines
        if (const auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;  // blank line

        SparseRow row;
        try {
            std::size_t used = 0;
            row.label = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw data_error("libsvm: bad label '" + tok + "' at line " + std::to_string(lineno));
        }

        int prev_index = 0;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
                throw data_error("libsvm: bad token '" + tok + "' at line " +
                                 std::to_string(lineno));
            int idx = 0;
            double val = 0.0;
            try {
                std::size_t used = 0;
                idx = std::stoi(tok.substr(0, colon), &used);
                if (used != colon) throw std::invalid_argument(tok);
                used = 0;
                const std::string vs = tok.substr(colon + 1);
                val = std::stod(vs, &used);
                if (used != vs.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw data_error("libsvm: bad token '" + tok + "' at line " +
                                 std::to_string(lineno));
            }
            if (idx < 1)
                throw data_error("libsvm: index must be >= 1 at line " + std::to_string(lineno));
            if (idx <= prev_index)
                throw data_error("libsvm: indices must be strictly increasing at line " +
                                 std::to_string(lineno));
            prev_index = idx;
            row.index.push_back(idx - 1);
            row.value.push_back(val);
            ds.dim = std::max(ds.dim, idx);
        }
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

inline Dataset load_libsvm(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw data_error("libsvm: cannot open '" + path + "'");
    return parse_libsvm(f);
}

enum class ShardMode { Contiguous, Dirichlet };

struct LogisticParams {
    int n = 10;
    double alpha = 0.1;  // nonconvex regularizer scale
    ShardMode shard_mode = ShardMode::Contiguous;
    double dirichlet_concentration = 0.5;
    std::uint64_t shard_seed = 0;
};

// f_i(x) = (n/M) sum_{j in shard i} log(1 + exp(-y_j <a_j, x>))
//          + alpha sum_k x_k^2 / (1 + x_k^2),
// so (1/n) sum_i f_i is the global mean logistic loss plus the regularizer.
// Rows are sharded contiguously by row order unless Dirichlet sizes are
// requested explicitly.
struct LogisticProblem {
    std::shared_ptr<const Dataset> data;  // shared with the instance closures
    LogisticParams params;
    std::vector<std::pair<int, int>> shard;  // [begin, end) row ranges
    ProblemInstance instance;
};

namespace detail {

inline std::vector<std::pair<int, int>> shard_ranges(int rows, const LogisticParams& p) {
    if (p.n < 1 || p.n > rows) throw invalid_input("logistic: need 1 <= n <= #rows");
    std::vector<int> sizes(static_cast<std::size_t>(p.n), 0);
    if (p.shard_mode == ShardMode::Contiguous) {
        const int base = rows / p.n, extra = rows % p.n;
        for (int i = 0; i < p.n; ++i) sizes[static_cast<std::size_t>(i)] = base + (i < extra);
    } else {
        // symmetric Dirichlet proportions via normalized Gamma draws
        Rng rng(split_seed(p.shard_seed, 0xd1f1));
        std::gamma_distribution<double> gamma(p.dirichlet_concentration, 1.0);
        std::vector<double> w(static_cast<std::size_t>(p.n));
        double tot = 0.0;
        for (auto& v : w) tot += (v = gamma(rng.engine()));
        int assigned = 0;
        for (int i = 0; i < p.n; ++i) {
            int s = std::max(1, static_cast<int>(std::floor(w[static_cast<std::size_t>(i)] / tot *
                                                            rows)));
            s = std::min(s, rows - assigned - (p.n - 1 - i));  // leave >= 1 row per shard
            sizes[static_cast<std::size_t>(i)] = s;
            assigned += s;
        }
        sizes[static_cast<std::size_t>(p.n - 1)] += rows - assigned;
    }
    std::vector<std::pair<int, int>> ranges;
    int begin = 0;
    for (int i = 0; i < p.n; ++i) {
        const int sz = sizes[static_cast<std::size_t>(i)];
        if (sz < 1) throw invalid_input("logistic: empty shard " + std::to_string(i));
        ranges.emplace_back(begin, begin + sz);
        begin += sz;
    }
    return ranges;
}

}  // namespace detail

inline LogisticProblem gen_logistic_nonconvex(Dataset data, const LogisticParams& params) {
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        const double y = data.rows[r].label;
        if (y != 1.0 && y != -1.0)
            throw data_error("logistic: label must be in {-1,+1}, got " + std::to_string(y) +
                             " at row " + std::to_string(r));
    }
    LogisticProblem lp;
    lp.params = params;
    lp.shard = detail::shard_ranges(static_cast<int>(data.rows.size()), params);
    lp.data = std::make_shared<const Dataset>(std::move(data));

    const int d = lp.data->dim;
    const double total = static_cast<double>(lp.data->rows.size());
    lp.instance.n = params.n;
    lp.instance.d = d;
    for (int i = 0; i < params.n; ++i) {
        const auto [lo, hi] = lp.shard[static_cast<std::size_t>(i)];
        const double scale_i = params.n / total;
        const double alpha = params.alpha;
        lp.instance.clients.push_back(
            [ds = lp.data, lo = lo, hi = hi, scale_i, alpha](const Vec& x, Vec& grad) -> double {
                double v = 0.0;
                for (int r = lo; r < hi; ++r) {
                    const SparseRow& row = ds->rows[static_cast<std::size_t>(r)];
                    double z = 0.0;
                    for (std::size_t t = 0; t < row.index.size(); ++t)
                        z += row.value[t] * x[static_cast<std::size_t>(row.index[t])];
                    const double margin = -row.label * z;
                    // log(1 + exp(margin)), overflow-safe
                    v += margin > 0.0 ? margin + std::log1p(std::exp(-margin))
                                      : std::log1p(std::exp(margin));
                    const double sig = 1.0 / (1.0 + std::exp(-margin));
                    const double coef = -row.label * sig;
                    for (std::size_t t = 0; t < row.index.size(); ++t)
                        grad[static_cast<std::size_t>(row.index[t])] += scale_i * coef * row.value[t];
                }
                v *= scale_i;
                for (std::size_t k = 0; k < x.size(); ++k) {
                    const double xk2 = x[k] * x[k];
                    v += alpha * xk2 / (1.0 + xk2);
                    grad[k] += alpha * 2.0 * x[k] / ((1.0 + xk2) * (1.0 + xk2));
                }
                return v;
            });
    }
    lp.instance.validate();
    return lp;
}

}  // namespace fedsim
