#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsim {

using Vec = std::vector<double>;

// Error taxonomy. Everything derives from fedsim::error so callers can catch
// the whole family at once.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct invalid_input : error {
    using error::error;
};
struct invalid_config : error {
    using error::error;
};
struct data_error : error {
    using error::error;
};
struct accounting_error : error {
    using error::error;
};

inline void check_dim(const Vec& x, std::size_t d, const char* where) {
    if (x.size() != d) {
        throw invalid_input(std::string(where) + ": dimension mismatch, got " +
                            std::to_string(x.size()) + ", expected " + std::to_string(d));
    }
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm_sq(const Vec& a) { return dot(a, a); }

inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

inline void scale(Vec& x, double alpha) {
    for (double& v : x) v *= alpha;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
    return r;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + b[k];
    return r;
}

inline double dist_sq(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace fedsim
