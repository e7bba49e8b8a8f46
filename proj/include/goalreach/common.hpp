#pragma once

// Shared numeric primitives: dense vectors/matrices, a seeded RNG with
// portable distribution transforms, and small helpers used across the
// library. Everything is value-semantic and allocation-light.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace goalreach {

using Vec = std::vector<double>;

inline double clip(double x, double lo, double hi) {
    return std::min(hi, std::max(lo, x));
}

inline Vec clip(Vec v, double lo, double hi) {
    for (double& x : v) x = clip(x, lo, hi);
    return v;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double squared_l2(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("squared_l2: length mismatch " +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double l2_distance(const Vec& a, const Vec& b) { return std::sqrt(squared_l2(a, b)); }

// Row-major dense matrix.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double* row(size_t r) { return data.data() + r * cols; }
    const double* row(size_t r) const { return data.data() + r * cols; }
    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    void set_row(size_t r, const Vec& v) {
        std::copy(v.begin(), v.end(), row(r));
    }
    Vec get_row(size_t r) const { return Vec(row(r), row(r) + cols); }
};

// Column-wise concatenation of equally tall matrices.
inline Matrix hcat(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("hcat: row count mismatch");
    Matrix out(a.rows, a.cols + b.cols);
    for (size_t r = 0; r < a.rows; ++r) {
        std::copy(a.row(r), a.row(r) + a.cols, out.row(r));
        std::copy(b.row(r), b.row(r) + b.cols, out.row(r) + a.cols);
    }
    return out;
}

inline Matrix hcat(const Matrix& a, const Matrix& b, const Matrix& c) {
    if (a.rows != b.rows || a.rows != c.rows) throw std::invalid_argument("hcat: row count mismatch");
    Matrix out(a.rows, a.cols + b.cols + c.cols);
    for (size_t r = 0; r < a.rows; ++r) {
        std::copy(a.row(r), a.row(r) + a.cols, out.row(r));
        std::copy(b.row(r), b.row(r) + b.cols, out.row(r) + a.cols);
        std::copy(c.row(r), c.row(r) + c.cols, out.row(r) + a.cols + b.cols);
    }
    return out;
}

// y[0..n) += a * x[0..n). The workhorse of the batched GEMM paths; plain
// loop so the compiler can vectorize it without reassociating reductions.
inline void axpy(size_t n, double a, const double* x, double* y) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Dot product with four independent accumulators: vectorizable under strict
// FP semantics and deterministic (fixed summation tree).
inline double dot(size_t n, const double* x, const double* y) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i) s0 += x[i] * y[i];
    return (s0 + s1) + (s2 + s3);
}

// Seeded random stream. Wraps the standard mt19937_64 engine but performs
// all distribution transforms by hand so that sampled sequences are
// identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    size_t uniform_index(size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: empty range");
        // Rejection-free modulo bias is negligible for the ranges used here,
        // but keep it exact anyway.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<size_t>(x % n);
    }

    // Standard normal via Box-Muller (no cached spare value).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stdev) { return mean + stdev * normal(); }

    // Geometric on {1, 2, ...} with P(k) = p (1-p)^(k-1), by inversion.
    int geometric(double p) {
        if (p <= 0.0 || p > 1.0) throw std::invalid_argument("geometric: p must be in (0, 1]");
        if (p == 1.0) return 1;
        const double u = uniform();  // [0, 1)
        return 1 + static_cast<int>(std::floor(std::log1p(-u) / std::log1p(-p)));
    }

    // Derived stream for parallel-safe substreams (splitmix64 mix).
    static uint64_t mix(uint64_t seed, uint64_t salt) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    Rng child(uint64_t salt) { return Rng(mix(engine_(), salt)); }

private:
    std::mt19937_64 engine_;
};

}  // namespace goalreach
