#pragma once

// Data-parallel inner loops shared by every solver. Each kernel has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant selected at
// runtime. Variants agree to within a few ulps; reductions use a fixed order
// per variant so results are reproducible for a given dispatch choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace snekhorn::kernels {

struct Table {
    std::string_view name;
    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // sum_i (x[i] - y[i])^2
    double (*squared_distance)(const double* x, const double* y, std::size_t n);
    // max_i x[i]; -inf for n == 0
    double (*max)(const double* x, std::size_t n);
    // out[i] = exp(x[i] - shift); returns sum_i out[i]
    double (*exp_shift_sum)(const double* x, double shift, double* out, std::size_t n);
    // out[i] = a * x[i] + y[i]; y may be null, meaning zero
    void (*axpy)(double a, const double* x, const double* y, double* out, std::size_t n);
};

const Table& scalar();

// AVX2/FMA table, or nullptr if not compiled in or the CPU lacks support.
const Table* avx2();

// Table used by the library. Chosen once: AVX2 when available, unless the
// SNEKHORN_SIMD environment variable is set to "scalar".
const Table& active();

// Overrides the active table (tests and benchmarking). Returns the previous one.
const Table& set_active(const Table& table);

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.data(), y.data(), x.size());
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
    return active().squared_distance(x.data(), y.data(), x.size());
}

inline double max(std::span<const double> x) { return active().max(x.data(), x.size()); }

inline double exp_shift_sum(std::span<const double> x, double shift, std::span<double> out) {
    return active().exp_shift_sum(x.data(), shift, out.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<const double> y,
                 std::span<double> out) {
    active().axpy(a, x.data(), y.data(), out.data(), x.size());
}

} // namespace snekhorn::kernels
