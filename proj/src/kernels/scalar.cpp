#include "snekhorn/kernels.hpp"

#include <cmath>
#include <limits>

namespace snekhorn::kernels {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double squared_distance_scalar(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

double max_scalar(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

double exp_shift_sum_scalar(const double* x, double shift, double* out, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(x[i] - shift);
        s += out[i];
    }
    return s;
}

void axpy_scalar(double a, const double* x, const double* y, double* out, std::size_t n) {
    if (y == nullptr) {
        for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + y[i];
    }
}

} // namespace

const Table& scalar() {
    static const Table table{"scalar", dot_scalar, squared_distance_scalar, max_scalar,
                             exp_shift_sum_scalar, axpy_scalar};
    return table;
}

} // namespace snekhorn::kernels
