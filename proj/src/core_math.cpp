#include "snekhorn/core_math.hpp"

#include "snekhorn/error.hpp"
#include "snekhorn/kernels.hpp"
#include "snekhorn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace snekhorn {

ProbVector::ProbVector(std::vector<double> values, bool stochastic)
    : values_(std::move(values)), stochastic_(stochastic) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
            std::ostringstream msg;
            msg << "probability vector entry " << i << " is negative or not finite";
            throw InvalidArgument(msg.str());
        }
        sum += values_[i];
    }
    if (stochastic_ && std::abs(sum - 1.0) > 1e-12)
        throw InvalidArgument("probability vector does not sum to one");
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * (std::log(v) - 1.0);
    return h;
}

double perplexity(const ProbVector& p) {
    if (!p.stochastic()) throw InvalidArgument("perplexity requires a stochastic vector");
    return std::exp(entropy(p.values()) - 1.0);
}

std::vector<double> row_entropies(const Matrix& p) {
    std::vector<double> h(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) h[i] = entropy(p.row(i));
    return h;
}

double kl_divergence(const Matrix& p, const Matrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols())
        throw InvalidArgument("kl_divergence: shape mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
            const double a = p(i, j);
            const double b = q(i, j);
            if (a < 0.0 || b < 0.0) throw InvalidArgument("kl_divergence: negative entry");
            if (a == 0.0) continue;
            if (b == 0.0) {
                std::ostringstream msg;
                msg << "kl_divergence: support violation at (" << i << ", " << j << ")";
                throw InvalidArgument(msg.str());
            }
            kl += a * (std::log(a / b) - 1.0);
        }
    }
    return kl;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("log_sum_exp of an empty vector");
    const double m = kernels::max(v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

CostMatrix CostMatrix::from_matrix(Matrix m) {
    if (!m.square()) throw InvalidArgument("cost matrix not in D: not square");
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i) {
        if (m(i, i) != 0.0) {
            std::ostringstream msg;
            msg << "cost matrix not in D: nonzero diagonal at " << i;
            throw InvalidArgument(msg.str());
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const double a = m(i, j);
            if (a != m(j, i)) {
                std::ostringstream msg;
                msg << "cost matrix not in D: asymmetric at (" << i << ", " << j << ")";
                throw InvalidArgument(msg.str());
            }
            if (!(a > 0.0) || !std::isfinite(a)) {
                std::ostringstream msg;
                msg << "cost matrix not in D: entry (" << i << ", " << j << ") = " << a
                    << " (duplicate points?)";
                throw InvalidArgument(msg.str());
            }
        }
    }
    return CostMatrix(std::move(m));
}

CostMatrix CostMatrix::scaled(double s) const {
    if (!(s > 0.0)) throw InvalidArgument("cost scale must be positive");
    Matrix out = m_;
    for (double& v : out.values()) v *= s;
    return CostMatrix(std::move(out));
}

double CostMatrix::mean_offdiagonal() const {
    const std::size_t n = size();
    if (n < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += m_(i, j);
    return s / static_cast<double>(n * (n - 1));
}

namespace {

Matrix squared_distances(const Matrix& x) {
    const std::size_t n = x.rows();
    Matrix c(n, n);
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j)
            c(i, j) = std::max(0.0, kernels::squared_distance(x.row(i), x.row(j)));
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) c(j, i) = c(i, j);
    return c;
}

} // namespace

CostMatrix pairwise_sq_euclidean(const Matrix& x, std::optional<std::uint64_t> jitter_seed) {
    if (x.rows() < 2) throw InvalidArgument("pairwise_sq_euclidean needs at least two rows");
    Matrix c = squared_distances(x);
    const std::size_t n = x.rows();

    auto first_zero = [&]() -> std::optional<std::pair<std::size_t, std::size_t>> {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (c(i, j) == 0.0) return std::pair{i, j};
        return std::nullopt;
    };

    if (auto dup = first_zero()) {
        if (!jitter_seed) {
            std::ostringstream msg;
            msg << "cost matrix not in D: rows " << dup->first << " and " << dup->second
                << " are identical";
            throw InvalidArgument(msg.str());
        }
        std::vector<double> nonzero;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (c(i, j) > 0.0) nonzero.push_back(std::sqrt(c(i, j)));
        double scale = 1.0;
        if (!nonzero.empty()) {
            auto mid = nonzero.begin() + static_cast<std::ptrdiff_t>(nonzero.size() / 2);
            std::nth_element(nonzero.begin(), mid, nonzero.end());
            scale = *mid;
        }
        std::mt19937_64 rng(*jitter_seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Matrix jittered = x;
        for (double& v : jittered.values()) v += 1e-8 * scale * gauss(rng);
        c = squared_distances(jittered);
        if (auto still = first_zero()) {
            std::ostringstream msg;
            msg << "cost matrix not in D: rows " << still->first << " and " << still->second
                << " remain identical after jitter";
            throw InvalidArgument(msg.str());
        }
    }
    return CostMatrix::from_matrix(std::move(c));
}

} // namespace snekhorn
