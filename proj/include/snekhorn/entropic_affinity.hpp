#pragma once

#include "snekhorn/affinity.hpp"
#include "snekhorn/core_math.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace snekhorn {

struct EAOptions {
    double tol = 1e-9;          // on |H(P_i:) - (log xi + 1)|
    std::size_t max_iter = 200; // root-finder iterations per row
    bool exclude_self = false;  // classical t-SNE convention P_ii = 0
};

struct EASolution {
    Affinity P;                   // kind ea, row-stochastic
    std::vector<double> epsilon;  // per-row bandwidths, all > 0
    std::vector<double> residuals;
};

// Entropic affinity: P_ij = softmax_j(-C_ij / eps_i) with each eps_i chosen so
// that H(P_i:) = log(perplexity) + 1. The diagonal takes part in the softmax
// unless `exclude_self` is set.
EASolution solve_ea(const CostMatrix& cost, double perplexity, const EAOptions& options = {});

// (P + P^T) / 2, the closest symmetric matrix in Frobenius norm.
Affinity symmetrize_l2(const Affinity& p);

// Row-normalized Gaussian kernel exp(-C / bandwidth).
Affinity row_stochastic_gaussian(const CostMatrix& cost, double bandwidth);

namespace detail {

struct RowBandwidth {
    double epsilon = 0.0;
    double gap = 0.0;  // |H - target|
    std::size_t iterations = 0;
};

// Writes softmax(-(cost - min cost) / eps) into `out` and returns its entropy.
double row_softmax_entropy(std::span<const double> cost, double eps, std::span<double> out);

// Finds eps with H(softmax(-cost / eps)) = target by a safeguarded Newton /
// bisection search on log eps. When `lower_bound` is given the search is
// restricted to eps >= lower_bound and returns lower_bound itself if the
// entropy there already reaches the target. `out` receives the final row.
// `guess`, typically the previous root for a nearby row, seeds the bracket.
RowBandwidth solve_row_bandwidth(std::span<const double> cost, double target, double tol,
                                 std::size_t max_iter, std::optional<double> lower_bound,
                                 std::span<double> out,
                                 std::optional<double> guess = std::nullopt);

} // namespace detail

} // namespace snekhorn
