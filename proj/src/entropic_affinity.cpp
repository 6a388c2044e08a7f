#include "snekhorn/entropic_affinity.hpp"

#include "snekhorn/error.hpp"
#include "snekhorn/kernels.hpp"
#include "snekhorn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace snekhorn {
namespace detail {
namespace {

struct RowEval {
    double entropy;
    double slope;  // dH / d log(eps) = Var_p(logits)
};

// Logits are -(c - min c) / eps, so the largest is exactly zero.
RowEval evaluate_row(std::span<const double> cost, double cmin, double eps, std::span<double> out,
                     std::vector<double>& logits) {
    const std::size_t n = cost.size();
    logits.resize(n);
    const double a = -1.0 / eps;
    for (std::size_t j = 0; j < n; ++j) logits[j] = a * (cost[j] - cmin);
    const double s = kernels::exp_shift_sum(logits, 0.0, out);
    const double m1 = kernels::dot(out, logits) / s;
    double m2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) m2 += out[j] * logits[j] * logits[j];
    m2 /= s;
    const double inv = 1.0 / s;
    for (double& v : out) v *= inv;
    return {std::log(s) + 1.0 - m1, std::max(0.0, m2 - m1 * m1)};
}

} // namespace

double row_softmax_entropy(std::span<const double> cost, double eps, std::span<double> out) {
    std::vector<double> logits;
    const double cmin = *std::min_element(cost.begin(), cost.end());
    return evaluate_row(cost, cmin, eps, out, logits).entropy;
}

RowBandwidth solve_row_bandwidth(std::span<const double> cost, double target, double tol,
                                 std::size_t max_iter, std::optional<double> lower_bound,
                                 std::span<double> out, std::optional<double> guess) {
    const std::size_t n = cost.size();
    if (n == 0) throw InvalidArgument("empty cost row");
    const double cmin = *std::min_element(cost.begin(), cost.end());
    double scale = 0.0;
    for (double c : cost) scale += c - cmin;
    scale /= static_cast<double>(n);

    std::vector<double> logits;
    auto gap_at = [&](double eps) {
        const RowEval e = evaluate_row(cost, cmin, eps, out, logits);
        return RowEval{e.entropy - target, e.slope};
    };

    if (!(scale > 0.0) || !std::isfinite(scale)) {
        // Constant row: the entropy is log n + 1 whatever the bandwidth.
        const double eps = lower_bound.value_or(1.0);
        const RowEval e = gap_at(eps);
        if (lower_bound && e.entropy >= -tol) return {eps, 0.0, 0};
        throw InvalidArgument("cost row is constant; its entropy cannot be controlled");
    }

    constexpr int kMaxExpansions = 200;
    double lo = 0.0;
    double hi = 0.0;
    RowEval glo{};
    RowEval ghi{};
    int expansions = 0;

    double x0 = std::numeric_limits<double>::quiet_NaN();
    if (guess && *guess > 0.0 && (!lower_bound || *guess > *lower_bound)) {
        // warm start: bracket outward from the previous root by factors of 2
        const RowEval g = gap_at(*guess);
        if (std::abs(g.entropy) < tol) return {*guess, std::abs(g.entropy), 1};
        if (g.slope > 0.0) x0 = std::log(*guess) - g.entropy / g.slope;
        if (g.entropy < 0.0) {
            lo = *guess;
            glo = g;
            hi = 2.0 * lo;
            ghi = gap_at(hi);
            while (ghi.entropy <= 0.0) {
                if (std::abs(ghi.entropy) < tol) return {hi, std::abs(ghi.entropy), 0};
                if (++expansions > kMaxExpansions)
                    throw InvalidArgument("entropy root bracket could not be established");
                lo = hi;
                glo = ghi;
                hi *= 2.0;
                ghi = gap_at(hi);
            }
        } else {
            hi = *guess;
            ghi = g;
            for (;;) {
                lo = 0.5 * hi;
                if (lower_bound && lo <= *lower_bound) {
                    lo = *lower_bound;
                    glo = gap_at(lo);
                    if (glo.entropy >= -tol) return {lo, std::max(0.0, -glo.entropy), 0};
                    break;
                }
                glo = gap_at(lo);
                if (glo.entropy < 0.0) break;
                if (std::abs(glo.entropy) < tol) return {lo, std::abs(glo.entropy), 0};
                if (++expansions > kMaxExpansions)
                    throw InvalidArgument("entropy root bracket could not be established");
                hi = lo;
                ghi = glo;
            }
        }
    } else if (lower_bound) {
        lo = *lower_bound;
        glo = gap_at(lo);
        if (glo.entropy >= -tol) return {lo, std::max(0.0, -glo.entropy), 0};
        hi = lo * 10.0;
        ghi = gap_at(hi);
        while (ghi.entropy <= 0.0) {
            if (std::abs(ghi.entropy) < tol) return {hi, std::abs(ghi.entropy), 0};
            if (++expansions > kMaxExpansions)
                throw InvalidArgument("entropy root bracket could not be established");
            lo = hi;
            glo = ghi;
            hi *= 10.0;
            ghi = gap_at(hi);
        }
    } else {
        lo = 1e-12 * scale;
        hi = 1e4 * scale;
        glo = gap_at(lo);
        while (glo.entropy >= 0.0) {
            if (std::abs(glo.entropy) < tol) return {lo, std::abs(glo.entropy), 0};
            if (++expansions > kMaxExpansions)
                throw InvalidArgument("entropy root bracket could not be established");
            lo /= 10.0;
            glo = gap_at(lo);
        }
        ghi = gap_at(hi);
        while (ghi.entropy <= 0.0) {
            if (std::abs(ghi.entropy) < tol) return {hi, std::abs(ghi.entropy), 0};
            if (++expansions > kMaxExpansions)
                throw InvalidArgument("entropy root bracket could not be established");
            hi *= 10.0;
            ghi = gap_at(hi);
        }
    }

    double xlo = std::log(lo);
    double xhi = std::log(hi);
    double x = x0 > xlo && x0 < xhi ? x0 : 0.5 * (xlo + xhi);
    std::vector<double> trace;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const RowEval g = gap_at(std::exp(x));
        trace.push_back(g.entropy);
        if (std::abs(g.entropy) < tol) return {std::exp(x), std::abs(g.entropy), it};
        if (g.entropy < 0.0) xlo = x;
        else xhi = x;
        double next = g.slope > 0.0 ? x - g.entropy / g.slope : xlo - 1.0;
        if (!(next > xlo && next < xhi)) next = 0.5 * (xlo + xhi);
        if (next == x) break;
        x = next;
    }
    throw NotConverged("entropy root finder did not reach tolerance", std::move(trace));
}

} // namespace detail

EASolution solve_ea(const CostMatrix& cost, double perplexity, const EAOptions& options) {
    const std::size_t n = cost.size();
    if (!(perplexity >= 1.0 && perplexity <= static_cast<double>(n) - 1.0)) {
        std::ostringstream msg;
        msg << "perplexity out of range: " << perplexity << " not in [1, " << n - 1 << "]";
        throw InvalidArgument(msg.str());
    }
    const double target = std::log(perplexity) + 1.0;

    EASolution sol;
    sol.P.P = Matrix(n, n);
    sol.P.kind = AffinityKind::ea;
    sol.P.params = {{"perplexity", perplexity}, {"exclude_self", options.exclude_self ? 1.0 : 0.0}};
    sol.epsilon.assign(n, 0.0);
    sol.residuals.assign(n, 0.0);
    std::vector<std::size_t> iterations(n, 0);

    parallel_for(n, [&](std::size_t i) {
        try {
            detail::RowBandwidth rb;
            if (options.exclude_self) {
                std::vector<double> row;
                row.reserve(n - 1);
                for (std::size_t j = 0; j < n; ++j)
                    if (j != i) row.push_back(cost(i, j));
                std::vector<double> out(n - 1);
                rb = detail::solve_row_bandwidth(row, target, options.tol, options.max_iter,
                                                 std::nullopt, out);
                auto dst = sol.P.P.row(i);
                for (std::size_t j = 0, k = 0; j < n; ++j) dst[j] = j == i ? 0.0 : out[k++];
            } else {
                rb = detail::solve_row_bandwidth(cost.row(i), target, options.tol,
                                                 options.max_iter, std::nullopt, sol.P.P.row(i));
            }
            sol.epsilon[i] = rb.epsilon;
            sol.residuals[i] = rb.gap;
            iterations[i] = rb.iterations;
        } catch (const NotConverged& e) {
            std::ostringstream msg;
            msg << "solve_ea: row " << i << ": " << e.what();
            throw NotConverged(msg.str(), e.trace());
        } catch (const InvalidArgument& e) {
            std::ostringstream msg;
            msg << "solve_ea: row " << i << ": " << e.what();
            throw InvalidArgument(msg.str());
        }
    });

    std::size_t total_iter = 0;
    for (std::size_t it : iterations) total_iter += it;
    sol.P.diagnostics = {
        {"max_entropy_gap", *std::max_element(sol.residuals.begin(), sol.residuals.end())},
        {"root_iterations", static_cast<double>(total_iter)},
    };
    return sol;
}

Affinity symmetrize_l2(const Affinity& p) {
    if (!p.P.square()) throw InvalidArgument("symmetrize_l2 needs a square matrix");
    const std::size_t n = p.P.rows();
    Affinity out = p;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.P(i, j) = 0.5 * (p.P(i, j) + p.P(j, i));
    if (p.kind == AffinityKind::ea) out.kind = AffinityKind::ea_symmetrized;
    if (p.kind == AffinityKind::rs) out.kind = AffinityKind::rs_symmetrized;
    out.diagnostics.clear();
    return out;
}

Affinity row_stochastic_gaussian(const CostMatrix& cost, double bandwidth) {
    if (!(bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
    const std::size_t n = cost.size();
    Affinity a;
    a.P = Matrix(n, n);
    a.kind = AffinityKind::rs;
    a.params = {{"bandwidth", bandwidth}};
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> logits(n);
        kernels::axpy(-1.0 / bandwidth, cost.row(i), {}, logits);
        auto row = a.P.row(i);
        const double s = kernels::exp_shift_sum(logits, kernels::max(logits), row);
        for (double& v : row) v /= s;
    });
    return a;
}

} // namespace snekhorn
