#include "snekhorn/sinkhorn.hpp"

#include "snekhorn/error.hpp"
#include "snekhorn/kernels.hpp"
#include "snekhorn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace snekhorn {

SinkhornSolution solve_sinkhorn_symmetric(const CostMatrix& cost, double nu,
                                          const SinkhornOptions& options,
                                          std::span<const double> f_init) {
    if (!(nu > 0.0)) throw InvalidArgument("sinkhorn bandwidth must be positive");
    if (!(options.tol > 0.0)) throw InvalidArgument("sinkhorn tolerance must be positive");
    const std::size_t n = cost.size();
    if (!f_init.empty() && f_init.size() != n)
        throw InvalidArgument("sinkhorn warm start has the wrong length");

    std::vector<double> phi(n, 0.0);
    for (std::size_t i = 0; i < f_init.size(); ++i) phi[i] = f_init[i] / nu;

    const double a = -1.0 / nu;
    std::vector<double> lse(n);
    SinkhornSolution sol;
    sol.nu = nu;
    std::size_t iters = 0;
    while (true) {
        parallel_for(n, [&](std::size_t i) {
            thread_local std::vector<double> buf, out;
            buf.resize(n);
            out.resize(n);
            kernels::axpy(a, cost.row(i), phi, buf);
            const double m = kernels::max(buf);
            lse[i] = m + std::log(kernels::exp_shift_sum(buf, m, out));
        });
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            residual = std::max(residual, std::abs(std::exp(phi[i] + lse[i]) - 1.0));
        sol.residual_trace.push_back(residual);
        if (residual <= options.tol) break;
        if (!std::isfinite(residual) || iters >= options.max_iter) {
            std::ostringstream msg;
            msg << "sinkhorn did not converge: residual " << residual << " after " << iters
                << " iterations (tol " << options.tol << ")";
            throw NotConverged(msg.str(), sol.residual_trace);
        }
        for (std::size_t i = 0; i < n; ++i) phi[i] = 0.5 * (phi[i] - lse[i]);
        ++iters;
    }

    sol.P.P = Matrix(n, n);
    sol.P.kind = AffinityKind::ds;
    sol.P.params = {{"bandwidth", nu}};
    parallel_for(n, [&](std::size_t i) {
        thread_local std::vector<double> buf;
        buf.resize(n);
        kernels::axpy(a, cost.row(i), phi, buf);
        kernels::exp_shift_sum(buf, -phi[i], sol.P.P.row(i));
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) sol.P.P(j, i) = sol.P.P(i, j);

    double residual = 0.0;
    for (double s : row_sums(sol.P.P)) residual = std::max(residual, std::abs(s - 1.0));
    sol.residual = residual;
    sol.iters = iters;
    sol.f.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.f[i] = nu * phi[i];
    sol.P.diagnostics = {{"iterations", static_cast<double>(iters)},
                         {"max_marginal_gap", residual}};
    return sol;
}

double global_entropy(const Matrix& p) {
    double h = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) h += entropy(p.row(i));
    return h;
}

CalibratedSinkhorn calibrate_nu(const CostMatrix& cost, double perplexity, double tol) {
    const std::size_t n = cost.size();
    if (!(perplexity > 1.0 && perplexity < static_cast<double>(n))) {
        std::ostringstream msg;
        msg << "perplexity out of range: " << perplexity << " not in (1, " << n << ")";
        throw InvalidArgument(msg.str());
    }
    const double target = std::log(perplexity) + 1.0;
    const SinkhornOptions inner{1e-10, 100000};
    std::vector<double> warm;
    std::size_t searches = 0;

    auto solve = [&](double nu) {
        SinkhornSolution s = solve_sinkhorn_symmetric(cost, nu, inner, warm);
        warm = s.f;
        ++searches;
        return s;
    };
    auto gap = [&](const SinkhornSolution& s) {
        return global_entropy(s.P.P) / static_cast<double>(n) - target;
    };

    const double scale = cost.mean_offdiagonal();
    double lo = 1e-2 * scale;
    double hi = 1e2 * scale;
    SinkhornSolution slo = solve(lo);
    int expansions = 0;
    while (gap(slo) >= 0.0) {
        if (std::abs(gap(slo)) < tol) return {lo, std::move(slo), searches};
        if (++expansions > 200) throw InvalidArgument("calibrate_nu: bracket expansion failed");
        hi = lo;
        lo /= 10.0;
        slo = solve(lo);
    }
    SinkhornSolution shi = solve(hi);
    while (gap(shi) <= 0.0) {
        if (std::abs(gap(shi)) < tol) return {hi, std::move(shi), searches};
        if (++expansions > 200) throw InvalidArgument("calibrate_nu: bracket expansion failed");
        lo = hi;
        hi *= 10.0;
        shi = solve(hi);
    }

    double xlo = std::log(lo);
    double xhi = std::log(hi);
    std::vector<double> trace;
    for (int it = 0; it < 200; ++it) {
        const double x = 0.5 * (xlo + xhi);
        SinkhornSolution s = solve(std::exp(x));
        const double g = gap(s);
        trace.push_back(g);
        if (std::abs(g) < tol) return {std::exp(x), std::move(s), searches};
        if (g < 0.0) xlo = x;
        else xhi = x;
    }
    throw NotConverged("calibrate_nu: bisection did not reach tolerance", std::move(trace));
}

} // namespace snekhorn
