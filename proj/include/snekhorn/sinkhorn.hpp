#pragma once

#include "snekhorn/affinity.hpp"
#include "snekhorn/core_math.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace snekhorn {

struct SinkhornOptions {
    double tol = 1e-6;  // on ||P1 - 1||_inf
    std::size_t max_iter = 1000;
};

struct SinkhornSolution {
    Affinity P;            // kind ds, exactly symmetric
    std::vector<double> f; // dual potential: P = exp((f + f^T - C) / nu)
    double nu = 1.0;
    std::size_t iters = 0; // fixed-point updates performed
    double residual = 0.0; // ||P1 - 1||_inf of the returned plan
    std::vector<double> residual_trace;
};

// Symmetric Sinkhorn fixed point
//   phi_i <- (phi_i - LSE_k(phi_k - C_ki / nu)) / 2,   f = nu * phi,
// started from f_init (zero when empty). The residual is checked before each
// update, so a warm start at the solution returns after zero updates.
// Throws NotConverged with the residual trace after max_iter updates.
SinkhornSolution solve_sinkhorn_symmetric(const CostMatrix& cost, double nu,
                                          const SinkhornOptions& options = {},
                                          std::span<const double> f_init = {});

struct CalibratedSinkhorn {
    double nu;
    SinkhornSolution solution;
    std::size_t searches;  // Sinkhorn solves performed
};

// Bandwidth nu such that the mean row entropy of the doubly stochastic plan
// equals log(perplexity) + 1 within `tol`. Requires 1 < perplexity < n.
CalibratedSinkhorn calibrate_nu(const CostMatrix& cost, double perplexity, double tol = 1e-6);

// sum_i H(P_i:)
double global_entropy(const Matrix& p);

} // namespace snekhorn
