#pragma once

#include "snekhorn/affinity.hpp"
#include "snekhorn/core_math.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace snekhorn {

enum class SEAMethod { dual_ascent, dykstra };
enum class SEAOptimizer { adam, lbfgs };

struct SEATraceEntry {
    double dual_objective;
    double entropy_gap;   // max_i |H(P_i:) - (log xi + 1)|
    double marginal_gap;  // ||P1 - 1||_inf
};

struct SEASolution {
    Affinity P;  // kind sea, exactly symmetric
    std::vector<double> gamma;
    std::vector<double> lambda;
    std::vector<SEATraceEntry> trace;
    SEAMethod method = SEAMethod::dual_ascent;
    std::size_t iterations = 0;
    // Rows left with slack entropy, their gamma at the positivity floor.
    std::vector<std::size_t> unsaturated_rows;
};

// exp((lambda_i + lambda_j - 2 C_ij) / (gamma_i + gamma_j)); every gamma_i > 0.
Matrix sea_primal_from_duals(const CostMatrix& cost, std::span<const double> gamma,
                             std::span<const double> lambda);

struct SEADualGradients {
    std::vector<double> grad_gamma;   // (log xi + 1) - H_r(P)
    std::vector<double> grad_lambda;  // 1 - P1
    double objective;                 // L(P(gamma, lambda), gamma, lambda)
};

// Gradient of the concave dual at (gamma, lambda), plus the dual value
//   <P, C> + sum_i gamma_i (log xi + 1 - H(P_i:)) + sum_i lambda_i (1 - (P1)_i).
SEADualGradients sea_dual_gradients(const CostMatrix& cost, std::span<const double> gamma,
                                    std::span<const double> lambda, double perplexity);

struct SEAOptions {
    double tol = 1e-6;  // on max(entropy gap, marginal gap)
    std::size_t max_iter = 10000;
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    SEAOptimizer optimizer = SEAOptimizer::adam;
    // ADAM restarts from its best iterate with lr / 2 after this many steps
    // without a new best gap, at most max_lr_halvings times
    std::size_t patience = 500;
    std::size_t max_lr_halvings = 8;
    // lambda_0 = -eps log Z from the entropic affinity instead of zero
    bool lambda_init_from_ea = true;
};

// Ascent on the dual in the variables gamma_i = eps_i b_i^2,
// lambda_i = gamma_i m_i, where eps are the entropic-affinity bandwidths.
// Starts at gamma = eps and lambda_i = -eps_i log Z_i (Z_i the entropic
// affinity row normalizer).
// A gamma that collapses (b^2 < 1e-12) is held at the floor and its row only
// has to reach the entropy target; such rows are listed in the solution.
// Throws NotConverged after max_iter, naming any collapsed gammas.
SEASolution solve_sea_dual_ascent(const CostMatrix& cost, double perplexity,
                                  const SEAOptions& options = {});

// (K .* K^T)^(1/2); entries of K must be positive.
Matrix kl_project_symmetric(const Matrix& k);

// Row-wise KL projection onto {rows stochastic, H(row) >= log xi + 1}:
// row i becomes softmax(log K_i: / rho_i) with rho_i = max(eps_i, 1), where
// eps solves the entropic affinity problem on the cost -log K.
Matrix kl_project_hxi(const Matrix& k, double perplexity);

struct DykstraOptions {
    double sigma = 0.0;  // <= 0: min_i eps_i from solve_ea
    double tol = 1e-9;   // on successive ||P_s - P_s'||_inf
    std::size_t max_iter = 20000;
    std::size_t max_halvings = 6;
    double saturation_tol = 1e-4;  // entropy / marginal gaps accepted post hoc
};

// Alternating KL projections onto H_xi and the symmetric matrices with the
// Dykstra correction on the H_xi step. The returned duals are a least-squares
// fit of the stationarity equations to log P.
SEASolution solve_sea_dykstra(const CostMatrix& cost, double perplexity,
                              const DykstraOptions& options = {});

struct KKTReport {
    double stationarity;  // max_ij |2C_ij + (g_i + g_j) log P_ij - (l_i + l_j)|
    double entropy_gap;
    double marginal_gap;
    double min_gamma;
};

KKTReport verify_kkt_sea(const CostMatrix& cost, const Matrix& p, std::span<const double> gamma,
                         std::span<const double> lambda, double perplexity);
inline KKTReport verify_kkt_sea(const CostMatrix& cost, const SEASolution& sol, double perplexity) {
    return verify_kkt_sea(cost, sol.P.P, sol.gamma, sol.lambda, perplexity);
}

// Least-squares duals (gamma, lambda) for a symmetric P; entries below the
// smallest normal double are left out of the fit.
void fit_sea_duals(const CostMatrix& cost, const Matrix& p, std::vector<double>& gamma,
                   std::vector<double>& lambda);

} // namespace snekhorn
