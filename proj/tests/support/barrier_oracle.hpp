#pragma once

// Independent reference solver for the small linear programs with entropy
// constraints used as test oracles. Log-barrier interior point method with
// equality-constrained Newton steps, dense, meant for n <= 8.
//
//   min <P, C>  s.t.  rows (and optionally columns) sum to one,
//                     entropy constraints per row or on the total,
//                     P >= 0, optionally P = P^T.

#include "snekhorn/matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

enum class EntropyConstraint { per_row, global };

struct Problem {
    bool symmetric = false;     // one variable per unordered pair
    bool column_sums = false;   // also constrain P^T 1 = 1 (non-symmetric)
    EntropyConstraint entropy = EntropyConstraint::per_row;
    double target = 0.0;        // per-row bound or total bound
};

struct Result {
    snekhorn::Matrix P;
    double value = 0.0;
    std::vector<double> row_entropy;
};

inline Result barrier_solve(const snekhorn::Matrix& C, const Problem& prob) {
    const std::size_t n = C.rows();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> cells;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = prob.symmetric ? i : 0; j < n; ++j) {
            if (prob.symmetric && i != j) cells.push_back({{i, j}, {j, i}});
            else cells.push_back({{i, j}});
        }
    const std::size_t m = cells.size();

    // constraint groups: rows belonging to each entropy constraint
    std::vector<std::vector<std::size_t>> groups;
    if (prob.entropy == EntropyConstraint::per_row)
        for (std::size_t i = 0; i < n; ++i) groups.push_back({i});
    else {
        groups.emplace_back();
        for (std::size_t i = 0; i < n; ++i) groups.back().push_back(i);
    }
    const std::size_t ng = groups.size();
    std::vector<double> group_target(ng, prob.target);
    std::vector<int> row_group(n);
    for (std::size_t g = 0; g < ng; ++g)
        for (std::size_t i : groups[g]) row_group[i] = static_cast<int>(g);

    // equality constraints A x = 1
    std::size_t neq = n + ((prob.column_sums && !prob.symmetric) ? n - 1 : 0);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(neq, m);
    Eigen::VectorXd c(m);
    for (std::size_t k = 0; k < m; ++k) {
        c(k) = 0.0;
        for (auto [i, j] : cells[k]) {
            c(k) += C(i, j);
            A(i, k) += 1.0;
            if (neq > n && j < n - 1) A(n + j, k) += 1.0;
        }
    }

    Eigen::VectorXd x = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(n));

    auto group_values = [&](const Eigen::VectorXd& v, std::vector<double>& G) {
        G.assign(ng, 0.0);
        for (std::size_t k = 0; k < m; ++k)
            for (auto [i, j] : cells[k]) G[row_group[i]] += v(k) * (1.0 - std::log(v(k)));
        for (std::size_t g = 0; g < ng; ++g) G[g] -= group_target[g];
    };
    auto feasible = [&](const Eigen::VectorXd& v) {
        for (std::size_t k = 0; k < m; ++k)
            if (!(v(k) > 0.0)) return false;
        std::vector<double> G;
        group_values(v, G);
        for (double g : G)
            if (!(g > 0.0)) return false;
        return true;
    };
    // the entropy barrier alone keeps x > 0: d/dx of -log G blows up at x = 0
    auto phi = [&](const Eigen::VectorXd& v, double mu) {
        std::vector<double> G;
        group_values(v, G);
        double f = c.dot(v);
        for (double g : G) f -= mu * std::log(g);
        return f;
    };
    if (!feasible(x)) throw std::runtime_error("oracle: uniform start is infeasible");

    for (double mu = 1.0; mu >= 1e-10; mu *= 0.1) {
        for (int it = 0; it < 500; ++it) {
            std::vector<double> G;
            group_values(x, G);
            Eigen::MatrixXd dG = Eigen::MatrixXd::Zero(ng, m);
            Eigen::MatrixXd d2G = Eigen::MatrixXd::Zero(ng, m);
            for (std::size_t k = 0; k < m; ++k)
                for (auto [i, j] : cells[k]) {
                    dG(row_group[i], k) += -std::log(x(k));
                    d2G(row_group[i], k) += -1.0 / x(k);
                }
            Eigen::VectorXd grad = c;
            Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
            for (std::size_t g = 0; g < ng; ++g) {
                grad -= mu * dG.row(g).transpose() / G[g];
                H += mu * dG.row(g).transpose() * dG.row(g) / (G[g] * G[g]);
                for (std::size_t k = 0; k < m; ++k) H(k, k) -= mu * d2G(g, k) / G[g];
            }
            // KKT system equilibrated by S = diag(H)^(-1/2); entries of H span
            // many orders of magnitude once some x_k are tiny. Entries below
            // 1e-150 contribute nothing measurable and are frozen.
            std::vector<Eigen::Index> fr;
            for (std::size_t k = 0; k < m; ++k)
                if (x(k) > 1e-150) fr.push_back(static_cast<Eigen::Index>(k));
            const Eigen::Index mf = static_cast<Eigen::Index>(fr.size());
            Eigen::VectorXd sc(mf);
            for (Eigen::Index a = 0; a < mf; ++a) sc(a) = 1.0 / std::sqrt(H(fr[a], fr[a]));
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(mf + neq, mf + neq);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mf + neq);
            for (Eigen::Index a = 0; a < mf; ++a) {
                for (Eigen::Index b = 0; b < mf; ++b) K(a, b) = sc(a) * H(fr[a], fr[b]) * sc(b);
                for (std::size_t e = 0; e < neq; ++e) {
                    K(a, mf + e) = A(e, fr[a]) * sc(a);
                    K(mf + e, a) = K(a, mf + e);
                }
                rhs(a) = -sc(a) * grad(fr[a]);
            }
            const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
            Eigen::VectorXd dx = Eigen::VectorXd::Zero(m);
            for (Eigen::Index a = 0; a < mf; ++a) dx(fr[a]) = sc(a) * sol(a);
            const double decrement = -grad.dot(dx);
            if (!(decrement > 1e-20)) break;
            double t = 1.0;
            const double f0 = phi(x, mu);
            while (t > 1e-16) {
                const Eigen::VectorXd xn = x + t * dx;
                if (feasible(xn) && phi(xn, mu) <= f0 - 0.25 * t * decrement) break;
                t *= 0.5;
            }
            if (t <= 1e-16) break;
            x += t * dx;
            if (decrement < 1e-14) break;
        }
    }

    Result res;
    res.P = snekhorn::Matrix(n, n);
    for (std::size_t k = 0; k < m; ++k)
        for (auto [i, j] : cells[k]) res.P(i, j) = x(k);
    res.value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double h = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            res.value += res.P(i, j) * C(i, j);
            h += res.P(i, j) * (1.0 - std::log(res.P(i, j)));
        }
        res.row_entropy.push_back(h);
    }
    return res;
}

} // namespace oracle
