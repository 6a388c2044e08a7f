#include "snekhorn/entropic_affinity.hpp"
#include "snekhorn/error.hpp"

#include "support/barrier_oracle.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace snekhorn;

TEST(SolveEA, ThreePointRowMatchesBisection) {
    auto c = CostMatrix::from_matrix(Matrix::from_rows({{0, 1, 2}, {1, 0, 1.5}, {2, 1.5, 0}}));
    auto sol = solve_ea(c, 2.0);
    const double eps = oracle::ea_bandwidth({0, 1, 2}, 2.0);
    EXPECT_NEAR(sol.epsilon[0], eps, 1e-7 * eps);
    EXPECT_LT(sol.residuals[0], 1e-9);
    EXPECT_NEAR(entropy(sol.P.P.row(0)), std::log(2.0) + 1, 1e-9);
}

TEST(SolveEA, EquidistantRowsTwoValues) {
    const std::size_t n = 7;
    const double c0 = 0.8, xi = 3.0;
    Matrix m(n, n, c0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 0;
    auto sol = solve_ea(CostMatrix::from_matrix(m), xi);
    // 1-D problem in the diagonal mass a, off-diagonal b = (1 - a) / (n - 1)
    const double t = std::log(xi) + 1;
    auto h = [&](double a) {
        const double b = (1 - a) / (n - 1);
        return -a * (std::log(a) - 1) - (n - 1) * b * (std::log(b) - 1) - t;
    };
    const double a = oracle::bisect(h, 1.0 / n, 1.0 - 1e-15);
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(sol.P.P(i, i), a, 1e-9);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) {
                EXPECT_NEAR(sol.P.P(i, j), (1 - a) / (n - 1), 1e-9);
            }
    }
}

TEST(SolveEA, SaturatesEveryRow) {
    std::mt19937_64 rng(21);
    for (std::size_t n : {5u, 20u, 60u}) {
        auto c = pairwise_sq_euclidean(oracle::random_points(n, 3, rng));
        for (double xi : {2.0, std::min(4.5, n - 1.0), n - 1.0}) {
            auto sol = solve_ea(c, xi);
            for (std::size_t i = 0; i < n; ++i) {
                const auto row = sol.P.P.row(i);
                EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
                EXPECT_NEAR(std::exp(entropy(row) - 1), xi, 1e-6 * xi);
                EXPECT_GT(sol.epsilon[i], 0.0);
                EXPECT_LE(sol.residuals[i], 1e-9);
            }
        }
    }
}

TEST(SolveEA, ExcludeSelf) {
    std::mt19937_64 rng(22);
    auto c = pairwise_sq_euclidean(oracle::random_points(12, 2, rng));
    EAOptions o;
    o.exclude_self = true;
    auto sol = solve_ea(c, 4.0, o);
    for (std::size_t i = 0; i < 12; ++i) {
        EXPECT_EQ(sol.P.P(i, i), 0.0);
        EXPECT_NEAR(std::exp(entropy(sol.P.P.row(i)) - 1), 4.0, 1e-6 * 4);
    }
    // equidistant neighbours make an excluded-self row constant
    Matrix m(4, 4, 1.0);
    for (int i = 0; i < 4; ++i) m(i, i) = 0;
    EXPECT_THROW(solve_ea(CostMatrix::from_matrix(m), 2.0, o), InvalidArgument);
}

TEST(SolveEA, PerplexityOutOfRange) {
    auto c = CostMatrix::from_matrix(Matrix::from_rows({{0, 1, 2}, {1, 0, 1.5}, {2, 1.5, 0}}));
    try {
        solve_ea(c, 3.0);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("perplexity out of range"), std::string::npos);
    }
    EXPECT_THROW(solve_ea(c, 0.5), InvalidArgument);
}

TEST(SolveEA, PermutationEquivariant) {
    std::mt19937_64 rng(23);
    const std::size_t n = 15;
    Matrix c = oracle::random_cost(n, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix cp(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cp(i, j) = c(perm[i], perm[j]);
    auto a = solve_ea(CostMatrix::from_matrix(c), 5.0);
    auto b = solve_ea(CostMatrix::from_matrix(cp), 5.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(b.P.P(i, j), a.P.P(perm[i], perm[j]), 1e-10);
}

TEST(SolveEA, EntropyMonotoneInBandwidth) {
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> row(9);
        for (double& v : row) v = u(rng);
        row[0] = 0;
        std::vector<double> out(row.size());
        double prev = -1;
        for (double le = -6; le <= 6; le += 0.25) {
            const double h = detail::row_softmax_entropy(row, std::exp(le), out);
            EXPECT_GT(h, prev - 1e-15);
            prev = h;
        }
    }
}

// EA attains min <P, C> over row-stochastic P with row entropies >= log xi + 1
TEST(SolveEA, MatchesConstrainedLinearProgram) {
    std::mt19937_64 rng(25);
    for (int rep = 0; rep < 6; ++rep) {
        const std::size_t n = 4 + rep % 3;
        const double xi = 2.0 + rep % 2;
        Matrix c = oracle::random_cost(n, rng);
        auto sol = solve_ea(CostMatrix::from_matrix(c), xi);
        auto ref = oracle::barrier_solve(
            c, {false, false, oracle::EntropyConstraint::per_row, std::log(xi) + 1});
        const double v = frobenius_dot(sol.P.P, c);
        EXPECT_LE(v, ref.value * (1 + 1e-6));
        EXPECT_NEAR(v, ref.value, 1e-5 * ref.value);
    }
}

TEST(SymmetrizeL2, HandExampleAndFixedPoint) {
    Affinity p;
    p.P = Matrix::from_rows({{0.9, 0.1}, {0.5, 0.5}});
    auto s = symmetrize_l2(p);
    EXPECT_EQ(s.kind, AffinityKind::ea_symmetrized);
    EXPECT_NEAR(s.P(0, 1), 0.3, 1e-15);
    EXPECT_NEAR(s.P(1, 0), 0.3, 1e-15);
    EXPECT_EQ(s.P(0, 0), 0.9);
    EXPECT_EQ(symmetrize_l2(s).P, s.P);
}

TEST(SymmetrizeL2, ClosestSymmetricMatrix) {
    std::mt19937_64 rng(26);
    std::normal_distribution<double> g(0, 0.3);
    Affinity p;
    p.P = Matrix(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 3; ++j) s += (p.P(i, j) = std::exp(g(rng)));
        for (std::size_t j = 0; j < 3; ++j) p.P(i, j) /= s;
    }
    const Matrix s = symmetrize_l2(p).P;
    auto dist = [&](const Matrix& q) {
        double d = 0;
        for (std::size_t k = 0; k < 9; ++k) d += std::pow(q.values()[k] - p.P.values()[k], 2);
        return d;
    };
    const double best = dist(s);
    for (int probe = 0; probe < 2000; ++probe) {
        Matrix q = s;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i; j < 3; ++j) q(i, j) = q(j, i) = s(i, j) + g(rng) * 0.1;
        EXPECT_GE(dist(q), best - 1e-15);
    }
}

TEST(RowStochasticGaussian, ClosedForms) {
    const double c0 = 0.7, nu = 0.4;
    Matrix m(5, 5, c0);
    for (int i = 0; i < 5; ++i) m(i, i) = 0;
    auto a = row_stochastic_gaussian(CostMatrix::from_matrix(m), nu);
    EXPECT_NEAR(a.P(0, 0) / a.P(0, 1), std::exp(c0 / nu), 1e-12);

    std::mt19937_64 rng(27);
    Matrix c = oracle::random_cost(4, rng, 0.5, 3.0);
    auto u = row_stochastic_gaussian(CostMatrix::from_matrix(c), 1e12);
    for (double v : u.P.values()) EXPECT_NEAR(v, 0.25, 1e-9);
    auto r = row_stochastic_gaussian(CostMatrix::from_matrix(c), 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
        double z = 0;
        for (std::size_t j = 0; j < 4; ++j) z += std::exp(-c(i, j));
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.P(i, j), std::exp(-c(i, j)) / z, 1e-12);
    }
    EXPECT_THROW(row_stochastic_gaussian(CostMatrix::from_matrix(c), 0.0), InvalidArgument);
}

TEST(RowBandwidth, WarmGuessFindsSameRoot) {
    std::vector<double> row = {0, 0.3, 1.2, 2.5, 0.9, 4.0};
    std::vector<double> out(row.size());
    const double t = std::log(3.0) + 1;
    auto cold = detail::solve_row_bandwidth(row, t, 1e-12, 200, std::nullopt, out);
    for (double g : {1e-6, 0.01, cold.epsilon, 50.0, 1e5}) {
        auto warm = detail::solve_row_bandwidth(row, t, 1e-12, 200, std::nullopt, out, g);
        EXPECT_NEAR(warm.epsilon, cold.epsilon, 1e-9 * cold.epsilon) << g;
    }
    // lower bound above the root: returned as is
    auto lb = detail::solve_row_bandwidth(row, t, 1e-12, 200, 10 * cold.epsilon, out);
    EXPECT_DOUBLE_EQ(lb.epsilon, 10 * cold.epsilon);
}
