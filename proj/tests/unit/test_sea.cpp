#include "snekhorn/entropic_affinity.hpp"
#include "snekhorn/error.hpp"
#include "snekhorn/eval.hpp"
#include "snekhorn/sea.hpp"

#include "support/barrier_oracle.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace snekhorn;

namespace {

Matrix equidistant(std::size_t n, double c) {
    Matrix m(n, n, c);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 0;
    return m;
}

// diagonal mass of the equidistant entropy-saturated row
double equidistant_diag(std::size_t n, double xi) {
    const double t = std::log(xi) + 1;
    return oracle::bisect(
        [&](double a) {
            const double b = (1 - a) / (n - 1);
            return -a * (std::log(a) - 1) - (n - 1) * b * (std::log(b) - 1) - t;
        },
        1.0 / n, 1.0 - 1e-15);
}

bool contains(const std::vector<std::size_t>& v, std::size_t i) {
    return std::find(v.begin(), v.end(), i) != v.end();
}

// checks every property a returned SEA solution promises
void expect_sea_invariants(const CostMatrix& c, const SEASolution& s, double xi, double tol) {
    const std::size_t n = c.size();
    const double t = std::log(xi) + 1;
    const auto h = row_entropies(s.P.P);
    const auto r = row_sums(s.P.P);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) ASSERT_EQ(s.P.P(i, j), s.P.P(j, i));
        EXPECT_LE(std::abs(r[i] - 1), tol);
        if (contains(s.unsaturated_rows, i)) EXPECT_GE(h[i], t - tol);
        else EXPECT_LE(std::abs(h[i] - t), tol) << "row " << i;
        EXPECT_GT(s.gamma[i], 0.0);
    }
}

} // namespace

TEST(SeaPrimal, ClosedForms) {
    Matrix c = Matrix::from_rows({{0, 1, 2}, {1, 0, 0.5}, {2, 0.5, 0}});
    auto cm = CostMatrix::from_matrix(c);
    std::vector<double> one(3, 1.0), zero(3, 0.0);
    Matrix p = sea_primal_from_duals(cm, one, zero);
    for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(p.values()[k], std::exp(-c.values()[k]), 1e-15);

    std::vector<double> g = {1, 2, 3}, l = {0.1, 0.2, 0.3};
    p = sea_primal_from_duals(cm, g, l);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(p(i, j), p(j, i));
            EXPECT_GT(p(i, j), 0.0);
            EXPECT_NEAR(p(i, j), std::exp((l[i] + l[j] - 2 * c(i, j)) / (g[i] + g[j])), 1e-15);
        }
    EXPECT_THROW(sea_primal_from_duals(cm, std::vector<double>{1, 0, 1}, l), InvalidArgument);
}

TEST(SeaDualGradients, VanishAtEquidistantOptimum) {
    const std::size_t n = 6;
    const double c0 = 0.9, xi = 2.5;
    const double a = equidistant_diag(n, xi), b = (1 - a) / (n - 1);
    const double g = c0 / std::log(a / b), l = g * std::log(a);
    auto grads = sea_dual_gradients(CostMatrix::from_matrix(equidistant(n, c0)),
                                    std::vector<double>(n, g), std::vector<double>(n, l), xi);
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_LT(std::abs(grads.grad_gamma[i]), 1e-8);
        EXPECT_LT(std::abs(grads.grad_lambda[i]), 1e-8);
    }
}

TEST(SeaDualGradients, MatchCentralDifferences) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.3, 2.0), s(-1.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 3 + rep % 5;
        auto c = CostMatrix::from_matrix(oracle::random_cost(n, rng, 0.2, 2.0));
        std::vector<double> g(n), l(n), dg(n), dl(n);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = u(rng);
            l[i] = s(rng);
            dg[i] = s(rng);
            dl[i] = s(rng);
        }
        auto at = [&](double h) {
            std::vector<double> gg = g, ll = l;
            for (std::size_t i = 0; i < n; ++i) {
                gg[i] += h * dg[i];
                ll[i] += h * dl[i];
            }
            return sea_dual_gradients(c, gg, ll, 2.0).objective;
        };
        const double h = 1e-6;
        const double fd = (at(h) - at(-h)) / (2 * h);
        auto grads = sea_dual_gradients(c, g, l, 2.0);
        double an = 0;
        for (std::size_t i = 0; i < n; ++i) an += grads.grad_gamma[i] * dg[i] + grads.grad_lambda[i] * dl[i];
        EXPECT_NEAR(fd, an, 1e-5 * std::max(1.0, std::abs(an)));
    }
}

TEST(SeaDualGradients, EntropyGrowsWithUniformGamma) {
    std::mt19937_64 rng(42);
    auto c = CostMatrix::from_matrix(oracle::random_cost(6, rng, 0.5, 3.0));
    std::vector<double> zero(6, 0.0);
    std::vector<double> prev(6, -1e300);
    for (double g = 0.05; g < 100; g *= 2) {
        auto grads = sea_dual_gradients(c, std::vector<double>(6, g), zero, 3.0);
        for (std::size_t i = 0; i < 6; ++i) {
            // grad_gamma = target - H: strictly decreasing in g
            EXPECT_LT(grads.grad_gamma[i], prev[i] == -1e300 ? 1e300 : prev[i]);
            prev[i] = grads.grad_gamma[i];
        }
    }
}

TEST(SolveSeaDualAscent, EquidistantTwoValues) {
    const std::size_t n = 9;
    const double xi = 4.0;
    auto c = CostMatrix::from_matrix(equidistant(n, 1.7));
    auto s = solve_sea_dual_ascent(c, xi);
    const double a = equidistant_diag(n, xi);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            EXPECT_NEAR(s.P.P(i, j), i == j ? a : (1 - a) / (n - 1), 1e-6);
    auto ea = solve_ea(c, xi);
    EXPECT_LT(max_abs_diff(s.P.P, ea.P.P), 1e-6);
    EXPECT_TRUE(s.unsaturated_rows.empty());
}

// min <P, C> over symmetric row-stochastic P with row entropies >= log xi + 1
TEST(SolveSeaDualAscent, MatchesConstrainedProgramOracle) {
    std::mt19937_64 rng(43);
    for (int rep = 0; rep < 8; ++rep) {
        const std::size_t n = 3 + rep % 3;
        Matrix c = oracle::random_cost(n, rng);
        auto cm = CostMatrix::from_matrix(c);
        const double t = std::log(2.0) + 1;
        auto ref = oracle::barrier_solve(c, {true, false, oracle::EntropyConstraint::per_row, t});
        std::size_t slack = 0;
        for (double h : ref.row_entropy) slack += h - t > 1e-6;
        EXPECT_LE(slack, 1u);
        auto s = solve_sea_dual_ascent(cm, 2.0);
        EXPECT_NEAR(frobenius_dot(s.P.P, c), ref.value, 1e-4 * ref.value);
        expect_sea_invariants(cm, s, 2.0, 1e-6);
        for (std::size_t i : s.unsaturated_rows) EXPECT_GT(ref.row_entropy[i] - t, 1e-6);
    }
}

TEST(SolveSeaDualAscent, InvariantsAndKkt) {
    std::mt19937_64 rng(44);
    for (std::size_t n : {12u, 40u}) {
        auto c = pairwise_sq_euclidean(oracle::random_points(n, 5, rng));
        for (double xi : {3.0, 8.0}) {
            SEAOptions o;
            o.tol = 1e-8;
            o.max_iter = 50000;
            auto s = solve_sea_dual_ascent(c, xi, o);
            expect_sea_invariants(c, s, xi, 1e-8);
            auto k = verify_kkt_sea(c, s, xi);
            EXPECT_LT(k.stationarity, 1e-6);
            EXPECT_GT(k.min_gamma, 0.0);
        }
    }
}

TEST(SolveSeaDualAscent, LbfgsAgreesOnSaturatedInstance) {
    std::mt19937_64 rng(45);
    auto c = pairwise_sq_euclidean(oracle::random_points(20, 10, rng));
    auto a = solve_sea_dual_ascent(c, 5.0);
    SEAOptions o;
    o.optimizer = SEAOptimizer::lbfgs;
    auto b = solve_sea_dual_ascent(c, 5.0, o);
    ASSERT_TRUE(a.unsaturated_rows.empty());
    expect_sea_invariants(c, b, 5.0, 1e-6);
    EXPECT_LT(max_abs_diff(a.P.P, b.P.P), 1e-5);
}

TEST(SolveSeaDualAscent, ScaleAndPermutationInvariant) {
    std::mt19937_64 rng(46);
    const std::size_t n = 18;
    Matrix c = oracle::sq_dist(oracle::random_points(n, 10, rng));
    auto cm = CostMatrix::from_matrix(c);
    SEAOptions o;
    o.tol = 1e-9;
    o.max_iter = 50000;
    auto a = solve_sea_dual_ascent(cm, 4.0, o);
    auto b = solve_sea_dual_ascent(cm.scaled(7.5), 4.0, o);
    EXPECT_LT(max_abs_diff(a.P.P, b.P.P), 1e-6);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix cp(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cp(i, j) = c(perm[i], perm[j]);
    auto p = solve_sea_dual_ascent(CostMatrix::from_matrix(cp), 4.0, o);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(p.P.P(i, j), a.P.P(perm[i], perm[j]), 1e-6);
}

// Well separated clusters: entries between clusters vanish and one row per
// cluster can keep slack entropy at the optimum.
TEST(SolveSeaDualAscent, SeparatedClustersFlagSlackRows) {
    auto ds = gen_three_gaussians(30, {0.25, 0.5, 1.0}, 0);
    auto c = pairwise_sq_euclidean(ds.X);
    auto s = solve_sea_dual_ascent(c, 5.0);
    expect_sea_invariants(c, s, 5.0, 1e-6);
    EXPECT_LE(s.unsaturated_rows.size(), 3u);
    const auto h = row_entropies(s.P.P);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double perp = std::exp(h[i] - 1);
        if (contains(s.unsaturated_rows, i)) EXPECT_GT(perp, 5.0);
        else EXPECT_NEAR(perp, 5.0, 1e-3);
    }
    // at most one slack row per cluster
    std::vector<int> per_cluster(3, 0);
    for (std::size_t i : s.unsaturated_rows) ++per_cluster[(*ds.labels)[i]];
    for (int k : per_cluster) EXPECT_LE(k, 1);
    EXPECT_LT(verify_kkt_sea(c, s, 5.0).stationarity, 1e-5);
}

TEST(SolveSeaDualAscent, Errors) {
    std::mt19937_64 rng(47);
    auto c = CostMatrix::from_matrix(oracle::random_cost(5, rng));
    EXPECT_THROW(solve_sea_dual_ascent(c, 5.0), InvalidArgument);
    SEAOptions o;
    o.max_iter = 3;
    o.tol = 1e-14;
    try {
        solve_sea_dual_ascent(c, 2.0, o);
        FAIL();
    } catch (const NotConverged& e) {
        EXPECT_FALSE(e.trace().empty());
        EXPECT_NE(std::string(e.what()).find("did not converge"), std::string::npos);
    }
}

TEST(KlProjectSymmetric, Values) {
    Matrix k = Matrix::from_rows({{1, 4}, {1, 1}});
    EXPECT_EQ(kl_project_symmetric(k), Matrix::from_rows({{1, 2}, {2, 1}}));
    Matrix s = Matrix::from_rows({{1, 3}, {3, 2}});
    EXPECT_EQ(kl_project_symmetric(s), s);
    std::mt19937_64 rng(48);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    Matrix r(4, 4);
    for (double& v : r.values()) v = u(rng);
    Matrix p = kl_project_symmetric(r);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p(i, j), std::sqrt(r(i, j) * r(j, i)), 1e-15);
}

TEST(KlProjectHxi, InactiveConstraintNormalizesRows) {
    Matrix k = Matrix::from_rows({{1, 0.9, 0.8}, {0.7, 1, 0.9}, {0.95, 0.9, 1}});
    Matrix p = kl_project_hxi(k, 1.5);
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 3; ++j) s += k(i, j);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(p(i, j), k(i, j) / s, 1e-14);
    }
}

TEST(KlProjectHxi, GibbsKernelGivesEntropicAffinity) {
    std::mt19937_64 rng(49);
    auto c = pairwise_sq_euclidean(oracle::random_points(15, 3, rng));
    auto ea = solve_ea(c, 4.0);
    const double sigma = 0.5 * *std::min_element(ea.epsilon.begin(), ea.epsilon.end());
    Matrix k(15, 15);
    for (std::size_t i = 0; i < 15; ++i)
        for (std::size_t j = 0; j < 15; ++j) k(i, j) = std::exp(-c(i, j) / sigma);
    EXPECT_LT(max_abs_diff(kl_project_hxi(k, 4.0), ea.P.P), 1e-6);
}

TEST(KlProjectHxi, BeatsRandomFeasiblePoints) {
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> u(0.05, 3.0), w(0.0, 1.0);
    const std::size_t n = 4;
    const double t = std::log(2.0) + 1;
    Matrix k(n, n);
    for (double& v : k.values()) v = u(rng);
    k(0, 1) = 40;  // force an active constraint on row 0
    const Matrix p = kl_project_hxi(k, 2.0);
    for (double h : row_entropies(p)) EXPECT_GE(h, t - 1e-9);
    const double best = kl_divergence(p, k);
    for (int probe = 0; probe < 1000; ++probe) {
        Matrix q(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += (q(i, j) = w(rng) + 1e-9);
            for (std::size_t j = 0; j < n; ++j) q(i, j) /= s;
            // pull toward uniform until feasible
            while (entropy(q.row(i)) < t)
                for (std::size_t j = 0; j < n; ++j) q(i, j) = 0.5 * q(i, j) + 0.5 / n;
        }
        EXPECT_GE(kl_divergence(q, k), best - 1e-12);
    }
}

TEST(SolveSeaDykstra, EquidistantMatchesDualAscent) {
    auto c = CostMatrix::from_matrix(equidistant(7, 1.1));
    auto d = solve_sea_dykstra(c, 3.0);
    auto a = solve_sea_dual_ascent(c, 3.0);
    EXPECT_LT(max_abs_diff(d.P.P, a.P.P), 1e-5);
    EXPECT_EQ(d.method, SEAMethod::dykstra);
}

TEST(SolveSeaDykstra, SmallSigmaReproducesDualAscent) {
    std::mt19937_64 rng(51);
    auto c = pairwise_sq_euclidean(oracle::random_points(25, 10, rng));
    auto a = solve_sea_dual_ascent(c, 5.0);
    ASSERT_TRUE(a.unsaturated_rows.empty());
    DykstraOptions o;
    o.sigma = 0.9 * *std::min_element(a.gamma.begin(), a.gamma.end());
    auto d = solve_sea_dykstra(c, 5.0, o);
    EXPECT_LT(max_abs_diff(d.P.P, a.P.P), 1e-5);
    auto k = verify_kkt_sea(c, d, 5.0);
    EXPECT_LT(k.entropy_gap, 1e-4);
    EXPECT_LT(k.marginal_gap, 1e-4);
}

TEST(SolveSeaDykstra, ThreeGaussianSaturatedInstance) {
    auto ds = gen_three_gaussians(16, {0.25, 0.5, 1.0}, 0);
    auto c = pairwise_sq_euclidean(ds.X);
    auto d = solve_sea_dykstra(c, 5.0);
    const auto h = row_entropies(d.P.P);
    const auto r = row_sums(d.P.P);
    for (std::size_t i = 0; i < c.size(); ++i) {
        EXPECT_NEAR(h[i], std::log(5.0) + 1, 1e-4);
        EXPECT_NEAR(r[i], 1.0, 1e-4);
    }
}

// the dual ascent flags a slack row; Dykstra cannot reach that optimum and says so
TEST(SolveSeaDykstra, RefusesSlackRowInstances) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    int refused = 0;
    for (int k = 0; k < 20; ++k) {
        const std::size_t n = 4 + k % 3;
        const double xi = 2 + (k / 3) % 2;
        Matrix x(n, 2);
        for (double& v : x.values()) v = g(rng);
        auto c = pairwise_sq_euclidean(x);
        auto s = solve_sea_dual_ascent(c, xi);
        if (s.unsaturated_rows.empty()) continue;
        EXPECT_THROW(solve_sea_dykstra(c, xi), NotConverged) << "instance " << k;
        ++refused;
    }
    EXPECT_GT(refused, 0);
}

TEST(VerifyKkt, UniformMatrixGap) {
    const std::size_t n = 6;
    auto c = CostMatrix::from_matrix(equidistant(n, 1.0));
    Matrix u(n, n, 1.0 / n);
    std::vector<double> g(n, 1.0), l(n, 0.0);
    auto r = verify_kkt_sea(c, u, g, l, 2.0);
    EXPECT_NEAR(r.entropy_gap, std::log(n / 2.0), 1e-12);
    EXPECT_NEAR(r.marginal_gap, 0.0, 1e-15);
}

TEST(VerifyKkt, ResidualLinearInPerturbation) {
    std::mt19937_64 rng(52);
    auto c = pairwise_sq_euclidean(oracle::random_points(10, 4, rng));
    SEAOptions o;
    o.tol = 1e-10;
    o.max_iter = 50000;
    auto s = solve_sea_dual_ascent(c, 3.0, o);
    auto at = [&](double d) {
        std::vector<double> g = s.gamma;
        for (double& v : g) v += d;
        return verify_kkt_sea(c, s.P.P, g, s.lambda, 3.0).stationarity;
    };
    const double r1 = at(1e-4), r2 = at(2e-4), r4 = at(4e-4);
    EXPECT_NEAR(r2 / r1, 2.0, 0.05);
    EXPECT_NEAR(r4 / r2, 2.0, 0.05);
}

TEST(FitSeaDuals, RecoversGeneratingDuals) {
    std::mt19937_64 rng(53);
    auto c = CostMatrix::from_matrix(oracle::random_cost(7, rng, 0.5, 2.0));
    std::vector<double> g = {0.5, 0.8, 1.1, 0.6, 0.9, 1.4, 0.7}, l = {0.1, -0.2, 0.3, 0, 0.2, -0.1, 0.05};
    Matrix p = sea_primal_from_duals(c, g, l);
    std::vector<double> gf, lf;
    fit_sea_duals(c, p, gf, lf);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_NEAR(gf[i], g[i], 1e-8);
        EXPECT_NEAR(lf[i], l[i], 1e-8);
    }
}
