#include "snekhorn/sea.hpp"

#include "snekhorn/entropic_affinity.hpp"
#include "snekhorn/error.hpp"
#include "snekhorn/kernels.hpp"
#include "snekhorn/optim.hpp"
#include "snekhorn/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace snekhorn {

namespace {

constexpr double kGammaFloor = 1e-12;

void check_gamma(std::span<const double> gamma, std::size_t n) {
    if (gamma.size() != n) throw InvalidArgument("gamma has the wrong length");
    for (double g : gamma)
        if (!(g > 0.0) || !std::isfinite(g)) throw InvalidArgument("gamma entries must be positive");
}

void check_range(double perplexity, std::size_t n) {
    if (!(perplexity >= 1.0 && perplexity <= static_cast<double>(n) - 1.0)) {
        std::ostringstream msg;
        msg << "perplexity out of range: " << perplexity << " not in [1, " << n - 1 << "]";
        throw InvalidArgument(msg.str());
    }
}

struct DualState {
    Matrix P;
    std::vector<double> H, r;
    double objective = 0.0;
    double entropy_gap = 0.0;
    double marginal_gap = 0.0;
};

// P(gamma, lambda) with its row entropies, row sums and the dual value.
void evaluate(const Matrix& c, std::span<const double> gamma, std::span<const double> lambda,
              double target, DualState& st) {
    const std::size_t n = c.rows();
    if (st.P.rows() != n) st.P = Matrix(n, n);
    st.H.assign(n, 0.0);
    st.r.assign(n, 0.0);
    std::vector<double> lin(n), plogp(n);
    parallel_for(n, [&](std::size_t i) {
        thread_local std::vector<double> logits;
        logits.resize(n);
        const double li = lambda[i];
        const double gi = gamma[i];
        auto crow = c.row(i);
        for (std::size_t j = 0; j < n; ++j)
            logits[j] = ((li + lambda[j]) - 2.0 * crow[j]) / (gi + gamma[j]);
        auto prow = st.P.row(i);
        st.r[i] = kernels::exp_shift_sum(logits, 0.0, prow);
        plogp[i] = kernels::dot(prow, logits);
        lin[i] = kernels::dot(prow, crow);
        st.H[i] = st.r[i] - plogp[i];
    });
    double q = 0.0, eg = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        q += lin[i] + gamma[i] * (target - st.H[i]) + lambda[i] * (1.0 - st.r[i]);
        eg = std::max(eg, std::abs(target - st.H[i]));
        mg = std::max(mg, std::abs(1.0 - st.r[i]));
    }
    st.objective = q;
    st.entropy_gap = eg;
    st.marginal_gap = mg;
}

void mirror_upper(Matrix& p) {
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = i + 1; j < p.cols(); ++j) p(j, i) = p(i, j);
}

void fill_diagnostics(SEASolution& sol, double target) {
    const auto& P = sol.P.P;
    double eg = 0.0, mg = 0.0;
    for (std::size_t i = 0; i < P.rows(); ++i) {
        eg = std::max(eg, std::abs(entropy(P.row(i)) - target));
        double s = 0.0;
        for (double v : P.row(i)) s += v;
        mg = std::max(mg, std::abs(s - 1.0));
    }
    sol.P.diagnostics["max_entropy_gap"] = eg;
    sol.P.diagnostics["max_marginal_gap"] = mg;
    sol.P.diagnostics["iterations"] = static_cast<double>(sol.iterations);
    sol.P.diagnostics["unsaturated_rows"] = static_cast<double>(sol.unsaturated_rows.size());
}

} // namespace

Matrix sea_primal_from_duals(const CostMatrix& cost, std::span<const double> gamma,
                             std::span<const double> lambda) {
    const std::size_t n = cost.size();
    check_gamma(gamma, n);
    if (lambda.size() != n) throw InvalidArgument("lambda has the wrong length");
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v =
                std::exp(((lambda[i] + lambda[j]) - 2.0 * cost(i, j)) / (gamma[i] + gamma[j]));
            p(i, j) = v;
            p(j, i) = v;
        }
    return p;
}

SEADualGradients sea_dual_gradients(const CostMatrix& cost, std::span<const double> gamma,
                                    std::span<const double> lambda, double perplexity) {
    const std::size_t n = cost.size();
    check_gamma(gamma, n);
    if (lambda.size() != n) throw InvalidArgument("lambda has the wrong length");
    const double target = std::log(perplexity) + 1.0;
    DualState st;
    evaluate(cost.matrix(), gamma, lambda, target, st);
    SEADualGradients g;
    g.grad_gamma.resize(n);
    g.grad_lambda.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.grad_gamma[i] = target - st.H[i];
        g.grad_lambda[i] = 1.0 - st.r[i];
    }
    g.objective = st.objective;
    return g;
}

SEASolution solve_sea_dual_ascent(const CostMatrix& cost, double perplexity,
                                  const SEAOptions& options) {
    const std::size_t n = cost.size();
    check_range(perplexity, n);
    if (!(options.tol > 0.0) || !(options.lr > 0.0))
        throw InvalidArgument("sea: tol and lr must be positive");
    const double target = std::log(perplexity) + 1.0;

    const EASolution ea = solve_ea(cost, perplexity);
    const std::vector<double>& w = ea.epsilon;

    // gamma_i = w_i b_i^2 with w = eps puts every row in its own units, so a
    // unit step in b means the same whatever the spread of bandwidths.
    // lambda_i = gamma_i m_i makes m_i = log P_ii; P stays smooth when one
    // gamma goes to zero (an unsaturated row), where (gamma, lambda) -> 0 with a
    // finite ratio. x = (b, m) starts at b = 1, m_i = log P^ea_ii, which puts
    // every row sum near one.
    std::vector<double> x(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = 1.0;
        if (options.lambda_init_from_ea) x[n + i] = std::log(ea.P.P(i, i));
    }
    std::vector<double> gamma(n), lambda(n), grad(2 * n);

    SEASolution sol;
    sol.method = SEAMethod::dual_ascent;
    DualState st;
    // rows whose gamma sits at the floor; they may keep slack entropy
    std::vector<char> floored(n, 0);

    // Evaluates the state at x; returns true when the stopping rule holds.
    // With `trial` set (line-search probes) invalid points are reported
    // through `bad` instead of throwing.
    bool bad = false;
    const bool precondition = options.optimizer == SEAOptimizer::adam;
    auto step_eval = [&](std::span<const double> xs, bool trial) {
        bad = false;
        for (std::size_t i = 0; i < n; ++i) {
            double b2 = xs[i] * xs[i];
            floored[i] = b2 < kGammaFloor;
            if (floored[i]) b2 = kGammaFloor;
            gamma[i] = w[i] * b2;
            lambda[i] = gamma[i] * xs[n + i];
        }
        evaluate(cost.matrix(), gamma, lambda, target, st);
        for (std::size_t i = 0; i < n; ++i) {
            const double gl = 1.0 - st.r[i];
            grad[i] = -2.0 * w[i] * xs[i] * ((target - st.H[i]) + xs[n + i] * gl);
            // ADAM gets the m-gradient without its b^2 factor: a positive
            // diagonal rescaling that keeps a collapsing row movable
            grad[n + i] = (precondition ? -w[i] : -gamma[i]) * gl;
        }
        // complementary slackness: a floored row only has to reach the target
        double eg = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            eg = std::max(eg, floored[i] ? target - st.H[i] : std::abs(target - st.H[i]));
        if (trial && !std::isfinite(st.objective)) {
            bad = true;
            return false;
        }
        sol.trace.push_back({st.objective, eg, st.marginal_gap});
        if (!std::isfinite(st.objective)) {
            std::vector<double> t;
            for (const auto& e : sol.trace) t.push_back(std::max(e.entropy_gap, e.marginal_gap));
            throw NotConverged("sea dual ascent diverged (non-finite dual); try a smaller learning rate",
                               std::move(t));
        }
        return std::max(eg, st.marginal_gap) <= options.tol;
    };

    bool converged = false;
    if (options.optimizer == SEAOptimizer::adam) {
        // Constant-step ADAM can cycle without settling; when the best gap has
        // not improved for `patience` steps, restart from the best iterate with
        // half the step. Invalid iterates (non-finite dual, collapsed gammas)
        // trigger the same restart.
        double lr = options.lr;
        Adam adam(2 * n, lr, options.beta1, options.beta2);
        std::vector<double> best_x = x;
        double best = std::numeric_limits<double>::infinity();
        std::size_t since = 0, halvings = 0;
        for (std::size_t it = 0;; ++it) {
            const bool done = step_eval(x, true);
            if (done) {
                converged = true;
                sol.iterations = it;
                break;
            }
            if (it >= options.max_iter) break;
            if (bad || since >= options.patience) {
                if (++halvings > options.max_lr_halvings) {
                    if (bad) step_eval(x, false);  // throws with the cause
                    break;
                }
                lr *= 0.5;
                adam = Adam(2 * n, lr, options.beta1, options.beta2);
                x = best_x;
                since = 0;
                continue;
            }
            const double gap = std::max(sol.trace.back().entropy_gap, sol.trace.back().marginal_gap);
            if (gap < best) {
                best = gap;
                best_x = x;
                since = 0;
            } else {
                ++since;
            }
            adam.step(x, grad);
        }
        if (!converged) step_eval(x, false);
    } else {
        bool hit = false;
        auto fg = [&](std::span<const double> xs, std::span<double> g) {
            hit = step_eval(xs, true);
            std::copy(grad.begin(), grad.end(), g.begin());
            return bad ? std::numeric_limits<double>::infinity() : -st.objective;
        };
        LbfgsOptions lo;
        lo.max_iter = options.max_iter;
        const LbfgsResult res = minimize_lbfgs(x, fg, [&] { return hit; }, lo);
        converged = res.stopped;
        sol.iterations = res.iterations;
        if (!converged) step_eval(x, false);
    }

    if (!converged) {
        std::vector<double> t;
        for (const auto& e : sol.trace) t.push_back(std::max(e.entropy_gap, e.marginal_gap));
        std::ostringstream msg;
        msg << "sea dual ascent did not converge: entropy gap " << sol.trace.back().entropy_gap
            << ", marginal gap " << sol.trace.back().marginal_gap << " after "
            << sol.trace.size() - 1 << " iterations (tol " << options.tol << ")";
        const auto nf = std::count(floored.begin(), floored.end(), 1);
        if (nf > 0)
            msg << "; " << nf << " gamma(s) collapsed below " << kGammaFloor
                << ", try a smaller learning rate";
        throw NotConverged(msg.str(), std::move(t));
    }

    for (std::size_t i = 0; i < n; ++i)
        if (floored[i]) sol.unsaturated_rows.push_back(i);
    sol.P.P = std::move(st.P);
    mirror_upper(sol.P.P);
    sol.P.kind = AffinityKind::sea;
    sol.P.params = {{"perplexity", perplexity}, {"tol", options.tol}, {"lr", options.lr}};
    sol.gamma.resize(n);
    sol.lambda.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.gamma[i] = gamma[i];
        sol.lambda[i] = lambda[i];
    }
    fill_diagnostics(sol, target);
    return sol;
}

Matrix kl_project_symmetric(const Matrix& k) {
    if (!k.square()) throw InvalidArgument("kl_project_symmetric: matrix must be square");
    for (double v : k.values())
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidArgument("kl_project_symmetric: entries must be positive");
    const std::size_t n = k.rows();
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = std::sqrt(k(i, j) * k(j, i));
            p(i, j) = v;
            p(j, i) = v;
        }
    return p;
}

namespace {

// Row projection onto H_xi in log space: writes log of softmax(logk / rho).
double project_row_hxi(std::span<const double> logk, double target, std::span<double> out_log,
                       std::vector<double>& cost, std::vector<double>& tmp,
                       std::optional<double> guess = std::nullopt) {
    const std::size_t n = logk.size();
    cost.resize(n);
    tmp.resize(n);
    for (std::size_t j = 0; j < n; ++j) cost[j] = -logk[j];
    const detail::RowBandwidth rb =
        detail::solve_row_bandwidth(cost, target, 1e-12, 500, 1.0, tmp, guess);
    const double m = kernels::max(logk);
    for (std::size_t j = 0; j < n; ++j) out_log[j] = (logk[j] - m) / rb.epsilon;
    const double lse = std::log(kernels::exp_shift_sum(out_log, 0.0, tmp));
    for (std::size_t j = 0; j < n; ++j) out_log[j] -= lse;
    return rb.epsilon;
}

} // namespace

Matrix kl_project_hxi(const Matrix& k, double perplexity) {
    if (!k.square()) throw InvalidArgument("kl_project_hxi: matrix must be square");
    const std::size_t n = k.rows();
    check_range(perplexity, n);
    const double target = std::log(perplexity) + 1.0;
    Matrix logk(n, n);
    for (std::size_t t = 0; t < k.values().size(); ++t) {
        const double v = k.values()[t];
        if (!(v > 0.0) || !std::isfinite(v))
            throw InvalidArgument("kl_project_hxi: entries must be positive");
        logk.values()[t] = std::log(v);
    }
    Matrix out(n, n);
    std::vector<double> cost, tmp;
    for (std::size_t i = 0; i < n; ++i) {
        try {
            project_row_hxi(logk.row(i), target, out.row(i), cost, tmp);
        } catch (const InvalidArgument& e) {
            std::ostringstream msg;
            msg << "kl_project_hxi: row " << i << ": " << e.what();
            throw InvalidArgument(msg.str());
        }
        for (double& v : out.row(i)) v = std::exp(v);
    }
    return out;
}

namespace {

struct DykstraRun {
    Matrix P;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

DykstraRun run_dykstra(const CostMatrix& cost, double target, double sigma,
                       const DykstraOptions& options) {
    const std::size_t n = cost.size();
    Matrix log_ps(n, n), log_xi(n, n, 0.0), log_ph(n, n), log_k(n, n);
    for (std::size_t t = 0; t < n * n; ++t) log_ps.values()[t] = -cost.matrix().values()[t] / sigma;

    DykstraRun run;
    std::vector<double> rho(n, 0.0);
    for (std::size_t it = 0; it < options.max_iter; ++it) {
        for (std::size_t t = 0; t < n * n; ++t)
            log_k.values()[t] = log_ps.values()[t] + log_xi.values()[t];
        parallel_for(n, [&](std::size_t i) {
            thread_local std::vector<double> c, tmp;
            rho[i] = project_row_hxi(log_k.row(i), target, log_ph.row(i), c, tmp, rho[i]);
        });
        for (std::size_t t = 0; t < n * n; ++t)
            log_xi.values()[t] += log_ps.values()[t] - log_ph.values()[t];
        double diff = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const double v = 0.5 * (log_ph(i, j) + log_ph(j, i));
                diff = std::max(diff, std::abs(std::exp(v) - std::exp(log_ps(i, j))));
                log_ps(i, j) = v;
                log_ps(j, i) = v;
            }
        run.trace.push_back(diff);
        run.iterations = it + 1;
        if (diff < options.tol) {
            run.converged = true;
            break;
        }
    }
    run.P = Matrix(n, n);
    for (std::size_t t = 0; t < n * n; ++t) run.P.values()[t] = std::exp(log_ps.values()[t]);
    return run;
}

} // namespace

SEASolution solve_sea_dykstra(const CostMatrix& cost, double perplexity,
                              const DykstraOptions& options) {
    const std::size_t n = cost.size();
    check_range(perplexity, n);
    if (!(options.tol > 0.0)) throw InvalidArgument("dykstra: tol must be positive");
    const double target = std::log(perplexity) + 1.0;

    double sigma = options.sigma;
    if (!(sigma > 0.0)) {
        const EASolution ea = solve_ea(cost, perplexity);
        sigma = *std::min_element(ea.epsilon.begin(), ea.epsilon.end());
    }

    std::ostringstream history;
    for (std::size_t attempt = 0; attempt <= options.max_halvings; ++attempt, sigma *= 0.5) {
        DykstraRun run = run_dykstra(cost, target, sigma, options);
        if (!run.converged)
            throw NotConverged("dykstra did not converge within max_iter at sigma " +
                                   std::to_string(sigma),
                               std::move(run.trace));
        double eg = 0.0, mg = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            eg = std::max(eg, std::abs(entropy(run.P.row(i)) - target));
            double s = 0.0;
            for (double v : run.P.row(i)) s += v;
            mg = std::max(mg, std::abs(s - 1.0));
        }
        if (eg <= options.saturation_tol && mg <= options.saturation_tol) {
            SEASolution sol;
            sol.method = SEAMethod::dykstra;
            sol.iterations = run.iterations;
            sol.P.P = std::move(run.P);
            sol.P.kind = AffinityKind::sea;
            sol.P.params = {{"perplexity", perplexity}, {"sigma", sigma}, {"tol", options.tol}};
            fit_sea_duals(cost, sol.P.P, sol.gamma, sol.lambda);
            for (double d : run.trace) sol.trace.push_back({std::nan(""), std::nan(""), d});
            fill_diagnostics(sol, target);
            return sol;
        }
        history << " sigma " << sigma << ": entropy gap " << eg << ", marginal gap " << mg << ";";
    }
    throw NotConverged("dykstra left rows unsaturated after halving sigma " +
                           std::to_string(options.max_halvings) + " times (" + history.str() +
                           " ); use the dual-ascent method",
                       {});
}

void fit_sea_duals(const CostMatrix& cost, const Matrix& p, std::vector<double>& gamma,
                   std::vector<double>& lambda) {
    const std::size_t n = cost.size();
    if (p.rows() != n || p.cols() != n) throw InvalidArgument("fit_sea_duals: shape mismatch");
    // unknowns u = (gamma, lambda); equation per pair i <= j:
    //   L_ij (gamma_i + gamma_j) - (lambda_i + lambda_j) = -2 C_ij
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(2 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            if (!(p(i, j) >= 0.0)) throw InvalidArgument("fit_sea_duals: P must be nonnegative");
            // underflowed or subnormal entries carry no usable log
            if (p(i, j) < std::numeric_limits<double>::min()) continue;
            const double l = std::log(p(i, j));
            const double b = -2.0 * cost(i, j);
            std::size_t idx[4];
            double val[4];
            int m = 0;
            if (i == j) {
                idx[m] = i; val[m++] = 2.0 * l;
                idx[m] = n + i; val[m++] = -2.0;
            } else {
                idx[m] = i; val[m++] = l;
                idx[m] = j; val[m++] = l;
                idx[m] = n + i; val[m++] = -1.0;
                idx[m] = n + j; val[m++] = -1.0;
            }
            for (int a = 0; a < m; ++a) {
                atb(idx[a]) += val[a] * b;
                for (int c = 0; c < m; ++c) ata(idx[a], idx[c]) += val[a] * val[c];
            }
        }
    const Eigen::VectorXd u = ata.ldlt().solve(atb);
    gamma.assign(u.data(), u.data() + n);
    lambda.assign(u.data() + n, u.data() + 2 * n);
}

KKTReport verify_kkt_sea(const CostMatrix& cost, const Matrix& p, std::span<const double> gamma,
                         std::span<const double> lambda, double perplexity) {
    const std::size_t n = cost.size();
    const double target = std::log(perplexity) + 1.0;
    KKTReport rep{0.0, 0.0, 0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double r;
            if (p(i, j) >= std::numeric_limits<double>::min()) {
                r = 2.0 * cost(i, j) + (gamma[i] + gamma[j]) * std::log(p(i, j)) -
                    (lambda[i] + lambda[j]);
            } else {
                // underflowed entry: the closed form must be negligible there too
                r = std::exp((lambda[i] + lambda[j] - 2.0 * cost(i, j)) / (gamma[i] + gamma[j]));
            }
            rep.stationarity = std::max(rep.stationarity, std::abs(r));
        }
        rep.entropy_gap = std::max(rep.entropy_gap, std::abs(entropy(p.row(i)) - target));
        double s = 0.0;
        for (double v : p.row(i)) s += v;
        rep.marginal_gap = std::max(rep.marginal_gap, std::abs(s - 1.0));
        rep.min_gamma = std::min(rep.min_gamma, gamma[i]);
    }
    return rep;
}

} // namespace snekhorn
