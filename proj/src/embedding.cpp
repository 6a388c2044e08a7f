#include "snekhorn/embedding.hpp"

#include "snekhorn/entropic_affinity.hpp"
#include "snekhorn/error.hpp"
#include "snekhorn/kernels.hpp"
#include "snekhorn/optim.hpp"
#include "snekhorn/parallel.hpp"
#include "snekhorn/sea.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

namespace snekhorn {

namespace {

Matrix latent_sq_distances(const Matrix& z) {
    const std::size_t n = z.rows();
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < z.cols(); ++k) {
                const double t = z(i, k) - z(j, k);
                s += t * t;
            }
            d(i, j) = s;
            d(j, i) = s;
        }
    return d;
}

void check_shapes(const Matrix& p, const Matrix& z) {
    if (!p.square() || p.rows() != z.rows())
        throw InvalidArgument("affinity and embedding sizes differ");
}

} // namespace

CostMatrix latent_cost(const Matrix& z, LatentKernel kernel) {
    if (z.rows() < 2 || z.cols() < 1) throw InvalidArgument("latent_cost: need n >= 2, q >= 1");
    Matrix d = latent_sq_distances(z);
    const std::size_t n = z.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!(d(i, j) >= 1e-24)) {
                std::ostringstream msg;
                msg << "duplicate latent points " << i << " and " << j;
                throw InvalidArgument(msg.str());
            }
    if (kernel == LatentKernel::student)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) d(j, i) = d(i, j) = std::log1p(d(i, j));
    return CostMatrix::from_matrix(std::move(d));
}

SnekhornLoss snekhorn_loss(const Matrix& p, const Matrix& z, LatentKernel kernel,
                           const SinkhornOptions& sinkhorn, std::span<const double> f_init) {
    check_shapes(p, z);
    const CostMatrix c = latent_cost(z, kernel);
    SinkhornSolution q = solve_sinkhorn_symmetric(c, 1.0, sinkhorn, f_init);
    double loss = frobenius_dot(p, c.matrix());
    for (double f : q.f) loss -= 2.0 * f;
    return {loss, std::move(q)};
}

Matrix chain_latent_gradient(const Matrix& dc, const Matrix& z, LatentKernel kernel) {
    const std::size_t n = z.rows();
    const std::size_t q = z.cols();
    Matrix g(n, q, 0.0);
    parallel_for(n, [&](std::size_t i) {
        auto gi = g.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double w = 2.0 * (dc(i, j) + dc(j, i));
            if (kernel == LatentKernel::student) {
                double d = 0.0;
                for (std::size_t k = 0; k < q; ++k) {
                    const double t = z(i, k) - z(j, k);
                    d += t * t;
                }
                w /= 1.0 + d;
            }
            for (std::size_t k = 0; k < q; ++k) gi[k] += w * (z(i, k) - z(j, k));
        }
    });
    return g;
}

Matrix snekhorn_gradient(const Matrix& p, const Matrix& z, LatentKernel kernel, const Matrix& q) {
    check_shapes(p, z);
    Matrix dc(p.rows(), p.cols());
    for (std::size_t t = 0; t < dc.values().size(); ++t)
        dc.values()[t] = p.values()[t] - q.values()[t];
    return chain_latent_gradient(dc, z, kernel);
}

namespace {

// P's mass off the diagonal; Q~ has no self-affinity, so P_ii never enters
double offdiagonal_mass(const Matrix& p) {
    double mass = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            if (i != j) mass += p(i, j);
    return mass;
}

} // namespace

double global_q_loss(const Matrix& p, const Matrix& z, LatentKernel kernel, Matrix* q_out) {
    check_shapes(p, z);
    const CostMatrix c = latent_cost(z, kernel);
    const std::size_t n = c.size();
    Matrix k(n, n);
    std::vector<double> neg(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        kernels::axpy(-1.0, c.row(i), {}, neg);
        // max of -C_i: is 0 (diagonal); drop that exp(0) afterwards
        total += kernels::exp_shift_sum(neg, 0.0, k.row(i)) - 1.0;
        k(i, i) = 0.0;
    }
    if (q_out) {
        for (double& v : k.values()) v /= total;
        *q_out = std::move(k);
    }
    return frobenius_dot(p, c.matrix()) + offdiagonal_mass(p) * std::log(total);
}

Matrix global_q_gradient(const Matrix& p, const Matrix& z, LatentKernel kernel, const Matrix& q) {
    check_shapes(p, z);
    const double mass = offdiagonal_mass(p);
    Matrix dc(p.rows(), p.cols());
    for (std::size_t t = 0; t < dc.values().size(); ++t)
        dc.values()[t] = p.values()[t] - mass * q.values()[t];
    return chain_latent_gradient(dc, z, kernel);
}

double circularity(const Matrix& z) {
    const std::size_t n = z.rows();
    const std::size_t q = z.cols();
    std::vector<double> centroid(q, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < q; ++k) centroid[k] += z(i, k) / static_cast<double>(n);
    std::vector<double> r(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < q; ++k) s += (z(i, k) - centroid[k]) * (z(i, k) - centroid[k]);
        r[i] = std::sqrt(s);
        mean += r[i] / static_cast<double>(n);
    }
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean) / static_cast<double>(n);
    return std::sqrt(var) / mean;
}

namespace {

// loss and gradient at Z; may record solver statistics into `out`
using Objective = std::function<double(const Matrix& z, Matrix& grad, Embedding& out)>;

void validate(const EmbedConfig& cfg, std::size_t n) {
    if (cfg.dim < 1) throw InvalidArgument("embedding dimension must be >= 1");
    if (!(cfg.rel_tol > 0.0)) throw InvalidArgument("rel_tol must be positive");
    if (cfg.stop_patience < 1) throw InvalidArgument("stop_patience must be >= 1");
    if (!(cfg.lr > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (n < 2) throw InvalidArgument("need at least two points to embed");
}

double plogp(const Matrix& p, bool diagonal) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < p.cols(); ++j)
            if ((diagonal || i != j) && p(i, j) > 0.0) s += p(i, j) * std::log(p(i, j));
    return s;
}

// `offset` turns the objective into the KL divergence it stands for, so that
// the relative stopping rule does not depend on a dropped constant
Embedding run(std::size_t n, const EmbedConfig& cfg, double offset, const Objective& objective) {
    validate(cfg, n);
    Embedding out;
    out.Z = Matrix(n, cfg.dim);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : out.Z.values()) v = gauss(rng);

    Adam adam(n * cfg.dim, cfg.lr);
    Matrix grad(n, cfg.dim);
    std::size_t calm = 0;
    for (std::size_t it = 0;; ++it) {
        double loss;
        try {
            loss = objective(out.Z, grad, out) + offset;
        } catch (const InvalidArgument& e) {
            throw NotConverged(std::string("embedding failed at iteration ") + std::to_string(it) +
                                   ": " + e.what(),
                               out.loss_trace);
        }
        if (!std::isfinite(loss)) {
            out.loss_trace.push_back(loss);
            throw NotConverged("embedding diverged: non-finite loss at iteration " +
                                   std::to_string(it),
                               out.loss_trace);
        }
        out.loss_trace.push_back(loss);
        if (it > 0) {
            const double prev = out.loss_trace[it - 1];
            // a single flat step happens while ADAM turns around; ask for a run
            calm = std::abs(loss - prev) <= cfg.rel_tol * std::abs(prev) ? calm + 1 : 0;
            if (calm >= cfg.stop_patience) {
                out.converged = true;
                break;
            }
        }
        if (it >= cfg.max_iter) break;
        adam.step(out.Z.values(), grad.values());
        out.iterations = it + 1;
    }
    return out;
}

} // namespace

Embedding embed(const Affinity& p, const EmbedConfig& cfg) {
    const std::size_t n = p.P.rows();
    if (!p.P.square()) throw InvalidArgument("affinity must be square");
    const SinkhornOptions so{cfg.sinkhorn_tol, cfg.sinkhorn_max_iter};
    std::vector<double> f;
    Embedding e = run(n, cfg, plogp(p.P, true), [&](const Matrix& z, Matrix& grad, Embedding& out) {
        std::span<const double> init;
        if (cfg.warm_start) init = f;
        SnekhornLoss l = snekhorn_loss(p.P, z, cfg.kernel, so, init);
        out.sinkhorn_iters_trace.push_back(l.Q.iters);
        grad = snekhorn_gradient(p.P, z, cfg.kernel, l.Q.P.P);
        f = std::move(l.Q.f);
        return l.loss;
    });
    e.final_f = std::move(f);
    return e;
}

Embedding embed_global_q(const Affinity& p, const EmbedConfig& cfg) {
    const std::size_t n = p.P.rows();
    if (!p.P.square()) throw InvalidArgument("affinity must be square");
    Matrix q;
    return run(n, cfg, plogp(p.P, false), [&](const Matrix& z, Matrix& grad, Embedding&) {
        const double loss = global_q_loss(p.P, z, cfg.kernel, &q);
        grad = global_q_gradient(p.P, z, cfg.kernel, q);
        return loss;
    });
}

Embedding embed(const CostMatrix& cost, double perplexity, const EmbedConfig& cfg) {
    if (cfg.affinity_in == InputAffinity::sea)
        return embed(solve_sea_dual_ascent(cost, perplexity).P, cfg);
    return embed(symmetrize_l2(solve_ea(cost, perplexity).P), cfg);
}

Embedding embed_baseline_sne(const CostMatrix& cost, double perplexity, const EmbedConfig& cfg) {
    return embed_global_q(symmetrize_l2(solve_ea(cost, perplexity).P), cfg);
}

Embedding embed_doubly_stochastic_mismatch_demo(const CostMatrix& cost, double perplexity,
                                                const EmbedConfig& cfg) {
    Embedding e = embed_global_q(solve_sea_dual_ascent(cost, perplexity).P, cfg);
    e.diagnostics["circularity"] = circularity(e.Z);
    return e;
}

} // namespace snekhorn
