#pragma once

#include "snekhorn/affinity.hpp"
#include "snekhorn/core_math.hpp"
#include "snekhorn/sinkhorn.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace snekhorn {

enum class LatentKernel { gaussian, student };

// Input affinity used by the SNEkhorn objectives.
enum class InputAffinity { sea, ea_symmetrized };

struct EmbedConfig {
    std::size_t dim = 2;
    LatentKernel kernel = LatentKernel::gaussian;
    InputAffinity affinity_in = InputAffinity::sea;
    double lr = 0.1;
    std::size_t max_iter = 10000;
    double rel_tol = 1e-5;  // on |L_t - L_{t-1}| / |L_{t-1}|
    std::size_t stop_patience = 1;  // consecutive steps below rel_tol before stopping
    std::uint64_t seed = 0;
    double sinkhorn_tol = 1e-5;
    std::size_t sinkhorn_max_iter = 1000;
    bool warm_start = true;
};

struct Embedding {
    Matrix Z;
    std::vector<double> loss_trace;  // KL(P | Q_Z) per evaluated iterate
    std::vector<std::size_t> sinkhorn_iters_trace; // empty for the global-Q objectives
    std::vector<double> final_f;
    std::size_t iterations = 0;
    bool converged = false;  // relative loss change fell below rel_tol
    std::map<std::string, double> diagnostics;
};

// Squared Euclidean distances (gaussian) or log(1 + squared distances)
// (student). Throws InvalidArgument naming the pair on duplicate rows.
CostMatrix latent_cost(const Matrix& z, LatentKernel kernel);

struct SnekhornLoss {
    double loss;       // <P, C_Z> - 2 <f, 1>
    SinkhornSolution Q;
};

// Runs the symmetric Sinkhorn at bandwidth 1 on latent_cost(Z), warm-started
// from f_init when given, and evaluates the objective.
SnekhornLoss snekhorn_loss(const Matrix& p, const Matrix& z, LatentKernel kernel,
                           const SinkhornOptions& sinkhorn = {},
                           std::span<const double> f_init = {});

// dLoss/dZ from dLoss/dC_Z = P - Q at the converged plan.
Matrix snekhorn_gradient(const Matrix& p, const Matrix& z, LatentKernel kernel, const Matrix& q);

// KL(P | Q~) over the off-diagonal entries, up to a Z-independent constant,
// with Q~_ij = exp(-C_ij) / sum_{l != t} exp(-C_lt) and Q~_ii = 0:
//   <P, C_Z> + (sum_{i != j} P_ij) log sum_{l != t} exp(-C_lt).
// Writes Q~ into `q_out` when given.
double global_q_loss(const Matrix& p, const Matrix& z, LatentKernel kernel, Matrix* q_out = nullptr);

// Gradient of global_q_loss, dLoss/dC_Z = P - (sum_{i != j} P_ij) Q~.
Matrix global_q_gradient(const Matrix& p, const Matrix& z, LatentKernel kernel, const Matrix& q);

// Chains dLoss/dC_Z (symmetric) through the latent kernel.
Matrix chain_latent_gradient(const Matrix& dc, const Matrix& z, LatentKernel kernel);

// SNEkhorn (gaussian) / t-SNEkhorn (student): min_Z KL(P | Q^ds_Z) for a given
// doubly stochastic affinity P.
Embedding embed(const Affinity& p, const EmbedConfig& cfg);

// min_Z KL(P | Q~_Z) with a globally normalized latent kernel.
Embedding embed_global_q(const Affinity& p, const EmbedConfig& cfg);

// Builds the input affinity selected by cfg.affinity_in (SEA by default)
// and runs embed.
Embedding embed(const CostMatrix& cost, double perplexity, const EmbedConfig& cfg);

// Symmetric-SNE (gaussian) / t-SNE (student) baseline: symmetrized entropic
// affinity in, globally normalized latent kernel.
Embedding embed_baseline_sne(const CostMatrix& cost, double perplexity, const EmbedConfig& cfg);

// Ablation: symmetric entropic affinity matched with the globally normalized
// latent kernel. Adds the "circularity" diagnostic.
Embedding embed_doubly_stochastic_mismatch_demo(const CostMatrix& cost, double perplexity,
                                                const EmbedConfig& cfg);

// std / mean of the distances of the rows of Z to their centroid.
double circularity(const Matrix& z);

} // namespace snekhorn
