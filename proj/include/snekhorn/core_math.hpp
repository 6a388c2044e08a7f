#pragma once

#include "snekhorn/matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace snekhorn {

// Nonnegative vector, optionally required to sum to one.
class ProbVector {
public:
    // Throws InvalidArgument on a negative or non-finite entry, or when
    // `stochastic` is set and the entries do not sum to 1 within 1e-12.
    explicit ProbVector(std::vector<double> values, bool stochastic = false);

    std::span<const double> values() const noexcept { return values_; }
    bool stochastic() const noexcept { return stochastic_; }
    std::size_t size() const noexcept { return values_.size(); }

private:
    std::vector<double> values_;
    bool stochastic_;
};

// H(p) = -sum_i p_i (log p_i - 1), with 0 log 0 = 0. For a stochastic p this is
// the Shannon entropy plus one.
double entropy(std::span<const double> p);
inline double entropy(const ProbVector& p) { return entropy(p.values()); }

// exp(H(p) - 1); p must be stochastic.
double perplexity(const ProbVector& p);

// Row entropies H_r(P).
std::vector<double> row_entropies(const Matrix& p);

// KL(P|Q) = sum_ij P_ij (log(P_ij / Q_ij) - 1). Throws when P_ij > 0 and Q_ij = 0.
double kl_divergence(const Matrix& p, const Matrix& q);

// log sum_k exp(v_k) with a max shift. Throws on an empty vector.
double log_sum_exp(std::span<const double> v);

// Symmetric cost matrix with zero diagonal and strictly positive off-diagonal
// entries. Instances always satisfy these invariants.
class CostMatrix {
public:
    // Validates membership; throws InvalidArgument("cost matrix not in D: ...").
    static CostMatrix from_matrix(Matrix m);

    std::size_t size() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
    std::span<const double> row(std::size_t i) const noexcept { return m_.row(i); }
    const Matrix& matrix() const noexcept { return m_; }

    // s * C for s > 0.
    CostMatrix scaled(double s) const;
    // Mean of the off-diagonal entries.
    double mean_offdiagonal() const;

private:
    explicit CostMatrix(Matrix m) : m_(std::move(m)) {}
    Matrix m_;
};

// C_ij = ||X_i - X_j||^2, each pair computed once. Duplicate rows are an error
// unless `jitter_seed` is given, in which case the rows get a deterministic
// perturbation of magnitude 1e-8 * (median nonzero distance) before retrying.
CostMatrix pairwise_sq_euclidean(const Matrix& x,
                                 std::optional<std::uint64_t> jitter_seed = std::nullopt);

} // namespace snekhorn
