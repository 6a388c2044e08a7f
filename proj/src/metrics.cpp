#include "snekhorn/eval.hpp"

#include "snekhorn/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace snekhorn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const Matrix& m) {
    return {m.values().data(), static_cast<Eigen::Index>(m.rows()),
            static_cast<Eigen::Index>(m.cols())};
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
    return m;
}

double sq_dist(const Matrix& x, std::size_t i, const Matrix& c, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.cols(); ++k) {
        const double t = x(i, k) - c(j, k);
        s += t * t;
    }
    return s;
}

Eigen::MatrixXd laplacian(const Matrix& p) {
    if (!p.square()) throw InvalidArgument("affinity must be square");
    const Eigen::MatrixXd P = view(p);
    Eigen::MatrixXd L = -P;
    for (Eigen::Index i = 0; i < P.rows(); ++i) L(i, i) += P.row(i).sum();
    // symmetrize round-off so the solver sees an exactly self-adjoint input
    return 0.5 * (L + L.transpose());
}

} // namespace

PCAResult pca(const Matrix& x, std::size_t d) {
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (d == 0 || d > std::min(n, p)) throw InvalidArgument("pca: d must be in [1, min(n, p)]");
    if (n < 2) throw InvalidArgument("pca: need at least two rows");
    Eigen::MatrixXd X = view(x);
    X.rowwise() -= X.colwise().mean();
    const double denom = static_cast<double>(n - 1);

    Eigen::MatrixXd V(p, d);  // directions as columns
    std::vector<double> eig(d);
    double total = 0.0;
    if (p <= n) {
        const Eigen::MatrixXd cov = X.transpose() * X / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        if (es.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
        total = cov.trace();
        for (std::size_t k = 0; k < d; ++k) {
            const Eigen::Index col = static_cast<Eigen::Index>(p - 1 - k);
            V.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(col);
            eig[k] = std::max(0.0, es.eigenvalues()(col));
        }
    } else {
        const Eigen::MatrixXd gram = X * X.transpose() / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
        total = gram.trace();
        for (std::size_t k = 0; k < d; ++k) {
            const Eigen::Index col = static_cast<Eigen::Index>(n - 1 - k);
            eig[k] = std::max(0.0, es.eigenvalues()(col));
            Eigen::VectorXd v = X.transpose() * es.eigenvectors().col(col);
            const double norm = v.norm();
            if (norm > 0.0) v /= norm;
            V.col(static_cast<Eigen::Index>(k)) = v;
        }
    }
    for (std::size_t k = 0; k < d; ++k) {
        auto v = V.col(static_cast<Eigen::Index>(k));
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
    }
    PCAResult res;
    res.Y = from_eigen(X * V);
    res.components = from_eigen(V.transpose());
    res.explained_variance = eig;
    const double top = std::accumulate(eig.begin(), eig.end(), 0.0);
    res.explained_variance_ratio = total > 0.0 ? top / total : 0.0;
    return res;
}

KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iter) {
    const std::size_t n = x.rows();
    const std::size_t q = x.cols();
    if (k == 0 || k > n) throw InvalidArgument("kmeans: k must be in [1, n]");
    if (restarts == 0) throw InvalidArgument("kmeans: restarts must be positive");
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (std::size_t r = 0; r < restarts; ++r) {
        // k-means++ seeding
        Matrix centers(k, q);
        std::uniform_int_distribution<std::size_t> first(0, n - 1);
        std::size_t pick = first(rng);
        for (std::size_t t = 0; t < q; ++t) centers(0, t) = x(pick, t);
        std::vector<double> d2(n);
        for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(x, i, centers, 0);
        for (std::size_t c = 1; c < k; ++c) {
            const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
            if (total > 0.0) {
                std::discrete_distribution<std::size_t> draw(d2.begin(), d2.end());
                pick = draw(rng);
            } else {
                pick = first(rng);
            }
            for (std::size_t t = 0; t < q; ++t) centers(c, t) = x(pick, t);
            for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(x, i, centers, c));
        }

        std::vector<int> labels(n, -1);
        double inertia = 0.0;
        for (std::size_t it = 0; it < max_iter; ++it) {
            bool changed = false;
            inertia = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                int arg = 0;
                double bestd = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    const double v = sq_dist(x, i, centers, c);
                    if (v < bestd) {
                        bestd = v;
                        arg = static_cast<int>(c);
                    }
                }
                inertia += bestd;
                if (labels[i] != arg) {
                    labels[i] = arg;
                    changed = true;
                }
            }
            if (!changed) break;
            Matrix sums(k, q, 0.0);
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                ++counts[labels[i]];
                for (std::size_t t = 0; t < q; ++t) sums(labels[i], t) += x(i, t);
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) {
                    // empty cluster: move it to the point farthest from its center
                    std::size_t far = 0;
                    double fd = -1.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double v = sq_dist(x, i, centers, labels[i]);
                        if (v > fd) {
                            fd = v;
                            far = i;
                        }
                    }
                    for (std::size_t t = 0; t < q; ++t) centers(c, t) = x(far, t);
                    continue;
                }
                for (std::size_t t = 0; t < q; ++t)
                    centers(c, t) = sums(c, t) / static_cast<double>(counts[c]);
            }
        }
        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.labels = labels;
            best.centers = centers;
        }
    }
    return best;
}

std::vector<double> laplacian_spectrum(const Matrix& p, std::size_t k) {
    if (k > p.rows()) throw InvalidArgument("laplacian_spectrum: k exceeds n");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian(p), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error("laplacian_spectrum: eigendecomposition failed");
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = es.eigenvalues()(static_cast<Eigen::Index>(i));
    return out;
}

std::vector<int> spectral_clustering(const Matrix& p, std::size_t k, std::uint64_t seed) {
    if (k == 0 || k > p.rows()) throw InvalidArgument("spectral_clustering: k must be in [1, n]");
    for (double v : p.values())
        if (!(v >= 0.0)) throw InvalidArgument("spectral_clustering: affinity must be nonnegative");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian(p));
    if (es.info() != Eigen::Success) throw Error("spectral_clustering: eigendecomposition failed");
    const Matrix emb = from_eigen(es.eigenvectors().leftCols(static_cast<Eigen::Index>(k)));
    return kmeans(emb, k, seed).labels;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw InvalidArgument("adjusted_rand_index: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw InvalidArgument("adjusted_rand_index: need at least two labels");
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < n; ++i) {
        cells[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto c2 = [](double v) { return v * (v - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, v] : cells) index += c2(v);
    for (const auto& [key, v] : ra) sa += c2(v);
    for (const auto& [key, v] : rb) sb += c2(v);
    const double expected = sa * sb / c2(static_cast<double>(n));
    const double maximum = 0.5 * (sa + sb);
    if (maximum == expected) {
        // both labelings trivial (all one cluster or all singletons)
        return (ra.size() == rb.size()) ? 1.0 : 0.0;
    }
    return (index - expected) / (maximum - expected);
}

double silhouette_score(const Matrix& z, std::span<const int> labels) {
    const std::size_t n = z.rows();
    if (labels.size() != n) throw InvalidArgument("silhouette_score: label length mismatch");
    std::map<int, std::size_t> ids;
    for (int l : labels) ids.emplace(l, ids.size());
    if (ids.size() < 2) throw InvalidArgument("silhouette_score: need at least two clusters");
    const std::size_t k = ids.size();
    std::vector<std::size_t> lab(n), size(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        lab[i] = ids[labels[i]];
        ++size[lab[i]];
    }
    double total = 0.0;
    std::vector<double> sums(k);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[lab[j]] += std::sqrt(sq_dist(z, i, z, j));
        if (size[lab[i]] == 1) continue;  // singleton scores 0
        const double a = sums[lab[i]] / static_cast<double>(size[lab[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != lab[i]) b = std::min(b, sums[c] / static_cast<double>(size[c]));
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

double trustworthiness(const Matrix& x, const Matrix& z, std::size_t n_neighbors) {
    const std::size_t n = x.rows();
    if (z.rows() != n) throw InvalidArgument("trustworthiness: row count mismatch");
    const std::size_t k = n_neighbors;
    if (k == 0 || 2 * k >= n) throw InvalidArgument("trustworthiness: need 0 < n_neighbors < n/2");

    auto order = [&](const Matrix& m, std::size_t i) {
        std::vector<std::pair<double, std::size_t>> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d.emplace_back(sq_dist(m, i, m, j), j);
        std::sort(d.begin(), d.end());
        return d;
    };
    double penalty = 0.0;
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto dx = order(x, i);
        for (std::size_t r = 0; r < dx.size(); ++r) rank[dx[r].second] = r + 1;
        const auto dz = order(z, i);
        for (std::size_t r = 0; r < k; ++r) {
            const std::size_t j = dz[r].second;
            if (rank[j] > k) penalty += static_cast<double>(rank[j] - k);
        }
    }
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    return 1.0 - 2.0 / (nn * kk * (2.0 * nn - 3.0 * kk - 1.0)) * penalty;
}

} // namespace snekhorn
