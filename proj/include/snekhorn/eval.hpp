#pragma once

#include "snekhorn/matrix.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace snekhorn {

struct Dataset {
    Matrix X;
    std::optional<std::vector<int>> labels;
    std::vector<int> batch;  // secondary grouping, empty when not applicable
    std::string name;
    std::uint64_t seed = 0;
};

// n_per 2-D points around each corner of the equilateral triangle
// (0,0), (8,0), (4, 4 sqrt 3), isotropic std per component. Labels 0..2.
Dataset gen_three_gaussians(std::size_t n_per, std::array<double, 3> stds, std::uint64_t seed);

struct MultinomialSpec {
    std::size_t dims = 10000;
    std::array<std::size_t, 3> counts{500, 250, 250};
    std::array<std::size_t, 3> trials{1000, 1000, 10000};
};

// Two probability vectors p1, p2 drawn uniformly on the simplex; group 0 draws
// counts[0] samples M(trials[0], p1), groups 1 and 2 draw from p2 with
// trials[1] and trials[2]. Rows are normalized counts. labels = source
// distribution (0 for p1, 1 for p2), batch = group index.
Dataset gen_multinomial_batch(std::uint64_t seed, const MultinomialSpec& spec = {});

struct PCAResult {
    Matrix Y;                              // n x d scores
    Matrix components;                     // d x p unit directions
    std::vector<double> explained_variance; // top-d covariance eigenvalues (1/(n-1))
    double explained_variance_ratio = 0.0;
};

// Projection of the centered data on its top-d principal directions. The
// largest-magnitude coordinate of every direction is made positive.
PCAResult pca(const Matrix& x, std::size_t d);
inline Matrix pca_reduce(const Matrix& x, std::size_t d) { return pca(x, d).Y; }

struct KMeansResult {
    std::vector<int> labels;
    Matrix centers;
    double inertia = 0.0;
};

// Lloyd's algorithm from k-means++ seeds; best inertia over `restarts` runs.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                    std::size_t max_iter = 300);

// k smallest eigenvalues of diag(P1) - P, nondecreasing.
std::vector<double> laplacian_spectrum(const Matrix& p, std::size_t k);

// k-means on the rows of the k eigenvectors of diag(P1) - P with the
// smallest eigenvalues.
std::vector<int> spectral_clustering(const Matrix& p, std::size_t k, std::uint64_t seed);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// Mean silhouette (Euclidean). Points in singleton clusters score 0.
double silhouette_score(const Matrix& z, std::span<const int> labels);

// Neighborhood preservation of Z relative to X; ties in distance are broken
// by index. Requires n_neighbors < n / 2.
double trustworthiness(const Matrix& x, const Matrix& z, std::size_t n_neighbors = 5);

} // namespace snekhorn
