#include "snekhorn/eval.hpp"

#include "snekhorn/error.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace snekhorn {

Dataset gen_three_gaussians(std::size_t n_per, std::array<double, 3> stds, std::uint64_t seed) {
    for (double s : stds)
        if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidArgument("standard deviations must be >= 0");
    if (n_per == 0) throw InvalidArgument("n_per must be positive");
    const double centers[3][2] = {{0.0, 0.0}, {8.0, 0.0}, {4.0, 4.0 * std::sqrt(3.0)}};
    Dataset ds;
    ds.name = "three-gaussians";
    ds.seed = seed;
    ds.X = Matrix(3 * n_per, 2);
    ds.labels.emplace();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < n_per; ++t) {
            const std::size_t i = c * n_per + t;
            for (std::size_t k = 0; k < 2; ++k) ds.X(i, k) = centers[c][k] + stds[c] * gauss(rng);
            ds.labels->push_back(static_cast<int>(c));
        }
    return ds;
}

Dataset gen_multinomial_batch(std::uint64_t seed, const MultinomialSpec& spec) {
    if (spec.dims < 2) throw InvalidArgument("multinomial dims must be >= 2");
    for (std::size_t t : spec.trials)
        if (t == 0) throw InvalidArgument("multinomial trial counts must be positive");
    std::mt19937_64 rng(seed);

    // uniform on the simplex = normalized i.i.d. Exp(1)
    auto simplex = [&] {
        std::exponential_distribution<double> ex(1.0);
        std::vector<double> p(spec.dims);
        for (double& v : p) v = ex(rng);
        const double s = std::accumulate(p.begin(), p.end(), 0.0);
        for (double& v : p) v /= s;
        return p;
    };
    const std::vector<double> p1 = simplex();
    const std::vector<double> p2 = simplex();

    const std::size_t n = spec.counts[0] + spec.counts[1] + spec.counts[2];
    Dataset ds;
    ds.name = "multinomial";
    ds.seed = seed;
    ds.X = Matrix(n, spec.dims, 0.0);
    ds.labels.emplace();
    std::size_t row = 0;
    for (std::size_t g = 0; g < 3; ++g) {
        const std::vector<double>& p = g == 0 ? p1 : p2;
        std::discrete_distribution<std::size_t> draw(p.begin(), p.end());
        for (std::size_t s = 0; s < spec.counts[g]; ++s, ++row) {
            auto x = ds.X.row(row);
            for (std::size_t t = 0; t < spec.trials[g]; ++t) x[draw(rng)] += 1.0;
            const double total = static_cast<double>(spec.trials[g]);
            for (double& v : x) v /= total;
            ds.labels->push_back(g == 0 ? 0 : 1);
            ds.batch.push_back(static_cast<int>(g));
        }
    }
    return ds;
}

} // namespace snekhorn
