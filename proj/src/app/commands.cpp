#include "internal.hpp"

#include "snekhorn/embedding.hpp"
#include "snekhorn/entropic_affinity.hpp"
#include "snekhorn/error.hpp"
#include "snekhorn/eval.hpp"
#include "snekhorn/io.hpp"
#include "snekhorn/parallel.hpp"
#include "snekhorn/sea.hpp"
#include "snekhorn/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace snekhorn::app::detail {

namespace {

template <std::size_t N, class T>
std::array<T, N> fixed(const Json& j, const char* key) {
    const auto v = j.at(key).get<std::vector<T>>();
    if (v.size() != N)
        throw InvalidArgument(std::string(key) + " needs " + std::to_string(N) + " values");
    std::array<T, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

std::map<int, std::size_t> histogram(const std::vector<int>& labels) {
    std::map<int, std::size_t> h;
    for (int l : labels) ++h[l];
    return h;
}

Json histogram_json(const std::vector<int>& labels) {
    Json h = Json::object();
    for (auto [label, count] : histogram(labels)) h[std::to_string(label)] = count;
    return h;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0)
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    return m;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {  // population (ddof 0)
    if (v.empty()) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

Matrix column(const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.values().begin());
    return m;
}

} // namespace

// ---------------------------------------------------------------- gen

Json cmd_gen(const Json& cfg) {
    const std::string gen = cfg.at("generator");
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    Dataset ds;
    Json params;
    if (gen == "three-gaussians") {
        const auto n_per = cfg.at("n_per").get<std::size_t>();
        const auto stds = fixed<3, double>(cfg, "stds");
        ds = gen_three_gaussians(n_per, stds, seed);
        params = {{"n_per", n_per}, {"stds", stds}};
    } else if (gen == "multinomial") {
        MultinomialSpec spec;
        spec.dims = cfg.at("dims").get<std::size_t>();
        spec.counts = fixed<3, std::size_t>(cfg, "counts");
        spec.trials = fixed<3, std::size_t>(cfg, "trials");
        ds = gen_multinomial_batch(seed, spec);
        params = {{"dims", spec.dims}, {"counts", spec.counts}, {"trials", spec.trials}};
    } else {
        throw InvalidArgument("unknown generator '" + gen + "' (three-gaussians, multinomial)");
    }

    write_matrix(cfg, "data.csv", ds.X, "points");
    Json prov = {{"generator", gen}, {"seed", seed}, {"params", params},
                 {"rows", ds.X.rows()}, {"cols", ds.X.cols()}};
    if (ds.labels) {
        io::write_labels_csv(out_path(cfg, "labels.csv"), *ds.labels);
        prov["label_histogram"] = histogram_json(*ds.labels);
    }
    if (!ds.batch.empty()) {
        io::write_labels_csv(out_path(cfg, "batch.csv"), ds.batch);
        prov["batch_histogram"] = histogram_json(ds.batch);
    }
    write_json(out_path(cfg, "provenance.json"), prov);
    return prov;
}

// ---------------------------------------------------------------- affinity

namespace {

struct AffinityRun {
    Affinity P;
    Matrix duals;
    std::vector<std::string> dual_names;
    Json extra = Json::object();
};

AffinityRun compute_affinity(const std::string& method, const CostMatrix& cost, const Json& cfg) {
    const double xi = cfg.at("perplexity").get<double>();
    const Json& tol = cfg.at("tol");
    const Json& max_iter = cfg.at("max_iter");
    const bool exclude_self = cfg.at("exclude_self").get<bool>();
    if (exclude_self && method != "ea" && method != "ea-sym")
        throw InvalidArgument("--exclude-self applies to ea and ea-sym only");

    AffinityRun r;
    if (method == "ea" || method == "ea-sym") {
        EAOptions o;
        o.exclude_self = exclude_self;
        if (!tol.is_null()) o.tol = tol.get<double>();
        if (!max_iter.is_null()) o.max_iter = max_iter.get<std::size_t>();
        EASolution s = solve_ea(cost, xi, o);
        r.P = method == "ea" ? std::move(s.P) : symmetrize_l2(s.P);
        r.duals = column(s.epsilon);
        r.dual_names = {"epsilon"};
    } else if (method == "rs" || method == "rs-sym") {
        if (cfg.at("bandwidth").is_null()) throw InvalidArgument("--bandwidth is required for " + method);
        Affinity a = row_stochastic_gaussian(cost, cfg.at("bandwidth").get<double>());
        r.P = method == "rs" ? std::move(a) : symmetrize_l2(a);
    } else if (method == "ds") {
        SinkhornOptions o;
        if (!tol.is_null()) o.tol = tol.get<double>();
        if (!max_iter.is_null()) o.max_iter = max_iter.get<std::size_t>();
        SinkhornSolution s;
        if (!cfg.at("bandwidth").is_null()) {
            s = solve_sinkhorn_symmetric(cost, cfg.at("bandwidth").get<double>(), o);
        } else {
            CalibratedSinkhorn c = calibrate_nu(cost, xi);
            r.extra["calibration_solves"] = c.searches;
            s = std::move(c.solution);
        }
        r.extra["nu"] = s.nu;
        r.duals = column(s.f);
        r.dual_names = {"f"};
        r.P = std::move(s.P);
    } else if (method == "sea" || method == "sea-dykstra") {
        SEASolution s;
        if (method == "sea") {
            SEAOptions o;
            if (!tol.is_null()) o.tol = tol.get<double>();
            if (!max_iter.is_null()) o.max_iter = max_iter.get<std::size_t>();
            o.lr = cfg.at("lr").get<double>();
            const std::string opt = cfg.at("optimizer");
            if (opt == "adam") o.optimizer = SEAOptimizer::adam;
            else if (opt == "lbfgs") o.optimizer = SEAOptimizer::lbfgs;
            else throw InvalidArgument("unknown optimizer '" + opt + "' (adam, lbfgs)");
            s = solve_sea_dual_ascent(cost, xi, o);
        } else {
            DykstraOptions o;
            if (!tol.is_null()) o.tol = tol.get<double>();
            if (!max_iter.is_null()) o.max_iter = max_iter.get<std::size_t>();
            s = solve_sea_dykstra(cost, xi, o);
        }
        const KKTReport kkt = verify_kkt_sea(cost, s, xi);
        r.extra["kkt"] = {{"stationarity", kkt.stationarity},
                          {"entropy_gap", kkt.entropy_gap},
                          {"marginal_gap", kkt.marginal_gap},
                          {"min_gamma", kkt.min_gamma}};
        r.extra["unsaturated_rows"] = s.unsaturated_rows;
        Matrix d(cost.size(), 2);
        for (std::size_t i = 0; i < cost.size(); ++i) {
            d(i, 0) = s.gamma[i];
            d(i, 1) = s.lambda[i];
        }
        r.duals = std::move(d);
        r.dual_names = {"gamma", "lambda"};
        r.P = std::move(s.P);
    } else {
        throw InvalidArgument("unknown method '" + method +
                              "' (ea, ea-sym, rs, rs-sym, ds, sea, sea-dykstra)");
    }
    return r;
}

Json affinity_diagnostics(const AffinityRun& r, double xi) {
    const Matrix& p = r.P.P;
    const std::size_t n = p.rows();
    const std::vector<double> h = row_entropies(p);
    const std::vector<double> rs = row_sums(p);
    std::vector<double> perp(n), resid(n);
    double max_row = 0.0, max_col = 0.0, gap = 0.0;
    const double target = std::log(xi) + 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        perp[i] = std::exp(h[i] - 1.0);
        resid[i] = rs[i] - 1.0;
        max_row = std::max(max_row, std::abs(resid[i]));
        gap = std::max(gap, std::abs(h[i] - target));
        double c = 0.0;
        for (std::size_t k = 0; k < n; ++k) c += p(k, i);
        max_col = std::max(max_col, std::abs(c - 1.0));
    }
    Json d = {{"method", to_string(r.P.kind)},
              {"n", n},
              {"row_entropy", h},
              {"row_perplexity", perp},
              {"row_sum_residual", resid},
              {"max_row_residual", max_row},
              {"max_col_residual", max_col},
              {"max_entropy_gap", gap},
              {"perplexity_mean", mean(perp)},
              {"perplexity_std", stddev(perp)},
              {"params", r.P.params},
              {"solver", r.P.diagnostics}};
    d.update(r.extra);
    return d;
}

} // namespace

Json cmd_affinity(const Json& cfg) {
    const Matrix x = load_points(cfg);
    const CostMatrix cost = cost_from_points(x, cfg.at("seed").get<std::uint64_t>());
    const std::string method = cfg.at("method");
    AffinityRun r = compute_affinity(method, cost, cfg);

    write_matrix(cfg, "affinity.csv", r.P.P, "affinity");
    if (!r.dual_names.empty()) write_matrix(cfg, "duals.csv", r.duals, "duals", r.dual_names);
    Json diag = affinity_diagnostics(r, cfg.at("perplexity").get<double>());
    write_json(out_path(cfg, "diagnostics.json"), diag);
    return {{"method", method}, {"max_entropy_gap", diag["max_entropy_gap"]},
            {"max_row_residual", diag["max_row_residual"]}};
}

// ---------------------------------------------------------------- embed

Json cmd_embed(const Json& cfg) {
    const Matrix x = load_points(cfg);
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const CostMatrix cost = cost_from_points(x, seed);
    const double xi = cfg.at("perplexity").get<double>();

    EmbedConfig ec;
    ec.dim = cfg.at("dim").get<std::size_t>();
    ec.lr = cfg.at("lr").get<double>();
    ec.rel_tol = cfg.at("rel_tol").get<double>();
    ec.stop_patience = cfg.at("stop_patience").get<std::size_t>();
    ec.sinkhorn_tol = cfg.at("sinkhorn_tol").get<double>();
    ec.warm_start = cfg.at("warm_start").get<bool>();
    ec.max_iter = cfg.at("max_iter").get<std::size_t>();
    ec.seed = seed;

    const std::string algo = cfg.at("algo");
    Embedding e;
    if (algo == "snekhorn" || algo == "tsnekhorn") {
        ec.kernel = algo == "snekhorn" ? LatentKernel::gaussian : LatentKernel::student;
        e = embed(cost, xi, ec);
    } else if (algo == "sne" || algo == "tsne") {
        ec.kernel = algo == "sne" ? LatentKernel::gaussian : LatentKernel::student;
        e = embed_baseline_sne(cost, xi, ec);
    } else if (algo == "snekhorn-globalq") {
        ec.kernel = LatentKernel::gaussian;
        e = embed_doubly_stochastic_mismatch_demo(cost, xi, ec);
    } else {
        throw InvalidArgument("unknown algo '" + algo +
                              "' (snekhorn, tsnekhorn, sne, tsne, snekhorn-globalq)");
    }

    write_matrix(cfg, "embedding.csv", e.Z, "embedding");
    write_matrix(cfg, "loss_trace.csv", column(e.loss_trace), "loss_trace", {"kl"});
    Json m = {{"algo", algo},
              {"iterations", e.iterations},
              {"converged", e.converged},
              {"final_kl", e.loss_trace.empty() ? 0.0 : e.loss_trace.back()},
              {"circularity", circularity(e.Z)}};
    for (const auto& [k, v] : e.diagnostics) m[k] = v;
    if (!e.sinkhorn_iters_trace.empty()) {
        std::vector<double> it(e.sinkhorn_iters_trace.begin(), e.sinkhorn_iters_trace.end());
        write_matrix(cfg, "sinkhorn_iters.csv", column(it), "sinkhorn_iters", {"iterations"});
        m["sinkhorn_iters_median"] = median(it);
        m["sinkhorn_iters_total"] = std::accumulate(it.begin(), it.end(), 0.0);
    }

    const std::string labels_path = cfg.at("labels");
    if (!labels_path.empty()) {
        const std::vector<int> labels = load_labels(labels_path, x.rows());
        std::size_t k = cfg.at("k").get<std::size_t>();
        if (k == 0) k = distinct_count(labels);
        const KMeansResult km = kmeans(e.Z, k, seed);
        m["kmeans_k"] = k;
        m["kmeans_ari"] = adjusted_rand_index(labels, km.labels);
        m["silhouette"] = silhouette_score(e.Z, labels);
        io::write_labels_csv(out_path(cfg, "kmeans_labels.csv"), km.labels);
    }
    const auto nn = cfg.at("n_neighbors").get<std::size_t>();
    if (nn > 0 && 2 * nn < x.rows()) m["trustworthiness"] = trustworthiness(x, e.Z, nn);

    write_json(out_path(cfg, "metrics.json"), m);
    return {{"algo", algo}, {"iterations", e.iterations}};
}

// ---------------------------------------------------------------- eval

Json cmd_eval(const Json& cfg) {
    const std::string metric = cfg.at("metric");
    const std::string labels_path = cfg.at("labels");
    const std::string input = cfg.at("input");
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    Json m = {{"metric", metric}};

    auto need = [](const std::string& v, const char* flag) {
        if (v.empty()) throw InvalidArgument(std::string(flag) + " is required for this metric");
    };

    if (metric == "ari") {
        need(labels_path, "--labels");
        std::vector<int> truth = io::read_labels_csv(labels_path);
        const std::string pred_path = cfg.at("pred");
        std::vector<int> pred;
        if (!pred_path.empty()) {
            pred = load_labels(pred_path, truth.size());
        } else {
            need(input, "--input or --pred");
            const Matrix z = io::read_matrix_csv(input);
            if (z.rows() != truth.size()) throw InvalidArgument("--labels and --input lengths differ");
            std::size_t k = cfg.at("k").get<std::size_t>();
            if (k == 0) k = distinct_count(truth);
            pred = kmeans(z, k, seed).labels;
            m["kmeans_k"] = k;
            io::write_labels_csv(out_path(cfg, "kmeans_labels.csv"), pred);
        }
        m["value"] = adjusted_rand_index(truth, pred);
    } else if (metric == "silhouette") {
        need(input, "--input");
        need(labels_path, "--labels");
        const Matrix z = io::read_matrix_csv(input);
        m["value"] = silhouette_score(z, load_labels(labels_path, z.rows()));
    } else if (metric == "trustworthiness") {
        need(input, "--input");
        const std::string ref = cfg.at("reference");
        need(ref, "--reference");
        const auto nn = cfg.at("n_neighbors").get<std::size_t>();
        m["n_neighbors"] = nn;
        m["value"] = trustworthiness(io::read_matrix_csv(ref), io::read_matrix_csv(input), nn);
    } else if (metric == "spectrum") {
        need(input, "--input");
        const Matrix p = io::read_matrix_csv(input);
        std::size_t k = cfg.at("k").get<std::size_t>();
        if (k == 0) k = std::min<std::size_t>(10, p.rows());
        const std::vector<double> ev = laplacian_spectrum(p, k);
        write_matrix(cfg, "spectrum.csv", column(ev), "spectrum", {"eigenvalue"});
        m["eigenvalues"] = ev;
        m["below_1e-3"] = std::count_if(ev.begin(), ev.end(), [](double v) { return v < 1e-3; });
    } else {
        throw InvalidArgument("unknown metric '" + metric +
                              "' (ari, silhouette, trustworthiness, spectrum)");
    }
    write_json(out_path(cfg, "metrics.json"), m);
    return m;
}

// ---------------------------------------------------------------- bench

namespace {

// rs-sym has a bandwidth rather than a perplexity; grid value v maps to
// v / 100 times the mean off-diagonal cost.
Affinity bench_affinity(const std::string& method, const CostMatrix& cost, double v) {
    if (method == "rs-sym")
        return symmetrize_l2(row_stochastic_gaussian(cost, v / 100.0 * cost.mean_offdiagonal()));
    if (method == "ds") return calibrate_nu(cost, v).solution.P;
    if (method == "ea-sym") return symmetrize_l2(solve_ea(cost, v).P);
    if (method == "sea") return solve_sea_dual_ascent(cost, v).P;
    throw InvalidArgument("unknown bench method '" + method + "' (rs-sym, ds, ea-sym, sea)");
}

struct Cell {
    std::string method;
    double value = 0.0;
    std::vector<double> scores;
    std::string error;
};

} // namespace

Json cmd_bench(const Json& cfg) {
    const Matrix x = load_points(cfg);
    const auto seed = cfg.at("seed").get<std::uint64_t>();
    const CostMatrix cost = cost_from_points(x, seed);
    const std::string labels_path = cfg.at("labels");
    if (labels_path.empty()) throw InvalidArgument("--labels is required for bench");
    const std::vector<int> labels = load_labels(labels_path, x.rows());
    std::size_t k = cfg.at("k").get<std::size_t>();
    if (k == 0) k = distinct_count(labels);
    const auto seeds = cfg.at("seeds").get<std::size_t>();
    if (seeds == 0) throw InvalidArgument("seeds must be >= 1");

    const auto methods = cfg.at("methods").get<std::vector<std::string>>();
    for (const auto& mname : methods)
        if (mname != "rs-sym" && mname != "ds" && mname != "ea-sym" && mname != "sea")
            throw InvalidArgument("unknown bench method '" + mname + "' (rs-sym, ds, ea-sym, sea)");
    std::vector<double> grid = cfg.at("perplexities").get<std::vector<double>>();
    if (grid.empty()) grid = default_perplexity_grid(x.rows());
    if (grid.empty()) throw InvalidArgument("perplexity grid is empty (n too small)");

    std::vector<Cell> cells;
    for (const auto& mname : methods)
        for (double v : grid) cells.push_back({mname, v, {}, {}});

    parallel_for(cells.size(), [&](std::size_t c) {
        Cell& cell = cells[c];
        try {
            const Affinity p = bench_affinity(cell.method, cost, cell.value);
            for (std::size_t s = 0; s < seeds; ++s)
                cell.scores.push_back(
                    adjusted_rand_index(labels, spectral_clustering(p.P, k, seed + s)));
        } catch (const Error& e) {
            cell.error = e.what();
            cell.scores.clear();
        }
        log(Level::debug, cell.method + " @ " + io::format_double(cell.value) +
                              (cell.error.empty() ? " ok" : " failed: " + cell.error));
    });

    std::string table = "method,value,mean,std,n_ok,error\n";
    Json best = Json::object();
    Json failures = Json::array();
    for (const Cell& cell : cells) {
        std::string err = cell.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        table += cell.method + "," + io::format_double(cell.value) + ",";
        if (cell.error.empty()) {
            const double mu = mean(cell.scores), sd = stddev(cell.scores);
            table += io::format_double(mu) + "," + io::format_double(sd) + "," +
                     std::to_string(cell.scores.size()) + ",\n";
            if (!best.contains(cell.method) || mu > best[cell.method]["mean"].get<double>())
                best[cell.method] = {{"value", cell.value}, {"mean", mu}, {"std", sd}};
        } else {
            table += ",,0," + err + "\n";
            failures.push_back({{"method", cell.method}, {"value", cell.value}, {"error", cell.error}});
        }
    }
    io::write_file_atomic(out_path(cfg, "results.csv"), table);
    Json summary = {{"metric", "spectral_ari"}, {"k", k},       {"seeds", seeds},
                    {"grid", grid},             {"best", best}, {"failures", failures}};
    write_json(out_path(cfg, "best.json"), summary);
    return {{"cells", cells.size()}, {"failures", failures.size()}};
}

} // namespace snekhorn::app::detail
