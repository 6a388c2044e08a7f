// snekhorn-kit: command-line front end over snekhorn::app.

#include "snekhorn/app.hpp"
#include "snekhorn/error.hpp"
#include "snekhorn/io.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace {

using snekhorn::app::Json;

// Options are copied into the config only when given on the command line, so
// complete_config supplies the rest and --config files are not clobbered.
struct Bindings {
    std::vector<std::function<void(Json&)>> setters;

    template <class T>
    CLI::Option* add(CLI::App& app, const std::string& flag, const std::string& key,
                     const std::string& help) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app.add_option(flag, *value, help);
        setters.push_back([opt, value, key](Json& j) {
            if (opt->count() > 0) j[key] = *value;
        });
        return opt;
    }

    void flag(CLI::App& app, const std::string& flag, const std::string& key, bool when_set,
              const std::string& help) {
        CLI::Option* opt = app.add_flag(flag, help);
        setters.push_back([opt, key, when_set](Json& j) {
            if (opt->count() > 0) j[key] = when_set;
        });
    }

    void apply(Json& j) const {
        for (const auto& s : setters) s(j);
    }
};

void add_common(CLI::App& sub, Bindings& b, bool with_input) {
    if (with_input) {
        b.add<std::string>(sub, "--input", "input", "input matrix CSV");
        b.add<std::string>(sub, "--labels", "labels", "labels CSV, one integer per line");
    }
    b.add<std::string>(sub, "--output-dir,-o", "output_dir", "directory for all outputs");
    b.add<std::uint64_t>(sub, "--seed", "seed", "random seed");
    b.add<long>(sub, "--threads", "threads", "worker threads (overrides SNEKHORN_THREADS)");
    b.add<std::string>(sub, "--log-level", "log_level", "error | warn | info | debug");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Symmetric entropic affinities, SNEkhorn embeddings and benchmarks"};
    app.require_subcommand(0, 1);

    std::string config_path;
    app.add_option("--config", config_path, "rerun a saved config.json");
    Bindings top;
    top.add<std::string>(app, "--output-dir,-o", "output_dir", "output directory override");
    top.add<long>(app, "--threads", "threads", "worker threads");
    top.add<std::string>(app, "--log-level", "log_level", "error | warn | info | debug");

    std::map<std::string, Bindings> subs;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    {
        Bindings& b = subs["gen"];
        b.add<std::string>(*gen, "generator", "generator", "three-gaussians | multinomial");
        b.add<std::size_t>(*gen, "--n-per", "n_per", "points per Gaussian");
        b.add<std::vector<double>>(*gen, "--stds", "stds", "three standard deviations")
            ->delimiter(',');
        b.add<std::size_t>(*gen, "--dims", "dims", "multinomial dimension");
        b.add<std::vector<std::size_t>>(*gen, "--counts", "counts", "samples per group (3)")
            ->delimiter(',');
        b.add<std::vector<std::size_t>>(*gen, "--trials", "trials", "multinomial trials per group (3)")
            ->delimiter(',');
        add_common(*gen, b, false);
    }

    auto* aff = app.add_subcommand("affinity", "compute an affinity matrix");
    {
        Bindings& b = subs["affinity"];
        b.add<std::string>(*aff, "--method", "method", "ea | ea-sym | rs | rs-sym | ds | sea | sea-dykstra");
        b.add<double>(*aff, "--perplexity", "perplexity", "target perplexity");
        b.add<double>(*aff, "--bandwidth", "bandwidth", "fixed bandwidth (rs, rs-sym, ds)");
        b.add<double>(*aff, "--tol", "tol", "solver tolerance");
        b.add<std::size_t>(*aff, "--max-iter", "max_iter", "solver iteration cap");
        b.flag(*aff, "--exclude-self", "exclude_self", true, "P_ii = 0 (ea, ea-sym)");
        b.add<std::string>(*aff, "--optimizer", "optimizer", "adam | lbfgs (sea)");
        b.add<double>(*aff, "--lr", "lr", "dual ascent learning rate (sea)");
        b.add<std::size_t>(*aff, "--pca", "pca", "PCA dimension applied first (0 = off)");
        add_common(*aff, b, true);
    }

    auto* emb = app.add_subcommand("embed", "compute a low-dimensional embedding");
    {
        Bindings& b = subs["embed"];
        b.add<std::string>(*emb, "--algo", "algo", "snekhorn | tsnekhorn | sne | tsne | snekhorn-globalq");
        b.add<std::size_t>(*emb, "--dim", "dim", "embedding dimension");
        b.add<double>(*emb, "--perplexity", "perplexity", "target perplexity");
        b.add<double>(*emb, "--lr", "lr", "ADAM learning rate");
        b.add<double>(*emb, "--rel-tol", "rel_tol", "relative KL change that stops the descent");
        b.add<std::size_t>(*emb, "--stop-patience", "stop_patience", "consecutive calm steps before stopping");
        b.add<double>(*emb, "--sinkhorn-tol", "sinkhorn_tol", "inner Sinkhorn tolerance");
        b.flag(*emb, "--no-warm-start", "warm_start", false, "cold-start every inner Sinkhorn");
        b.add<std::size_t>(*emb, "--max-iter", "max_iter", "descent iteration cap");
        b.add<std::size_t>(*emb, "--pca", "pca", "PCA dimension applied first (0 = off)");
        b.add<std::size_t>(*emb, "--k", "k", "k-means clusters (0 = number of labels)");
        b.add<std::size_t>(*emb, "--n-neighbors", "n_neighbors", "trustworthiness neighbors (0 = skip)");
        add_common(*emb, b, true);
    }

    auto* ev = app.add_subcommand("eval", "score an embedding, labeling or affinity");
    {
        Bindings& b = subs["eval"];
        b.add<std::string>(*ev, "--metric", "metric", "ari | silhouette | trustworthiness | spectrum");
        b.add<std::string>(*ev, "--pred", "pred", "predicted labels (ari)");
        b.add<std::string>(*ev, "--reference", "reference", "input-space points (trustworthiness)");
        b.add<std::size_t>(*ev, "--k", "k", "clusters (ari) or eigenvalues (spectrum)");
        b.add<std::size_t>(*ev, "--n-neighbors", "n_neighbors", "trustworthiness neighbors");
        add_common(*ev, b, true);
    }

    auto* bench = app.add_subcommand("bench", "spectral clustering grid over affinities");
    {
        Bindings& b = subs["bench"];
        b.add<std::vector<std::string>>(*bench, "--methods", "methods", "rs-sym,ds,ea-sym,sea")
            ->delimiter(',');
        b.add<std::vector<double>>(*bench, "--perplexities", "perplexities", "grid override")
            ->delimiter(',');
        b.add<std::size_t>(*bench, "--seeds", "seeds", "k-means seeds per cell");
        b.add<std::size_t>(*bench, "--k", "k", "clusters (0 = number of labels)");
        b.add<std::size_t>(*bench, "--pca", "pca", "PCA dimension applied first (0 = off)");
        add_common(*bench, b, true);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : snekhorn::app::usage;
    }

    Json cfg = Json::object();
    if (!config_path.empty()) {
        try {
            cfg = Json::parse(snekhorn::io::read_file(config_path));
        } catch (const snekhorn::IoError& e) {
            std::cerr << "[error] " << e.what() << '\n';
            return snekhorn::app::io_failure;
        } catch (const Json::exception& e) {
            std::cerr << "[error] " << config_path << ": " << e.what() << '\n';
            return snekhorn::app::usage;
        }
    }

    const auto chosen = app.get_subcommands();
    if (!chosen.empty()) {
        const std::string name = chosen.front()->get_name();
        if (cfg.contains("command") && cfg["command"] != name) {
            std::cerr << "[error] --config holds a '" << cfg["command"].get<std::string>()
                      << "' run, not '" << name << "'\n";
            return snekhorn::app::usage;
        }
        cfg["command"] = name;
        subs[name].apply(cfg);
    } else if (config_path.empty()) {
        std::cerr << app.help();
        return snekhorn::app::usage;
    }
    top.apply(cfg);
    return snekhorn::app::run(cfg);
}
