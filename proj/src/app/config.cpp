#include "internal.hpp"

#include "snekhorn/error.hpp"

#include <algorithm>

namespace snekhorn::app {

namespace {

Json common_defaults() {
    return {{"output_dir", "out"}, {"seed", 0}, {"threads", nullptr}, {"log_level", "warn"}};
}

Json command_defaults(const std::string& command) {
    if (command == "gen")
        return {{"generator", "three-gaussians"},
                {"n_per", 30},
                {"stds", {0.25, 0.5, 1.0}},
                {"dims", 10000},
                {"counts", {500, 250, 250}},
                {"trials", {1000, 1000, 10000}}};
    if (command == "affinity")
        return {{"input", ""},         {"method", "sea"},     {"perplexity", 30.0},
                {"bandwidth", nullptr}, {"tol", nullptr},      {"max_iter", nullptr},
                {"exclude_self", false}, {"optimizer", "adam"}, {"lr", 0.1},
                {"pca", 0}};
    if (command == "embed")
        return {{"input", ""},        {"labels", ""},       {"algo", "tsnekhorn"},
                {"dim", 2},           {"perplexity", 30.0}, {"lr", 0.1},
                {"rel_tol", 1e-5},    {"stop_patience", 1}, {"sinkhorn_tol", 1e-5},
                {"warm_start", true}, {"max_iter", 10000},   {"pca", 0},
                {"k", 0},             {"n_neighbors", 5}};
    if (command == "eval")
        return {{"metric", "ari"}, {"input", ""}, {"labels", ""},     {"pred", ""},
                {"reference", ""}, {"k", 0},      {"n_neighbors", 5}};
    if (command == "bench")
        return {{"input", ""},
                {"labels", ""},
                {"methods", {"rs-sym", "ds", "ea-sym", "sea"}},
                {"perplexities", Json::array()},
                {"seeds", 5},
                {"pca", 0},
                {"k", 0}};
    throw InvalidArgument("unknown command '" + command + "'");
}

} // namespace

Json complete_config(Json cfg) {
    if (!cfg.is_object() || !cfg.contains("command") || !cfg["command"].is_string())
        throw InvalidArgument("config needs a string \"command\"");
    const std::string command = cfg["command"];
    Json full = common_defaults();
    full.update(command_defaults(command));
    for (auto& [key, value] : cfg.items()) {
        if (key != "command" && !full.contains(key))
            throw InvalidArgument("unknown config key '" + key + "' for " + command);
    }
    full.update(cfg);
    return full;
}

std::vector<double> default_perplexity_grid(std::size_t n) {
    std::vector<double> grid;
    const std::size_t hi = std::min<std::size_t>(n, 300);
    for (std::size_t v = 10; v <= hi; v += 10)
        if (v + 1 <= n) grid.push_back(static_cast<double>(v));
    return grid;
}

} // namespace snekhorn::app
