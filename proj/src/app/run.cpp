#include "internal.hpp"

#include "snekhorn/error.hpp"
#include "snekhorn/eval.hpp"
#include "snekhorn/io.hpp"
#include "snekhorn/parallel.hpp"

#include <atomic>
#include <iostream>
#include <set>

namespace snekhorn::app {

namespace detail {

namespace {
std::atomic<int> g_level{static_cast<int>(Level::warn)};
}

void set_log_level(std::string_view name) {
    if (name == "error") g_level = static_cast<int>(Level::error);
    else if (name == "warn") g_level = static_cast<int>(Level::warn);
    else if (name == "info") g_level = static_cast<int>(Level::info);
    else if (name == "debug") g_level = static_cast<int>(Level::debug);
    else throw InvalidArgument("unknown log level '" + std::string(name) + "'");
}

void log(Level level, const std::string& msg) {
    static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
    if (static_cast<int>(level) <= g_level)
        std::cerr << "[" << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

std::filesystem::path out_path(const Json& cfg, std::string_view name) {
    return std::filesystem::path(cfg.at("output_dir").get<std::string>()) / std::string(name);
}

void write_json(const std::filesystem::path& path, const Json& j) {
    io::write_file_atomic(path, j.dump(2) + "\n");
    log(Level::info, "wrote " + path.string());
}

void write_matrix(const Json& cfg, std::string_view name, const Matrix& m, std::string_view kind,
                  const std::vector<std::string>& columns) {
    const auto path = out_path(cfg, name);
    io::write_matrix_csv(path, m);
    Json meta = {{"rows", m.rows()}, {"cols", m.cols()}, {"kind", kind}};
    if (!columns.empty()) meta["columns"] = columns;
    auto meta_path = path;
    meta_path += ".meta.json";
    io::write_file_atomic(meta_path, meta.dump(2) + "\n");
    log(Level::info, "wrote " + path.string());
}

Matrix load_points(const Json& cfg) {
    const std::string input = cfg.at("input");
    if (input.empty()) throw InvalidArgument("--input is required");
    Matrix x = io::read_matrix_csv(input);
    const auto d = cfg.at("pca").get<std::size_t>();
    if (d > 0 && d < x.cols()) {
        log(Level::info, "pca to " + std::to_string(d) + " dimensions");
        x = pca_reduce(x, d);
    }
    return x;
}

std::vector<int> load_labels(const std::string& path, std::size_t expected) {
    std::vector<int> labels = io::read_labels_csv(path);
    if (labels.size() != expected)
        throw InvalidArgument(path + ": " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(expected) + " rows");
    return labels;
}

CostMatrix cost_from_points(const Matrix& x, std::uint64_t seed) {
    try {
        return pairwise_sq_euclidean(x);
    } catch (const InvalidArgument& e) {
        log(Level::warn, std::string(e.what()) + "; retrying with a 1e-8 relative jitter");
    }
    return pairwise_sq_euclidean(x, seed);
}

std::size_t distinct_count(const std::vector<int>& labels) {
    return std::set<int>(labels.begin(), labels.end()).size();
}

} // namespace detail

namespace {

int report(const Json& cfg, const char* kind, int code, const std::string& message,
           const std::vector<double>* trace = nullptr) {
    detail::log(detail::Level::error, message);
    Json err = {{"error", kind}, {"message", message}, {"exit_code", code}};
    if (trace) err["residual_trace"] = *trace;
    if (cfg.is_object() && cfg.contains("output_dir")) {
        try {
            detail::write_json(detail::out_path(cfg, "error.json"), err);
        } catch (const std::exception&) {
            // the error is already on stderr
        }
    }
    return code;
}

} // namespace

int run(const Json& raw) {
    Json cfg = raw;
    try {
        cfg = complete_config(raw);
        detail::set_log_level(cfg.at("log_level").get<std::string>());
        if (!cfg.at("threads").is_null()) {
            const auto t = cfg.at("threads").get<long>();
            if (t < 1) throw InvalidArgument("threads must be >= 1");
            set_num_threads(static_cast<std::size_t>(t));
        }
        detail::write_json(detail::out_path(cfg, "config.json"), cfg);

        const std::string command = cfg.at("command");
        Json summary;
        if (command == "gen") summary = detail::cmd_gen(cfg);
        else if (command == "affinity") summary = detail::cmd_affinity(cfg);
        else if (command == "embed") summary = detail::cmd_embed(cfg);
        else if (command == "eval") summary = detail::cmd_eval(cfg);
        else summary = detail::cmd_bench(cfg);
        detail::log(detail::Level::info, command + " done: " + summary.dump());
        return ok;
    } catch (const InvalidArgument& e) {
        return report(cfg, "InvalidArgument", usage, e.what());
    } catch (const Json::exception& e) {
        return report(cfg, "InvalidArgument", usage, std::string("bad config value: ") + e.what());
    } catch (const NotConverged& e) {
        return report(cfg, "NotConverged", not_converged, e.what(), &e.trace());
    } catch (const IoError& e) {
        return report(cfg, "IoError", io_failure, e.what());
    } catch (const Error& e) {
        return report(cfg, "Error", not_converged, e.what());
    } catch (const std::exception& e) {
        return report(cfg, "Internal", internal, e.what());
    }
}

} // namespace snekhorn::app
