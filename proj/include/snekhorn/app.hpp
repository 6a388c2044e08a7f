#pragma once

// Command layer behind the snekhorn-kit executable. A run is fully described
// by a JSON object (the echo written to config.json), so rerunning a saved
// config reproduces its outputs.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace snekhorn::app {

using Json = nlohmann::json;

enum ExitCode : int { ok = 0, internal = 1, usage = 2, not_converged = 3, io_failure = 4 };

// Defaults for every key of cfg["command"]; keys already present are kept.
// Throws InvalidArgument on an unknown command or key.
Json complete_config(Json cfg);

// Runs a config, writing every output under cfg["output_dir"] plus
// config.json. Library errors are mapped to exit codes, reported on stderr
// and, when possible, in output_dir/error.json.
int run(const Json& cfg);

// Perplexity grid used by bench: multiples of 10 in [10, min(n, 300)] that
// are also <= n - 1.
std::vector<double> default_perplexity_grid(std::size_t n);

} // namespace snekhorn::app
