#pragma once

#include "snekhorn/app.hpp"
#include "snekhorn/core_math.hpp"
#include "snekhorn/matrix.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace snekhorn::app::detail {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };
void set_log_level(std::string_view name);
void log(Level level, const std::string& msg);

std::filesystem::path out_path(const Json& cfg, std::string_view name);
void write_json(const std::filesystem::path& path, const Json& j);
// Matrix CSV plus a <name>.meta.json sidecar with shape and kind.
void write_matrix(const Json& cfg, std::string_view name, const Matrix& m, std::string_view kind,
                  const std::vector<std::string>& columns = {});

// Points from cfg["input"], reduced to cfg["pca"] dimensions when that is
// positive and below the column count.
Matrix load_points(const Json& cfg);
std::vector<int> load_labels(const std::string& path, std::size_t expected);
CostMatrix cost_from_points(const Matrix& x, std::uint64_t seed);
std::size_t distinct_count(const std::vector<int>& labels);

Json cmd_gen(const Json& cfg);
Json cmd_affinity(const Json& cfg);
Json cmd_embed(const Json& cfg);
Json cmd_eval(const Json& cfg);
Json cmd_bench(const Json& cfg);

} // namespace snekhorn::app::detail
