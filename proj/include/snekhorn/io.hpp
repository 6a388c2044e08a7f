#pragma once

#include "snekhorn/matrix.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace snekhorn::io {

// Headerless CSV, row-major, LF line endings, 17 significant digits so a
// write/read round trip is exact. Blank lines are skipped; a trailing CR is
// tolerated. Errors: IoError when the file cannot be opened, InvalidArgument
// on a malformed or ragged file.
Matrix read_matrix_csv(const std::filesystem::path& path);
std::string format_matrix_csv(const Matrix& m);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

// One integer per line.
std::vector<int> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, std::span<const int> labels);

// printf("%.17g")-equivalent text; parses back to the same double.
std::string format_double(double v);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

} // namespace snekhorn::io
