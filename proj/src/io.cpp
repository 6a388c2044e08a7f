#include "snekhorn/io.hpp"

#include "snekhorn/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace snekhorn::io {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

template <class T>
T parse_field(std::string_view field, const fs::path& path, std::size_t line) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    T v{};
    auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || end != field.data() + field.size() || field.empty()) {
        std::ostringstream msg;
        msg << path.string() << ":" << line << ": cannot parse '" << field << "'";
        throw InvalidArgument(msg.str());
    }
    return v;
}

} // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into " + path.string());
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc()) throw Error("format_double failed");
    return {buf, end};
}

Matrix read_matrix_csv(const fs::path& path) {
    const std::string text = read_file(path);
    std::vector<double> values;
    std::size_t rows = 0, cols = 0, line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        std::size_t count = 0;
        while (true) {
            const std::size_t comma = line.find(',');
            values.push_back(parse_field<double>(line.substr(0, comma), path, line_no));
            ++count;
            if (comma == std::string_view::npos) break;
            line.remove_prefix(comma + 1);
        }
        if (rows == 0) cols = count;
        else if (count != cols) {
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": expected " << cols << " fields, got "
                << count;
            throw InvalidArgument(msg.str());
        }
        ++rows;
    }
    if (rows == 0) throw InvalidArgument(path.string() + ": empty matrix file");
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.values().begin());
    return m;
}

std::string format_matrix_csv(const Matrix& m) {
    std::string out;
    out.reserve(m.rows() * m.cols() * 24);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
    write_file_atomic(path, format_matrix_csv(m));
}

std::vector<int> read_labels_csv(const fs::path& path) {
    const std::string text = read_file(path);
    std::vector<int> labels;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view t = trim(line);
        if (t.empty()) continue;
        labels.push_back(parse_field<int>(t, path, line_no));
    }
    if (labels.empty()) throw InvalidArgument(path.string() + ": empty label file");
    return labels;
}

void write_labels_csv(const fs::path& path, std::span<const int> labels) {
    std::string out;
    for (int v : labels) {
        out += std::to_string(v);
        out += '\n';
    }
    write_file_atomic(path, out);
}

} // namespace snekhorn::io
