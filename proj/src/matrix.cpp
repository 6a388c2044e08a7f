#include "snekhorn/matrix.hpp"

#include "snekhorn/error.hpp"

#include <algorithm>
#include <cmath>

namespace snekhorn {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw InvalidArgument("ragged matrix literal");
        std::copy(row.begin(), row.end(), m.row(i++).begin());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InvalidArgument("max_abs_diff: shape mismatch");
    double m = 0.0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t k = 0; k < va.size(); ++k) m = std::max(m, std::abs(va[k] - vb[k]));
    return m;
}

std::vector<double> row_sums(const Matrix& m) {
    std::vector<double> s(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (double v : m.row(i)) s[i] += v;
    return s;
}

double frobenius_dot(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InvalidArgument("frobenius_dot: shape mismatch");
    double s = 0.0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t k = 0; k < va.size(); ++k) s += va[k] * vb[k];
    return s;
}

} // namespace snekhorn
