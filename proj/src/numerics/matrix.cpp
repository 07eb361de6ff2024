#include "ddsrec/numerics/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "ddsrec/errors.hpp"

namespace ddsrec {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                         std::to_string(rows_ * cols_));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer for Matrix");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out, double alpha) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    const double* pa = a.flat().data();
    const double* pb = b.flat().data();
    double* po = out.flat().data();
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = po + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = alpha * pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
}

void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& out, double alpha) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    const double* pa = a.flat().data();
    const double* pb = b.flat().data();
    double* po = out.flat().data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = pa + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = pb + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            po[i * m + j] += alpha * s;
        }
    }
}

void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& out, double alpha) {
    // a: k x n, b: k x m, out: n x m
    const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
    const double* pa = a.flat().data();
    const double* pb = b.flat().data();
    double* po = out.flat().data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = pa + p * n;
        const double* brow = pb + p * m;
        for (std::size_t i = 0; i < n; ++i) {
            const double av = alpha * arow[i];
            if (av == 0.0) continue;
            double* orow = po + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace ddsrec
