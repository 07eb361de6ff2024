#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ddsrec {

/// Dense row-major matrix of doubles. Plain value type; the autodiff tape
/// stores one of these per node for values and another for gradients.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix row_vector(std::span<const double> values);
    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    void fill(double v);
    bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

// Accumulating kernels: out += a*b, out += a*b^T, out += a^T*b.
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out, double alpha = 1.0);
void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& out, double alpha = 1.0);
void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& out, double alpha = 1.0);

}  // namespace ddsrec
