#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sla {

// Dense row-major matrix of doubles. The only tensor type in the library;
// kernels that need vectors use 1xN or Nx1 matrices or spans into rows.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Matrix zeros(std::size_t rows, std::size_t cols);
    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool is_finite() const;

    Matrix transposed() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Row-wise softmax with max-subtraction. `temperature` divides the logits
// before exponentiation. Throws std::invalid_argument on temperature <= 0 or
// non-finite temperature, std::domain_error on non-finite input.
Matrix softmax_rows(const Matrix& m, double temperature = 1.0);

// Shannon entropy -sum p ln p in nats, with 0 ln 0 taken as 0. Input must be
// a probability vector: entries >= 0 (std::domain_error otherwise) and summing
// to 1 within 1e-9 (std::domain_error otherwise).
double entropy(std::span<const double> p);
double entropy(const std::vector<double>& p);

}  // namespace sla
