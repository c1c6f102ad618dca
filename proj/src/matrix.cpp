#include "sla/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sla {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 0.0); }

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw std::invalid_argument("from_rows: ragged row lengths");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool Matrix::is_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (!same_shape(other)) throw std::invalid_argument("matrix +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (!same_shape(other)) throw std::invalid_argument("matrix -=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions disagree");
    Matrix out(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, std::abs(v));
    return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        best = std::max(best, std::abs(a.data()[i] - b.data()[i]));
    return best;
}

Matrix softmax_rows(const Matrix& m, double temperature) {
    if (!std::isfinite(temperature) || temperature <= 0.0)
        throw std::invalid_argument("softmax_rows: temperature must be finite and positive");
    if (!m.is_finite()) throw std::domain_error("softmax_rows: non-finite input");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m.cols(); ++j) mx = std::max(mx, m(i, j) / temperature);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double e = std::exp(m(i, j) / temperature - mx);
            out(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) /= sum;
    }
    return out;
}

double entropy(std::span<const double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (std::isnan(v) || v < 0.0) throw std::domain_error("entropy: entries must be >= 0");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::domain_error("entropy: input does not sum to 1 within 1e-9");
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

double entropy(const std::vector<double>& p) { return entropy(std::span<const double>(p)); }

}  // namespace sla
