#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Shared numeric building blocks: dense vectors, point sets, and a small
// row-major matrix. Everything is double precision and exception-based.

namespace feddp {

using Vec = std::vector<double>;
using Points = std::vector<Vec>;

// Ordered set of k cluster centers.
using CenterSet = std::vector<Vec>;

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double norm(const Vec& v) { return std::sqrt(squared_norm(v)); }

inline double squared_distance(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(const Vec& a, const Vec& b) { return std::sqrt(squared_distance(a, b)); }

inline void add_in_place(Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add_in_place: dimension mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline void scale_in_place(Vec& a, double c) {
    for (double& x : a) x *= c;
}

inline bool all_finite(const Vec& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline std::size_t dimension_of(const Points& pts) {
    return pts.empty() ? 0 : pts.front().size();
}

inline void check_uniform_dimension(const Points& pts, const std::string& where) {
    const std::size_t d = dimension_of(pts);
    for (const Vec& p : pts) {
        if (p.size() != d) throw std::invalid_argument(where + ": inconsistent point dimension");
    }
}

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix transposed() const {
        Matrix t(cols, rows);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double x : data) s += x * x;
        return std::sqrt(s);
    }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

inline Vec matvec(const Matrix& m, const Vec& v) {
    if (m.cols != v.size()) throw std::invalid_argument("matvec: shape mismatch");
    Vec out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

}  // namespace feddp
