#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "feddp/core.hpp"

// Rank-k subspace extraction: outer products, a cyclic Jacobi symmetric
// eigensolver, and orthogonal projectors stored both as the full d x d
// matrix and as the d x k eigenvector basis.

namespace feddp {

// Sum of p p^T over the given points.
inline Matrix outer_product(const Points& points) {
    check_uniform_dimension(points, "outer_product");
    const std::size_t d = dimension_of(points);
    Matrix m(d, d);
    for (const Vec& p : points) {
        for (std::size_t i = 0; i < d; ++i) {
            const double pi = p[i];
            if (pi == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) m(i, j) += pi * p[j];
        }
    }
    return m;
}

struct EigenDecomposition {
    Vec values;      // diagonal after rotation, in solver order
    Matrix vectors;  // column i is the eigenvector of values[i]
};

// Cyclic Jacobi rotations for a symmetric matrix. Converges quadratically;
// sweeps stop once the off-diagonal mass drops below tol * ||A||_F.
inline EigenDecomposition jacobi_eigen_symmetric(Matrix a, int max_sweeps = 64,
                                                 double tol = 1e-14) {
    if (a.rows != a.cols) throw std::invalid_argument("jacobi_eigen_symmetric: matrix not square");
    const std::size_t n = a.rows;
    Matrix v = Matrix::identity(n);
    const double norm_f = a.frobenius_norm();
    const double stop = tol * std::max(norm_f, 1e-300);

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * a(p, q) * a(p, q);
        if (std::sqrt(off) <= stop) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                const double app = a(p, p), aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i == p || i == q) continue;
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(p, i) = a(i, p);
                    a(i, q) = s * aip + c * aiq;
                    a(q, i) = a(i, q);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    EigenDecomposition out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    out.vectors = std::move(v);
    return out;
}

// Rank-k orthogonal projector. `matrix` is the full d x d projector and
// `basis` holds the k retained unit eigenvectors as columns; the two
// representations agree and `apply` uses the cheaper basis route.
struct ProjectionMatrix {
    Matrix matrix;
    Matrix basis;  // d x k
    std::size_t rank = 0;

    std::size_t dim() const { return matrix.rows; }

    // Pi p computed as V (V^T p).
    Vec apply(const Vec& p) const {
        if (p.size() != basis.rows) throw std::invalid_argument("ProjectionMatrix: dimension mismatch");
        Vec coeff(rank, 0.0);
        for (std::size_t j = 0; j < rank; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < basis.rows; ++i) s += basis(i, j) * p[i];
            coeff[j] = s;
        }
        Vec out(basis.rows, 0.0);
        for (std::size_t j = 0; j < rank; ++j) {
            const double cj = coeff[j];
            for (std::size_t i = 0; i < basis.rows; ++i) out[i] += basis(i, j) * cj;
        }
        return out;
    }

    static ProjectionMatrix identity(std::size_t d) {
        ProjectionMatrix pi;
        pi.matrix = Matrix::identity(d);
        pi.basis = Matrix::identity(d);
        pi.rank = d;
        return pi;
    }
};

// Projector onto the span of the k eigenvectors with the largest
// eigenvalues. The input is symmetrized as (m + m^T)/2 first; eigenvalues
// sort descending with ties broken by ascending solver index, so negative
// eigenvalues of noisy matrices simply sort below the positive ones.
inline ProjectionMatrix top_k_projector(const Matrix& m, std::size_t k) {
    if (m.rows != m.cols) throw std::invalid_argument("top_k_projector: matrix not square");
    const std::size_t d = m.rows;
    if (k < 1 || k > d) throw std::invalid_argument("top_k_projector: need 1 <= k <= d");

    Matrix sym(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) sym(i, j) = 0.5 * (m(i, j) + m(j, i));

    EigenDecomposition eig = jacobi_eigen_symmetric(std::move(sym));
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return eig.values[a] > eig.values[b];
    });

    ProjectionMatrix pi;
    pi.rank = k;
    pi.basis = Matrix(d, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < d; ++i) pi.basis(i, j) = eig.vectors(i, order[j]);
    pi.matrix = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < k; ++r) s += pi.basis(i, r) * pi.basis(j, r);
            pi.matrix(i, j) = s;
        }
    return pi;
}

inline Points project(const ProjectionMatrix& pi, const Points& points) {
    Points out;
    out.reserve(points.size());
    for (const Vec& p : points) out.push_back(pi.apply(p));
    return out;
}

}  // namespace feddp
