#include "invlab/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace invlab {

namespace {

using ERowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<ERowMat>;
using CMap = Eigen::Map<const ERowMat>;

CMap cmap(const Matrix& m) {
    return CMap(m.a.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
}

Map map(Matrix& m) {
    return Map(m.a.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
}

void require(bool ok, const char* msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace

Matrix matmul(const Matrix& A, const Matrix& B) {
    require(A.cols == B.rows, "matmul: inner dimensions differ");
    Matrix C(A.rows, B.cols);
    map(C).noalias() = cmap(A) * cmap(B);
    return C;
}

Matrix matmul_nt(const Matrix& A, const Matrix& B) {
    require(A.cols == B.cols, "matmul_nt: inner dimensions differ");
    Matrix C(A.rows, B.rows);
    map(C).noalias() = cmap(A) * cmap(B).transpose();
    return C;
}

Matrix matmul_tn(const Matrix& A, const Matrix& B) {
    require(A.rows == B.rows, "matmul_tn: inner dimensions differ");
    Matrix C(A.cols, B.cols);
    map(C).noalias() = cmap(A).transpose() * cmap(B);
    return C;
}

Matrix transpose(const Matrix& A) {
    Matrix T(A.cols, A.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
    return T;
}

Vector matvec(const Matrix& A, const Vector& x) {
    require(A.cols == x.size(), "matvec: dimension mismatch");
    Vector y(A.rows, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
        double s = 0.0;
        const double* row = &A.a[i * A.cols];
        for (std::size_t j = 0; j < A.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vector matvec_t(const Matrix& A, const Vector& x) {
    require(A.rows == x.size(), "matvec_t: dimension mismatch");
    Vector y(A.cols, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
        const double* row = &A.a[i * A.cols];
        const double xi = x[i];
        for (std::size_t j = 0; j < A.cols; ++j) y[j] += row[j] * xi;
    }
    return y;
}

double dot(const Vector& x, const Vector& y) {
    require(x.size() == y.size(), "dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(const Vector& x) { return std::sqrt(dot(x, x)); }

Vector vadd(const Vector& x, const Vector& y) {
    require(x.size() == y.size(), "vadd: dimension mismatch");
    Vector z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + y[i];
    return z;
}

Vector vsub(const Vector& x, const Vector& y) {
    require(x.size() == y.size(), "vsub: dimension mismatch");
    Vector z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] - y[i];
    return z;
}

Vector vscale(const Vector& x, double c) {
    Vector z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = c * x[i];
    return z;
}

namespace {

// Plain lower-triangular Cholesky; returns false on a nonpositive pivot.
bool try_cholesky(const Matrix& A, Matrix& L) {
    const std::size_t n = A.rows;
    L = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = A(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        L(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = A(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / ljj;
        }
    }
    return true;
}

}  // namespace

Matrix cholesky(const Matrix& A, Jitter jitter) {
    require(A.rows == A.cols, "cholesky: matrix not square");
    const std::size_t n = A.rows;
    double amax = 0.0;
    for (double v : A.a) amax = std::max(amax, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(A(i, j) - A(j, i)) > 1e-10 * std::max(amax, 1e-300))
                throw NotSpdError("cholesky: matrix not symmetric to 1e-10 relative");

    Matrix L;
    if (try_cholesky(A, L)) return L;
    if (jitter == Jitter::retry_once) {
        double tr = 0.0;
        for (std::size_t i = 0; i < n; ++i) tr += A(i, i);
        Matrix Aj = A;
        const double eps = 1e-10 * tr / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) Aj(i, i) += eps;
        if (try_cholesky(Aj, L)) return L;
    }
    throw NotSpdError("cholesky: nonpositive pivot");
}

Vector chol_solve(const Matrix& L, const Vector& b) {
    const std::size_t n = L.rows;
    require(b.size() == n, "chol_solve: dimension mismatch");
    Vector y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
        y[i] = s / L(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
        x[ii] = s / L(ii, ii);
    }
    return x;
}

Matrix chol_solve_mat(const Matrix& L, const Matrix& B) {
    require(B.rows == L.rows, "chol_solve_mat: dimension mismatch");
    Matrix X(B.rows, B.cols);
    Vector col(B.rows);
    for (std::size_t j = 0; j < B.cols; ++j) {
        for (std::size_t i = 0; i < B.rows; ++i) col[i] = B(i, j);
        Vector x = chol_solve(L, col);
        for (std::size_t i = 0; i < B.rows; ++i) X(i, j) = x[i];
    }
    return X;
}

Vector solve_spd(const Matrix& A, const Vector& b, Jitter jitter) {
    return chol_solve(cholesky(A, jitter), b);
}

Matrix spd_inverse(const Matrix& A, Jitter jitter) {
    return chol_solve_mat(cholesky(A, jitter), Matrix::identity(A.rows));
}

}  // namespace invlab
