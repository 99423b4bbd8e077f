#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace invlab {

struct NotSpdError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

// Dense row-major matrix. All entries are expected to stay finite;
// reductions and factorizations assume 64-bit floats throughout.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    std::size_t size() const { return a.size(); }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

Matrix matmul(const Matrix& A, const Matrix& B);     // A * B
Matrix matmul_nt(const Matrix& A, const Matrix& B);  // A * B^T
Matrix matmul_tn(const Matrix& A, const Matrix& B);  // A^T * B
Matrix transpose(const Matrix& A);

Vector matvec(const Matrix& A, const Vector& x);
Vector matvec_t(const Matrix& A, const Vector& x);  // A^T * x

double dot(const Vector& x, const Vector& y);
double norm2(const Vector& x);
Vector vadd(const Vector& x, const Vector& y);
Vector vsub(const Vector& x, const Vector& y);
Vector vscale(const Vector& x, double c);

// Cholesky factorization A = L L^T of a symmetric positive definite matrix.
// Symmetry is checked to 1e-10 relative. On a nonpositive pivot the plain
// policy throws NotSpdError; retry_once adds 1e-10*trace(A)/n to the diagonal
// and factors again before giving up.
enum class Jitter { none, retry_once };

Matrix cholesky(const Matrix& A, Jitter jitter = Jitter::none);

Vector chol_solve(const Matrix& L, const Vector& b);
Matrix chol_solve_mat(const Matrix& L, const Matrix& B);

Vector solve_spd(const Matrix& A, const Vector& b, Jitter jitter = Jitter::none);
Matrix spd_inverse(const Matrix& A, Jitter jitter = Jitter::none);

}  // namespace invlab
