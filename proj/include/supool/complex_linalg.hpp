#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace supool {

using Complex = std::complex<double>;

/// Raised for shape mismatches, non-Hermitian input and convergence failures.
class LinalgError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major complex matrix. Intended for small sizes (d up to ~64).
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols);
    ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows);

    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix diagonal(std::span<const Complex> entries);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }

    Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const Complex& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const Complex> data() const noexcept { return data_; }
    std::span<Complex> data() noexcept { return data_; }

    std::vector<Complex> column(std::size_t j) const;

    ComplexMatrix adjoint() const;
    Complex trace() const;
    double frobenius_norm() const;

    /// max |M[i][j] - conj(M[j][i])| <= tol
    bool is_hermitian(double tol) const;
    /// ||M^dagger M - I||_F <= tol
    bool is_unitary(double tol) const;

    ComplexMatrix& operator+=(const ComplexMatrix& other);
    ComplexMatrix& operator-=(const ComplexMatrix& other);
    ComplexMatrix& operator*=(Complex scalar);

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Complex> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(ComplexMatrix a, Complex scalar);
ComplexMatrix operator*(Complex scalar, ComplexMatrix a);
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
std::vector<Complex> operator*(const ComplexMatrix& a, std::span<const Complex> v);

/// Frobenius norm of a - b.
double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b);

/// Determinant by LU with partial pivoting.
Complex determinant(const ComplexMatrix& m);

/// Dense row-major real matrix, used for Jacobians and rank measurement.
class RealMatrix {
public:
    RealMatrix() = default;
    RealMatrix(std::size_t rows, std::size_t cols);
    RealMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static RealMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    std::vector<double> column(std::size_t j) const;
    RealMatrix transpose() const;
    double frobenius_norm() const;

    friend bool operator==(const RealMatrix&, const RealMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Eigenvalues ascending; column k of `eigenvectors` pairs with eigenvalue k.
struct EigenDecomposition {
    std::vector<double> eigenvalues;
    ComplexMatrix eigenvectors;

    /// ||H||_F recovered from the spectrum.
    double frobenius_norm() const;
};

inline constexpr double kHermitianInputTol = 1e-10;
inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kJacobiOffDiagonalTol = 1e-14;
inline constexpr double kDegeneracyTol = 1e-9;

/// Cyclic complex Jacobi diagonalisation of a Hermitian matrix.
///
/// Terminates when the off-diagonal Frobenius mass drops below
/// 1e-14 * ||H||_F, or throws after 100 sweeps. The reconstruction residual
/// ||H V - V diag(lambda)||_F is checked against tol * max(1, ||H||_F).
EigenDecomposition hermitian_eig(const ComplexMatrix& h, double tol = 1e-10);

/// exp(iH) = V diag(exp(i lambda)) V^dagger for Hermitian H.
ComplexMatrix expm_i_hermitian(const ComplexMatrix& h);
ComplexMatrix expm_i_hermitian(const EigenDecomposition& eig);

/// Directional derivative d/dt exp(i(H + tE)) at t = 0 (Daleckii-Krein).
///
/// With H = V Lambda V^dagger and E~ = V^dagger E V the result is
/// V K V^dagger, K[a][b] = i E~[a][b] phi(lambda_a, lambda_b), where phi is
/// the divided difference of exp(i.) divided by i. Pairs closer than
/// 1e-9 * max(1, ||H||_F) take the diagonal limit exp(i lambda).
ComplexMatrix dexpm_i_hermitian(const ComplexMatrix& h, const ComplexMatrix& e);
ComplexMatrix dexpm_i_hermitian(const EigenDecomposition& eig, const ComplexMatrix& e);

/// Singular values in descending order (one-sided Jacobi).
std::vector<double> singular_values(const RealMatrix& m);

} // namespace supool
