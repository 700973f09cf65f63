#include "supool/complex_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace supool {

namespace {

void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw LinalgError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
    }
}

double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

double off_diagonal_norm(const ComplexMatrix& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (i != j) acc += std::norm(a(i, j));
        }
    }
    return std::sqrt(acc);
}

// Unitary W acting on the (p, q) plane that zeroes a(p, q) under W^dagger a W.
struct PlaneRotation {
    double c;
    double s;
    Complex phase; // exp(-i arg a(p, q))
};

PlaneRotation jacobi_rotation(const ComplexMatrix& a, std::size_t p, std::size_t q) {
    const Complex z = a(p, q);
    const double r = std::abs(z);
    const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * r);
    const double t = sign_of(theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    return {c, t * c, std::conj(z) / r};
}

// m <- m W on columns p, q.
void rotate_columns(ComplexMatrix& m, std::size_t p, std::size_t q, const PlaneRotation& w) {
    for (std::size_t k = 0; k < m.rows(); ++k) {
        const Complex mp = m(k, p);
        const Complex mq = m(k, q);
        m(k, p) = w.c * mp - w.s * w.phase * mq;
        m(k, q) = w.s * mp + w.c * w.phase * mq;
    }
}

// m <- W^dagger m on rows p, q.
void rotate_rows(ComplexMatrix& m, std::size_t p, std::size_t q, const PlaneRotation& w) {
    const Complex phase_conj = std::conj(w.phase);
    for (std::size_t k = 0; k < m.cols(); ++k) {
        const Complex mp = m(p, k);
        const Complex mq = m(q, k);
        m(p, k) = w.c * mp - w.s * phase_conj * mq;
        m(q, k) = w.s * mp + w.c * phase_conj * mq;
    }
}

// e^{i mu} sin(delta)/delta with mu, delta the half-sum and half-difference.
Complex exp_divided_difference(double la, double lb, double degeneracy) {
    if (std::abs(la - lb) < degeneracy) {
        return std::polar(1.0, la);
    }
    const double mu = 0.5 * (la + lb);
    const double delta = 0.5 * (la - lb);
    return std::polar(std::sin(delta) / delta, mu);
}

} // namespace

// ---------------------------------------------------------------------------
// ComplexMatrix

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) throw LinalgError("ComplexMatrix: ragged initializer");
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const Complex> entries) {
    ComplexMatrix m(entries.size(), entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
    return m;
}

std::vector<Complex> ComplexMatrix::column(std::size_t j) const {
    std::vector<Complex> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    }
    return out;
}

Complex ComplexMatrix::trace() const {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) acc += (*this)(i, i);
    return acc;
}

double ComplexMatrix::frobenius_norm() const {
    double acc = 0.0;
    for (const auto& z : data_) acc += std::norm(z);
    return std::sqrt(acc);
}

bool ComplexMatrix::is_hermitian(double tol) const {
    if (!is_square()) return false;
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = i; j < cols_; ++j) {
            if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
        }
    }
    return true;
}

bool ComplexMatrix::is_unitary(double tol) const {
    if (!is_square()) return false;
    return frobenius_distance(adjoint() * *this, identity(rows_)) <= tol;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(Complex scalar) {
    for (auto& z : data_) z *= scalar;
    return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(ComplexMatrix a, Complex scalar) { return a *= scalar; }
ComplexMatrix operator*(Complex scalar, ComplexMatrix a) { return a *= scalar; }

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw LinalgError("matrix product: inner dimension mismatch");
    ComplexMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const Complex aik = a(i, k);
            if (aik == Complex{}) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
        }
    }
    return out;
}

std::vector<Complex> operator*(const ComplexMatrix& a, std::span<const Complex> v) {
    if (a.cols() != v.size()) throw LinalgError("matrix-vector product: dimension mismatch");
    std::vector<Complex> out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        Complex acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    require_same_shape(a, b, "frobenius_distance");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) acc += std::norm(a.data()[k] - b.data()[k]);
    return std::sqrt(acc);
}

Complex determinant(const ComplexMatrix& m) {
    if (!m.is_square()) throw LinalgError("determinant: matrix is not square");
    ComplexMatrix lu = m;
    const std::size_t n = m.rows();
    Complex det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(lu(r, col)) > std::abs(lu(pivot, col))) pivot = r;
        }
        if (lu(pivot, col) == Complex{}) return 0.0;
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(lu(pivot, k), lu(col, k));
            det = -det;
        }
        det *= lu(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const Complex factor = lu(r, col) / lu(col, col);
            for (std::size_t k = col; k < n; ++k) lu(r, k) -= factor * lu(col, k);
        }
    }
    return det;
}

// ---------------------------------------------------------------------------
// RealMatrix

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

RealMatrix::RealMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) throw LinalgError("RealMatrix: ragged initializer");
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

RealMatrix RealMatrix::identity(std::size_t n) {
    RealMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::vector<double> RealMatrix::column(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

RealMatrix RealMatrix::transpose() const {
    RealMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    }
    return out;
}

double RealMatrix::frobenius_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Eigen-decomposition and matrix functions

double EigenDecomposition::frobenius_norm() const {
    double acc = 0.0;
    for (double l : eigenvalues) acc += l * l;
    return std::sqrt(acc);
}

EigenDecomposition hermitian_eig(const ComplexMatrix& h, double tol) {
    if (!h.is_square()) throw LinalgError("hermitian_eig: matrix is not square");
    if (h.rows() == 0) throw LinalgError("hermitian_eig: empty matrix");
    if (h.rows() > 64) throw LinalgError("hermitian_eig: dimension exceeds 64");
    if (!h.is_hermitian(kHermitianInputTol)) throw LinalgError("hermitian_eig: matrix is not Hermitian");

    const std::size_t n = h.rows();
    ComplexMatrix a = h;
    // Symmetrise away sub-tolerance asymmetry so the iteration stays Hermitian.
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = a(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const Complex avg = 0.5 * (a(i, j) + std::conj(a(j, i)));
            a(i, j) = avg;
            a(j, i) = std::conj(avg);
        }
    }
    ComplexMatrix v = ComplexMatrix::identity(n);

    const double h_norm = h.frobenius_norm();
    const double threshold = kJacobiOffDiagonalTol * h_norm;
    bool converged = false;
    for (int sweep = 0; sweep <= kJacobiMaxSweeps; ++sweep) {
        if (off_diagonal_norm(a) <= threshold) {
            converged = true;
            break;
        }
        if (sweep == kJacobiMaxSweeps) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) == 0.0) continue;
                const PlaneRotation w = jacobi_rotation(a, p, q);
                rotate_columns(a, p, q, w);
                rotate_rows(a, p, q, w);
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                rotate_columns(v, p, q, w);
            }
        }
    }
    if (!converged) {
        throw LinalgError("hermitian_eig: Jacobi iteration did not converge in " +
                          std::to_string(kJacobiMaxSweeps) + " sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

    EigenDecomposition eig;
    eig.eigenvalues.resize(n);
    eig.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        eig.eigenvalues[k] = a(order[k], order[k]).real();
        for (std::size_t i = 0; i < n; ++i) eig.eigenvectors(i, k) = v(i, order[k]);
    }

    double residual = 0.0;
    const ComplexMatrix hv = h * eig.eigenvectors;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            residual += std::norm(hv(i, k) - eig.eigenvectors(i, k) * eig.eigenvalues[k]);
        }
    }
    residual = std::sqrt(residual);
    if (residual > tol * std::max(1.0, h_norm)) {
        throw LinalgError("hermitian_eig: reconstruction residual " + std::to_string(residual) +
                          " exceeds tolerance");
    }
    return eig;
}

ComplexMatrix expm_i_hermitian(const EigenDecomposition& eig) {
    const ComplexMatrix& v = eig.eigenvectors;
    const std::size_t n = v.rows();
    std::vector<Complex> phases(n);
    for (std::size_t k = 0; k < n; ++k) phases[k] = std::polar(1.0, eig.eigenvalues[k]);

    ComplexMatrix u(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Complex acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += v(i, k) * phases[k] * std::conj(v(j, k));
            u(i, j) = acc;
        }
    }
    return u;
}

ComplexMatrix expm_i_hermitian(const ComplexMatrix& h) { return expm_i_hermitian(hermitian_eig(h)); }

ComplexMatrix dexpm_i_hermitian(const EigenDecomposition& eig, const ComplexMatrix& e) {
    const ComplexMatrix& v = eig.eigenvectors;
    const std::size_t n = v.rows();
    if (e.rows() != n || e.cols() != n) throw LinalgError("dexpm_i_hermitian: dimension mismatch");
    if (!e.is_hermitian(kHermitianInputTol)) throw LinalgError("dexpm_i_hermitian: direction is not Hermitian");

    const double degeneracy = kDegeneracyTol * std::max(1.0, eig.frobenius_norm());
    const ComplexMatrix v_adj = v.adjoint();
    ComplexMatrix k = v_adj * e * v;
    const Complex i_unit{0.0, 1.0};
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            k(a, b) *= i_unit * exp_divided_difference(eig.eigenvalues[a], eig.eigenvalues[b], degeneracy);
        }
    }
    return v * k * v_adj;
}

ComplexMatrix dexpm_i_hermitian(const ComplexMatrix& h, const ComplexMatrix& e) {
    require_same_shape(h, e, "dexpm_i_hermitian");
    return dexpm_i_hermitian(hermitian_eig(h), e);
}

// ---------------------------------------------------------------------------
// Singular values

std::vector<double> singular_values(const RealMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw LinalgError("singular_values: empty matrix");
    if (m.rows() > 64 || m.cols() > 64) throw LinalgError("singular_values: dimension exceeds 64");

    // Orthogonalise the columns of whichever orientation has fewer of them.
    const RealMatrix work_src = m.cols() > m.rows() ? m.transpose() : m;
    const std::size_t rows = work_src.rows();
    const std::size_t cols = work_src.cols();
    std::vector<std::vector<double>> columns(cols);
    for (std::size_t j = 0; j < cols; ++j) columns[j] = work_src.column(j);

    constexpr double kOrthTol = 1e-15;
    constexpr int kMaxSweeps = 100;
    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t i = 0; i + 1 < cols; ++i) {
            for (std::size_t j = i + 1; j < cols; ++j) {
                auto& ci = columns[i];
                auto& cj = columns[j];
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t r = 0; r < rows; ++r) {
                    alpha += ci[r] * ci[r];
                    beta += cj[r] * cj[r];
                    gamma += ci[r] * cj[r];
                }
                if (gamma == 0.0 || std::abs(gamma) <= kOrthTol * std::sqrt(alpha * beta)) continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = sign_of(zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double xi = ci[r];
                    const double xj = cj[r];
                    ci[r] = c * xi - s * xj;
                    cj[r] = s * xi + c * xj;
                }
            }
        }
    }
    if (!converged) throw LinalgError("singular_values: one-sided Jacobi did not converge");

    std::vector<double> sigma(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (double x : columns[j]) acc += x * x;
        sigma[j] = std::sqrt(acc);
    }
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    return sigma;
}

} // namespace supool
