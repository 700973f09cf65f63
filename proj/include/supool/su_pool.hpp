#pragma once

#include "supool/complex_linalg.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace supool {

/// Generalised Gell-Mann basis of su(d), normalised Tr(G_j G_k) = 2 delta_jk.
///
/// Order: symmetric S_jk = E_jk + E_kj for j < k (lexicographic), then
/// antisymmetric A_jk = -i (E_jk - E_kj) in the same order, then the d - 1
/// diagonal D_l = sqrt(2 / (l (l + 1))) (sum_{m<l} E_mm - l E_ll).
/// For d = 2 this is (sigma_x, sigma_y, sigma_z); for d = 3 it is the
/// Gell-Mann set in the order (l1, l4, l6, l2, l5, l7, l3, l8).
struct GeneratorBasis {
    int d = 0;
    std::vector<ComplexMatrix> generators;

    std::size_t size() const noexcept { return generators.size(); }
};

GeneratorBasis generator_basis(int d);

/// Indices of the off-diagonal generators that do not touch row/column 0.
/// Each of them annihilates the reference state |0>.
std::vector<std::size_t> stabilizer_generator_indices(const GeneratorBasis& basis);

/// Indices of the d - 1 diagonal generators.
std::vector<std::size_t> diagonal_generator_indices(const GeneratorBasis& basis);

/// H(x) = sum_k x_k G_k.
ComplexMatrix assemble_hamiltonian(std::span<const double> x, const GeneratorBasis& basis);

/// Everything pool_backward needs for one sample.
struct PoolCache {
    std::vector<double> x;
    ComplexMatrix h;
    EigenDecomposition eig;
    ComplexMatrix u;
    std::vector<Complex> psi; // U e_0
};

struct PoolForward {
    std::vector<double> phi; // [Re psi_0, Im psi_0, Re psi_1, Im psi_1, ...]
    PoolCache cache;
};

class StaleCacheError : public LinalgError {
public:
    using LinalgError::LinalgError;
};

/// x -> H(x) -> U = exp(iH) -> psi = U|0> -> interleaved real/imaginary parts.
PoolForward pool_forward(std::span<const double> x, const GeneratorBasis& basis);

/// dL/dx from dL/dphi. Throws StaleCacheError when the cached x no longer
/// reproduces the cached H (x mutated, or a different basis).
std::vector<double> pool_backward(const PoolCache& cache, std::span<const double> upstream,
                                  const GeneratorBasis& basis);

/// 2d x (d^2 - 1) Jacobian of phi, column k = dphi/dx_k.
RealMatrix jacobian(std::span<const double> x, const GeneratorBasis& basis);
RealMatrix jacobian(const PoolCache& cache, const GeneratorBasis& basis);

/// Number of singular values above tol * sigma_max.
int numerical_rank(const RealMatrix& j, double tol);

} // namespace supool
