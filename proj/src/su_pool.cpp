#include "supool/su_pool.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace supool {

namespace {

void require_input_length(std::span<const double> x, const GeneratorBasis& basis, const char* what) {
    if (x.size() != basis.size()) {
        throw LinalgError(std::string(what) + ": expected " + std::to_string(basis.size()) +
                          " coordinates, got " + std::to_string(x.size()));
    }
}

std::size_t off_diagonal_pairs(int d) { return static_cast<std::size_t>(d) * (d - 1) / 2; }

// Column k of the Jacobian: d psi / d x_k = dU_k e_0, split into real and imaginary parts.
std::vector<Complex> psi_derivative(const PoolCache& cache, const ComplexMatrix& generator) {
    return dexpm_i_hermitian(cache.eig, generator).column(0);
}

} // namespace

GeneratorBasis generator_basis(int d) {
    if (d < 2 || d > 16) throw LinalgError("generator_basis: d must lie in [2, 16], got " + std::to_string(d));
    const auto n = static_cast<std::size_t>(d);

    GeneratorBasis basis;
    basis.d = d;
    basis.generators.reserve(n * n - 1);

    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j + 1; k < n; ++k) {
            ComplexMatrix s(n, n);
            s(j, k) = 1.0;
            s(k, j) = 1.0;
            basis.generators.push_back(std::move(s));
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j + 1; k < n; ++k) {
            ComplexMatrix a(n, n);
            a(j, k) = Complex{0.0, -1.0};
            a(k, j) = Complex{0.0, 1.0};
            basis.generators.push_back(std::move(a));
        }
    }
    for (std::size_t l = 1; l < n; ++l) {
        const double scale = std::sqrt(2.0 / static_cast<double>(l * (l + 1)));
        ComplexMatrix diag(n, n);
        for (std::size_t m = 0; m < l; ++m) diag(m, m) = scale;
        diag(l, l) = -scale * static_cast<double>(l);
        basis.generators.push_back(std::move(diag));
    }
    return basis;
}

std::vector<std::size_t> stabilizer_generator_indices(const GeneratorBasis& basis) {
    const auto n = static_cast<std::size_t>(basis.d);
    const std::size_t pairs = off_diagonal_pairs(basis.d);
    std::vector<std::size_t> out;
    std::size_t idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j + 1; k < n; ++k, ++idx) {
            if (j != 0) {
                out.push_back(idx);
                out.push_back(idx + pairs);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> diagonal_generator_indices(const GeneratorBasis& basis) {
    std::vector<std::size_t> out;
    for (std::size_t k = 2 * off_diagonal_pairs(basis.d); k < basis.size(); ++k) out.push_back(k);
    return out;
}

ComplexMatrix assemble_hamiltonian(std::span<const double> x, const GeneratorBasis& basis) {
    require_input_length(x, basis, "assemble_hamiltonian");
    const auto n = static_cast<std::size_t>(basis.d);
    ComplexMatrix h(n, n);
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] == 0.0) continue;
        const auto& g = basis.generators[k].data();
        auto out = h.data();
        for (std::size_t e = 0; e < out.size(); ++e) out[e] += x[k] * g[e];
    }
    return h;
}

PoolForward pool_forward(std::span<const double> x, const GeneratorBasis& basis) {
    require_input_length(x, basis, "pool_forward");
    for (double v : x) {
        if (!std::isfinite(v)) throw LinalgError("pool_forward: non-finite input coordinate");
    }
    PoolForward result;
    PoolCache& cache = result.cache;
    cache.x.assign(x.begin(), x.end());
    cache.h = assemble_hamiltonian(x, basis);
    cache.eig = hermitian_eig(cache.h);
    cache.u = expm_i_hermitian(cache.eig);
    cache.psi = cache.u.column(0);

    result.phi.resize(2 * cache.psi.size());
    for (std::size_t j = 0; j < cache.psi.size(); ++j) {
        result.phi[2 * j] = cache.psi[j].real();
        result.phi[2 * j + 1] = cache.psi[j].imag();
    }
    return result;
}

std::vector<double> pool_backward(const PoolCache& cache, std::span<const double> upstream,
                                  const GeneratorBasis& basis) {
    const auto n = static_cast<std::size_t>(basis.d);
    if (upstream.size() != 2 * n) {
        throw LinalgError("pool_backward: expected upstream of length " + std::to_string(2 * n) + ", got " +
                          std::to_string(upstream.size()));
    }
    if (cache.x.size() != basis.size() || cache.h.rows() != n) {
        throw StaleCacheError("pool_backward: cache does not belong to this basis");
    }
    if (assemble_hamiltonian(cache.x, basis) != cache.h) {
        throw StaleCacheError("pool_backward: cached input no longer matches cached generator");
    }

    std::vector<double> grad(basis.size(), 0.0);
    if (std::all_of(upstream.begin(), upstream.end(), [](double u) { return u == 0.0; })) return grad;

    for (std::size_t k = 0; k < basis.size(); ++k) {
        const std::vector<Complex> dpsi = psi_derivative(cache, basis.generators[k]);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += upstream[2 * j] * dpsi[j].real() + upstream[2 * j + 1] * dpsi[j].imag();
        }
        grad[k] = acc;
    }
    return grad;
}

RealMatrix jacobian(const PoolCache& cache, const GeneratorBasis& basis) {
    const auto n = static_cast<std::size_t>(basis.d);
    RealMatrix jac(2 * n, basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const std::vector<Complex> dpsi = psi_derivative(cache, basis.generators[k]);
        for (std::size_t j = 0; j < n; ++j) {
            jac(2 * j, k) = dpsi[j].real();
            jac(2 * j + 1, k) = dpsi[j].imag();
        }
    }
    return jac;
}

RealMatrix jacobian(std::span<const double> x, const GeneratorBasis& basis) {
    require_input_length(x, basis, "jacobian");
    return jacobian(pool_forward(x, basis).cache, basis);
}

int numerical_rank(const RealMatrix& j, double tol) {
    if (!(tol > 0.0)) throw LinalgError("numerical_rank: tolerance must be positive");
    const std::vector<double> sigma = singular_values(j);
    const double cutoff = tol * std::max(sigma.front(), 1e-300);
    return static_cast<int>(std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cutoff; }));
}

} // namespace supool
