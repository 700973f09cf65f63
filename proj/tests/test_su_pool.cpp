#include "supool/su_pool.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace supool;

namespace {

const Complex kI{0.0, 1.0};

std::vector<double> random_x(std::mt19937_64& rng, std::size_t n, double scale = 1.5) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> x(n);
    for (double& v : x) v = dist(rng);
    return x;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> fd_gradient(const std::vector<double>& x, std::span<const double> up, const GeneratorBasis& basis,
                                double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        auto xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (dot(up, pool_forward(xp, basis).phi) - dot(up, pool_forward(xm, basis).phi)) / (2.0 * h);
    }
    return g;
}

double rel_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(diff) / std::max(norm(a), norm(b));
}

// Basis indices of the standard Gell-Mann l6 and l7 in our ordering.
constexpr std::size_t kLambda6 = 2;
constexpr std::size_t kLambda7 = 5;

} // namespace

TEST(GeneratorBasis, D2IsPauli) {
    const auto b = generator_basis(2);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b.generators[0], (ComplexMatrix{{0.0, 1.0}, {1.0, 0.0}}));
    EXPECT_EQ(b.generators[1], (ComplexMatrix{{0.0, -kI}, {kI, 0.0}}));
    EXPECT_EQ(b.generators[2], (ComplexMatrix{{1.0, 0.0}, {0.0, -1.0}}));
}

TEST(GeneratorBasis, D3MatchesGellMann) {
    const auto b = generator_basis(3);
    ASSERT_EQ(b.size(), 8u);
    const ComplexMatrix l6{{0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}, {0.0, 1.0, 0.0}};
    const ComplexMatrix l7{{0.0, 0.0, 0.0}, {0.0, 0.0, -kI}, {0.0, kI, 0.0}};
    EXPECT_EQ(b.generators[kLambda6], l6);
    EXPECT_EQ(b.generators[kLambda7], l7);
    const ComplexMatrix& l8 = b.generators[7];
    EXPECT_NEAR(l8(0, 0).real(), 1.0 / std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(l8(2, 2).real(), -2.0 / std::sqrt(3.0), 1e-15);
}

TEST(GeneratorBasis, InvariantsForAllSupportedDims) {
    for (int d = 2; d <= 8; ++d) {
        const auto b = generator_basis(d);
        ASSERT_EQ(b.size(), static_cast<std::size_t>(d * d - 1));
        for (std::size_t j = 0; j < b.size(); ++j) {
            EXPECT_TRUE(b.generators[j].is_hermitian(1e-14));
            EXPECT_LE(std::abs(b.generators[j].trace()), 1e-14);
            for (std::size_t k = 0; k < b.size(); ++k) {
                const Complex tr = (b.generators[j] * b.generators[k]).trace();
                EXPECT_LE(std::abs(tr - Complex(j == k ? 2.0 : 0.0, 0.0)), 1e-12) << "d=" << d;
            }
        }
    }
    EXPECT_EQ(generator_basis(5).size(), 24u);
}

TEST(GeneratorBasis, RejectsOutOfRangeD) {
    EXPECT_THROW(generator_basis(1), LinalgError);
    EXPECT_THROW(generator_basis(17), LinalgError);
}

TEST(GeneratorBasis, StabilizerAndDiagonalIndices) {
    const auto b = generator_basis(3);
    EXPECT_EQ(stabilizer_generator_indices(b), (std::vector<std::size_t>{kLambda6, kLambda7}));
    EXPECT_EQ(diagonal_generator_indices(b), (std::vector<std::size_t>{6, 7}));
    EXPECT_TRUE(stabilizer_generator_indices(generator_basis(2)).empty());
    EXPECT_EQ(stabilizer_generator_indices(generator_basis(4)).size(), 6u);
}

TEST(AssembleHamiltonian, ZeroAndSingleGenerator) {
    const auto b2 = generator_basis(2);
    EXPECT_EQ(assemble_hamiltonian(std::vector<double>{0.0, 0.0, 0.0}, b2), ComplexMatrix(2, 2));
    const double theta = 0.37;
    EXPECT_EQ(assemble_hamiltonian(std::vector<double>{0.0, 0.0, theta}, b2),
              (ComplexMatrix{{theta, 0.0}, {0.0, -theta}}));
    EXPECT_THROW(assemble_hamiltonian(std::vector<double>{1.0}, b2), LinalgError);
}

TEST(AssembleHamiltonian, ProjectionRecoversCoordinates) {
    const auto b = generator_basis(3);
    std::mt19937_64 rng(1);
    const auto x = random_x(rng, 8);
    const ComplexMatrix h = assemble_hamiltonian(x, b);
    for (std::size_t k = 0; k < 8; ++k) {
        EXPECT_NEAR((h * b.generators[k]).trace().real() / 2.0, x[k], 1e-12);
    }
}

TEST(PoolForward, OriginIsReferenceState) {
    const auto f = pool_forward(std::vector<double>(8, 0.0), generator_basis(3));
    const std::vector<double> expected{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    ASSERT_EQ(f.phi.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(f.phi[i], expected[i], 1e-15);
}

TEST(PoolForward, HalfPiSigmaXFlipsState) {
    const auto f = pool_forward(std::vector<double>{std::numbers::pi / 2, 0.0, 0.0}, generator_basis(2));
    const std::vector<double> expected{0.0, 0.0, 0.0, 1.0};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(f.phi[i], expected[i], 1e-15);
    EXPECT_LE(frobenius_distance(f.cache.u, ComplexMatrix{{0.0, kI}, {kI, 0.0}}), 1e-15);
}

TEST(PoolForward, UnitNormAndUnitaryOverRandomInputs) {
    std::mt19937_64 rng(2);
    for (int d = 2; d <= 6; ++d) {
        const auto b = generator_basis(d);
        for (int t = 0; t < 50; ++t) {
            const auto f = pool_forward(random_x(rng, b.size(), 3.0), b);
            EXPECT_NEAR(norm(f.phi), 1.0, 1e-10);
            EXPECT_TRUE(f.cache.u.is_unitary(1e-12));
            EXPECT_LE(std::abs(determinant(f.cache.u) - Complex(1.0, 0.0)), 1e-10);
        }
    }
}

TEST(PoolForward, RejectsNonFiniteAndWrongLength) {
    const auto b = generator_basis(3);
    std::vector<double> x(8, 0.0);
    x[3] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(pool_forward(x, b), LinalgError);
    EXPECT_THROW(pool_forward(std::vector<double>(7, 0.0), b), LinalgError);
}

TEST(PoolBackward, ZeroUpstreamGivesZeroGradient) {
    const auto b = generator_basis(3);
    std::mt19937_64 rng(3);
    const auto f = pool_forward(random_x(rng, 8), b);
    for (double g : pool_backward(f.cache, std::vector<double>(6, 0.0), b)) EXPECT_EQ(g, 0.0);
}

TEST(PoolBackward, StabilizerGradientsVanishAtOrigin) {
    const auto b = generator_basis(3);
    std::mt19937_64 rng(4);
    const auto f = pool_forward(std::vector<double>(8, 0.0), b);
    for (int t = 0; t < 10; ++t) {
        const auto g = pool_backward(f.cache, random_x(rng, 6), b);
        EXPECT_EQ(g[kLambda6], 0.0);
        EXPECT_EQ(g[kLambda7], 0.0);
    }
}

TEST(PoolBackward, MatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    for (int d = 2; d <= 5; ++d) {
        const auto b = generator_basis(d);
        for (int t = 0; t < 200; ++t) {
            const auto x = random_x(rng, b.size());
            const auto up = random_x(rng, static_cast<std::size_t>(2 * d), 1.0);
            const auto g = pool_backward(pool_forward(x, b).cache, up, b);
            EXPECT_LE(rel_error(g, fd_gradient(x, up, b)), 1e-6) << "d=" << d << " trial " << t;
        }
    }
}

TEST(PoolBackward, DetectsStaleCache) {
    const auto b = generator_basis(3);
    std::mt19937_64 rng(6);
    auto f = pool_forward(random_x(rng, 8), b);
    f.cache.x[0] += 0.25;
    EXPECT_THROW(pool_backward(f.cache, std::vector<double>(6, 1.0), b), StaleCacheError);
    const auto f2 = pool_forward(random_x(rng, 8), b);
    EXPECT_THROW(pool_backward(f2.cache, std::vector<double>(4, 1.0), generator_basis(2)), StaleCacheError);
    EXPECT_THROW(pool_backward(f2.cache, std::vector<double>(5, 1.0), b), LinalgError);
}

TEST(Jacobian, StabilizerColumnsZeroAtOrigin) {
    const auto b = generator_basis(3);
    const RealMatrix j = jacobian(std::vector<double>(8, 0.0), b);
    ASSERT_EQ(j.rows(), 6u);
    ASSERT_EQ(j.cols(), 8u);
    for (std::size_t k : {kLambda6, kLambda7}) EXPECT_LE(norm(j.column(k)), 1e-12);
}

TEST(Jacobian, DiagonalColumnsParallelAtOrigin) {
    for (int d = 2; d <= 6; ++d) {
        const auto b = generator_basis(d);
        const RealMatrix j = jacobian(std::vector<double>(b.size(), 0.0), b);
        for (std::size_t k : diagonal_generator_indices(b)) {
            auto col = j.column(k);
            EXPECT_GT(col[1], 0.0);
            col[1] = 0.0;
            EXPECT_LE(norm(col), 1e-12);
        }
    }
}

TEST(Jacobian, TangentToSphere) {
    std::mt19937_64 rng(7);
    for (int d = 2; d <= 6; ++d) {
        const auto b = generator_basis(d);
        for (int t = 0; t < 30; ++t) {
            const auto f = pool_forward(random_x(rng, b.size(), 3.0), b);
            const RealMatrix j = jacobian(f.cache, b);
            for (std::size_t k = 0; k < b.size(); ++k) EXPECT_LE(std::abs(dot(f.phi, j.column(k))), 1e-9);
        }
    }
}

TEST(Jacobian, MatchesFiniteDifferencesD3) {
    const auto b = generator_basis(3);
    std::mt19937_64 rng(8);
    const auto x = random_x(rng, 8);
    const RealMatrix j = jacobian(x, b);
    const double h = 1e-5;
    for (std::size_t k = 0; k < 8; ++k) {
        auto xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const auto pp = pool_forward(xp, b).phi, pm = pool_forward(xm, b).phi;
        std::vector<double> fd(6);
        for (std::size_t i = 0; i < 6; ++i) fd[i] = (pp[i] - pm[i]) / (2.0 * h);
        EXPECT_LE(rel_error(j.column(k), fd), 1e-6) << "column " << k;
    }
}

TEST(Jacobian, BackwardIsJacobianTranspose) {
    std::mt19937_64 rng(9);
    for (int d = 2; d <= 5; ++d) {
        const auto b = generator_basis(d);
        for (int t = 0; t < 20; ++t) {
            const auto f = pool_forward(random_x(rng, b.size()), b);
            const auto up = random_x(rng, static_cast<std::size_t>(2 * d), 1.0);
            const RealMatrix j = jacobian(f.cache, b);
            const auto g = pool_backward(f.cache, up, b);
            for (std::size_t k = 0; k < b.size(); ++k) EXPECT_NEAR(g[k], dot(j.column(k), up), 1e-10);
        }
    }
}

TEST(NumericalRank, Basics) {
    EXPECT_EQ(numerical_rank(RealMatrix(6, 8), 1e-8), 0);
    EXPECT_EQ(numerical_rank(RealMatrix::identity(6), 1e-8), 6);
}

TEST(NumericalRank, OriginD3IsFive) {
    EXPECT_EQ(numerical_rank(jacobian(std::vector<double>(8, 0.0), generator_basis(3)), 1e-8), 5);
}

TEST(NumericalRank, NeverExceedsTwoDMinusOne) {
    std::mt19937_64 rng(10);
    for (int d = 2; d <= 6; ++d) {
        const auto b = generator_basis(d);
        for (int t = 0; t < 30; ++t) {
            EXPECT_LE(numerical_rank(jacobian(random_x(rng, b.size(), 3.0), b), 1e-8), 2 * d - 1);
        }
    }
}

TEST(CollapseWitness, StrictStabilizerLeavesReferenceState) {
    const auto b = generator_basis(3);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> radius(0.0, 2.0), angle(0.0, 2.0 * std::numbers::pi);
    const auto phi0 = pool_forward(std::vector<double>(8, 0.0), b).phi;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(8, 0.0);
        const double r = radius(rng), a = angle(rng);
        x[kLambda6] = r * std::cos(a);
        x[kLambda7] = r * std::sin(a);
        const auto phi = pool_forward(x, b).phi;
        for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(phi[i], phi0[i], 1e-10);
    }
}

TEST(CollapseWitness, DiagonalOnlyChangesPhase) {
    // Diagonal generators move psi_0 by a phase: Phi changes but |psi_0| stays 1.
    const auto b = generator_basis(3);
    std::vector<double> x(8, 0.0);
    x[6] = 0.4;
    x[7] = -0.3;
    const auto phi = pool_forward(x, b).phi;
    EXPECT_NEAR(phi[0] * phi[0] + phi[1] * phi[1], 1.0, 1e-14);
    EXPECT_GT(std::abs(phi[1]), 0.1);
}
