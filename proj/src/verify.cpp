#include "supool/verify.hpp"

#include "supool/complex_linalg.hpp"
#include "supool/su_pool.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

namespace supool {

namespace {

using Rng = std::mt19937_64;

Rng stream(std::uint64_t seed, int d, int property) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(property)};
    return Rng(seq);
}

std::vector<double> uniform_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

ComplexMatrix random_hermitian(Rng& rng, std::size_t n) {
    std::normal_distribution<double> dist;
    ComplexMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        h(i, i) = dist(rng);
        for (std::size_t j = i + 1; j < n; ++j) {
            h(i, j) = Complex(dist(rng), dist(rng));
            h(j, i) = std::conj(h(i, j));
        }
    }
    return h;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double relative(double err, double scale) { return err / std::max(scale, 1e-300); }

// Accumulates one property over its trials.
class Property {
public:
    Property(std::string name, int d, double tolerance) {
        r_.name = std::move(name);
        r_.d = d;
        r_.tolerance = tolerance;
    }

    void record(double error) {
        ++r_.trials;
        if (!(error <= r_.tolerance)) ++r_.failures;
        if (std::isnan(error) || error > r_.worst_error) r_.worst_error = error;
    }

    PropertyResult finish() {
        r_.passed = r_.failures == 0 && r_.worst_error <= r_.tolerance;
        return r_;
    }

private:
    PropertyResult r_;
};

std::vector<double> phi_of(std::span<const double> x, const GeneratorBasis& basis) {
    return pool_forward(x, basis).phi;
}

// Off-diagonal generators away from index 0 plus diagonal combinations whose
// (0,0) entry vanishes: every such H has a zero first row and column.
std::vector<double> strict_stabilizer_point(Rng& rng, const GeneratorBasis& basis) {
    std::vector<double> x(basis.size(), 0.0);
    std::normal_distribution<double> normal;
    for (std::size_t k : stabilizer_generator_indices(basis)) x[k] = normal(rng);

    const auto diag = diagonal_generator_indices(basis);
    std::vector<double> c(diag.size()), a(diag.size());
    for (std::size_t l = 0; l < diag.size(); ++l) {
        c[l] = normal(rng);
        a[l] = basis.generators[diag[l]](0, 0).real();
    }
    double ca = 0.0, aa = 0.0;
    for (std::size_t l = 0; l < diag.size(); ++l) {
        ca += c[l] * a[l];
        aa += a[l] * a[l];
    }
    for (std::size_t l = 0; l < diag.size(); ++l) x[diag[l]] = c[l] - ca / aa * a[l];

    const double n = norm2(x);
    if (n == 0.0) return x;
    const double radius = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    for (double& v : x) v *= radius / n;
    return x;
}

void check_dimension(int d, std::size_t trials, std::uint64_t seed, SuiteResult& out) {
    const GeneratorBasis basis = generator_basis(d);
    const std::size_t m = basis.size();
    const auto dd = static_cast<std::size_t>(d);
    int stream_id = 0;
    auto next_stream = [&] { return stream(seed, d, stream_id++); };

    {
        Property herm("generator_hermitian_traceless", d, 1e-14);
        for (const auto& g : basis.generators) {
            double worst = std::abs(g.trace());
            for (std::size_t i = 0; i < dd; ++i) {
                for (std::size_t j = 0; j < dd; ++j) worst = std::max(worst, std::abs(g(i, j) - std::conj(g(j, i))));
            }
            herm.record(worst);
        }
        out.properties.push_back(herm.finish());
        ++stream_id;
    }
    {
        Property orth("generator_orthogonality", d, 1e-12);
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = 0; k < m; ++k) {
                const Complex tr = (basis.generators[j] * basis.generators[k]).trace();
                orth.record(std::abs(tr - Complex(j == k ? 2.0 : 0.0, 0.0)));
            }
        }
        out.properties.push_back(orth.finish());
        ++stream_id;
    }
    {
        Rng rng = next_stream();
        Property recon("eig_reconstruction", d, 1e-10);
        for (std::size_t t = 0; t < trials; ++t) {
            const ComplexMatrix h = random_hermitian(rng, dd);
            const EigenDecomposition e = hermitian_eig(h);
            std::vector<Complex> lam(e.eigenvalues.begin(), e.eigenvalues.end());
            const ComplexMatrix back = e.eigenvectors * ComplexMatrix::diagonal(lam) * e.eigenvectors.adjoint();
            recon.record(frobenius_distance(back, h) / std::max(1.0, h.frobenius_norm()));
        }
        out.properties.push_back(recon.finish());
    }
    {
        Rng rng = next_stream();
        Property unitary("unitarity", d, 1e-12);
        Property det("determinant_one", d, 1e-10);
        Property norm("phi_unit_norm", d, 1e-10);
        const ComplexMatrix eye = ComplexMatrix::identity(dd);
        for (std::size_t t = 0; t < trials; ++t) {
            const auto x = uniform_vector(rng, m, -2.0, 2.0);
            const PoolForward f = pool_forward(x, basis);
            unitary.record(frobenius_distance(f.cache.u.adjoint() * f.cache.u, eye));
            det.record(std::abs(determinant(f.cache.u) - Complex(1.0, 0.0)));
            norm.record(std::abs(norm2(f.phi) - 1.0));
        }
        out.properties.push_back(unitary.finish());
        out.properties.push_back(det.finish());
        out.properties.push_back(norm.finish());
    }
    {
        Rng rng = next_stream();
        std::uniform_real_distribution<double> st(-2.0, 2.0);
        Property group("one_parameter_subgroup", d, 1e-10);
        for (std::size_t t = 0; t < trials; ++t) {
            const auto x = uniform_vector(rng, m, -1.0, 1.0);
            const ComplexMatrix h = assemble_hamiltonian(x, basis);
            const double s = st(rng), u = st(rng);
            const ComplexMatrix lhs = expm_i_hermitian(h * Complex(s + u, 0.0));
            const ComplexMatrix rhs = expm_i_hermitian(h * Complex(s, 0.0)) * expm_i_hermitian(h * Complex(u, 0.0));
            group.record(frobenius_distance(lhs, rhs));
        }
        out.properties.push_back(group.finish());
    }
    {
        Rng rng = next_stream();
        Property tangent("phi_orthogonal_to_jacobian", d, 1e-9);
        Property rank("jacobian_rank_at_most_2d_minus_1", d, 0.0);
        RankReport report;
        report.d = d;
        report.quotient_dimension = 2 * d - 2;
        const int bound = 2 * d - 1;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto x = uniform_vector(rng, m, -2.0, 2.0);
            const PoolForward f = pool_forward(x, basis);
            const RealMatrix j = jacobian(f.cache, basis);
            double worst = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                double dot = 0.0;
                for (std::size_t i = 0; i < 2 * dd; ++i) dot += f.phi[i] * j(i, k);
                worst = std::max(worst, std::abs(dot));
            }
            tangent.record(worst);
            const int r = numerical_rank(j, kRankTolerance);
            ++report.histogram[r];
            rank.record(static_cast<double>(std::max(r - bound, 0)));
        }
        const std::vector<double> zero(m, 0.0);
        report.rank_at_zero = numerical_rank(jacobian(zero, basis), kRankTolerance);
        rank.record(static_cast<double>(std::max(report.rank_at_zero - bound, 0)));
        out.properties.push_back(tangent.finish());
        out.properties.push_back(rank.finish());
        out.ranks.push_back(std::move(report));
    }
    {
        const std::vector<double> zero(m, 0.0);
        const RealMatrix j0 = jacobian(zero, basis);
        Property stab("stabilizer_columns_zero_at_origin", d, 1e-12);
        for (std::size_t k : stabilizer_generator_indices(basis)) stab.record(norm2(j0.column(k)));
        out.properties.push_back(stab.finish());

        // At the origin every diagonal generator only rotates the phase of psi_0.
        Property diag("diagonal_columns_phase_only_at_origin", d, 1e-12);
        for (std::size_t k : diagonal_generator_indices(basis)) {
            auto col = j0.column(k);
            col[1] = 0.0;
            diag.record(norm2(col));
        }
        out.properties.push_back(diag.finish());
        ++stream_id;
    }
    {
        Rng rng = next_stream();
        Property collapse("collapse_witness", d, 1e-10);
        const std::vector<double> phi0 = phi_of(std::vector<double>(m, 0.0), basis);
        if (!stabilizer_generator_indices(basis).empty() || diagonal_generator_indices(basis).size() > 1) {
            for (std::size_t t = 0; t < trials; ++t) {
                const auto x = strict_stabilizer_point(rng, basis);
                collapse.record(distance(phi_of(x, basis), phi0));
            }
        }
        out.properties.push_back(collapse.finish());
    }
    {
        Rng rng = next_stream();
        Property adjoint("backward_equals_jacobian_transpose", d, 1e-10);
        Property grad("gradient_finite_difference", d, 1e-6);
        Property jac("jacobian_finite_difference", d, 1e-6);
        const double h = kFiniteDifferenceStep;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto x = uniform_vector(rng, m, -1.5, 1.5);
            const auto up = uniform_vector(rng, 2 * dd, -1.0, 1.0);
            const PoolForward f = pool_forward(x, basis);
            const auto g = pool_backward(f.cache, up, basis);
            const RealMatrix j = jacobian(f.cache, basis);

            std::vector<double> jt_up(m, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
                for (std::size_t i = 0; i < 2 * dd; ++i) jt_up[k] += j(i, k) * up[i];
            }
            adjoint.record(distance(g, jt_up) / std::max(1.0, norm2(jt_up)));

            RealMatrix fd(2 * dd, m);
            std::vector<double> fd_grad(m);
            for (std::size_t k = 0; k < m; ++k) {
                auto xp = x, xm = x;
                xp[k] += h;
                xm[k] -= h;
                const auto pp = phi_of(xp, basis), pm = phi_of(xm, basis);
                double dot = 0.0;
                for (std::size_t i = 0; i < 2 * dd; ++i) {
                    fd(i, k) = (pp[i] - pm[i]) / (2.0 * h);
                    dot += up[i] * fd(i, k);
                }
                fd_grad[k] = dot;
            }
            grad.record(relative(distance(g, fd_grad), norm2(g)));
            jac.record(relative(distance(j.data(), fd.data()), j.frobenius_norm()));
        }
        out.properties.push_back(adjoint.finish());
        out.properties.push_back(grad.finish());
        out.properties.push_back(jac.finish());
    }
    {
        Rng rng = next_stream();
        Property dexp("dexpm_finite_difference", d, 1e-6);
        const double h = kFiniteDifferenceStep;
        const std::size_t pairs = std::max<std::size_t>(1, trials / 2);
        for (std::size_t t = 0; t < pairs; ++t) {
            const ComplexMatrix hm = random_hermitian(rng, dd);
            const ComplexMatrix e = random_hermitian(rng, dd);
            const ComplexMatrix analytic = dexpm_i_hermitian(hm, e);
            const ComplexMatrix fd = (expm_i_hermitian(hm + e * Complex(h, 0.0)) -
                                      expm_i_hermitian(hm - e * Complex(h, 0.0))) *
                                     Complex(1.0 / (2.0 * h), 0.0);
            dexp.record(relative(frobenius_distance(analytic, fd), analytic.frobenius_norm()));
        }
        out.properties.push_back(dexp.finish());
    }
}

} // namespace

bool SuiteResult::passed() const { return failed_count() == 0; }

std::size_t SuiteResult::failed_count() const {
    return static_cast<std::size_t>(
        std::count_if(properties.begin(), properties.end(), [](const PropertyResult& p) { return !p.passed; }));
}

SuiteResult run_suite(std::uint64_t seed, const std::vector<int>& dims, std::size_t trials) {
    if (dims.empty()) throw std::invalid_argument("run_suite: no dimensions given");
    if (trials == 0) throw std::invalid_argument("run_suite: trials must be positive");
    for (int d : dims) {
        if (d < 2 || d > 8) throw std::invalid_argument("run_suite: d must lie in [2, 8]");
    }
    std::vector<int> sorted = dims;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    SuiteResult result;
    for (int d : sorted) check_dimension(d, trials, seed, result);
    return result;
}

nlohmann::json to_json(const SuiteResult& r) {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : r.properties) {
        props.push_back({{"name", p.name},
                         {"d", p.d},
                         {"trials", p.trials},
                         {"failures", p.failures},
                         {"worst_error", p.worst_error},
                         {"tolerance", p.tolerance},
                         {"passed", p.passed}});
    }
    nlohmann::json ranks = nlohmann::json::array();
    for (const auto& rr : r.ranks) {
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& [rank, count] : rr.histogram) hist[std::to_string(rank)] = count;
        ranks.push_back({{"d", rr.d},
                         {"rank_at_zero", rr.rank_at_zero},
                         {"quotient_dimension", rr.quotient_dimension},
                         {"asserted_bound", 2 * rr.d - 1},
                         {"histogram", hist}});
    }
    return {{"passed", r.passed()}, {"failed", r.failed_count()}, {"properties", props}, {"ranks", ranks}};
}

std::string format_text(const SuiteResult& r) {
    std::ostringstream os;
    for (const auto& p : r.properties) {
        os << (p.passed ? "PASS" : "FAIL") << "  d=" << p.d << "  " << std::left << std::setw(38) << p.name
           << std::right << " trials=" << std::setw(4) << p.trials << " failures=" << p.failures
           << std::scientific << std::setprecision(2) << " worst=" << p.worst_error << " tol=" << p.tolerance
           << std::defaultfloat << '\n';
    }
    for (const auto& rr : r.ranks) {
        os << "rank  d=" << rr.d << "  at x=0: " << rr.rank_at_zero << "  random x:";
        for (const auto& [rank, count] : rr.histogram) os << ' ' << rank << ':' << count;
        os << "  (2d-2 = " << rr.quotient_dimension << ", asserted <= " << 2 * rr.d - 1 << ")\n";
    }
    os << (r.passed() ? "all properties passed" : std::to_string(r.failed_count()) + " properties failed") << '\n';
    return os.str();
}

} // namespace supool
