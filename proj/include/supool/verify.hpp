#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace supool {

/// passed <=> failures == 0 and worst_error <= tolerance.
struct PropertyResult {
    std::string name;
    int d = 0;
    std::size_t trials = 0;
    std::size_t failures = 0;
    double worst_error = 0.0;
    double tolerance = 0.0;
    bool passed = true;
};

/// Measured Jacobian ranks at tol 1e-8. Compared against 2d - 2 for
/// information only; the asserted bound is 2d - 1.
struct RankReport {
    int d = 0;
    int rank_at_zero = 0;
    int quotient_dimension = 0; // 2d - 2
    std::map<int, std::size_t> histogram;
};

struct SuiteResult {
    std::vector<PropertyResult> properties;
    std::vector<RankReport> ranks;

    bool passed() const;
    std::size_t failed_count() const;
};

inline constexpr double kRankTolerance = 1e-8;
inline constexpr double kFiniteDifferenceStep = 1e-5;

/// Full property suite for each d in `dims` (each in [2, 8]). Deterministic
/// given `seed`; every property draws from its own stream.
SuiteResult run_suite(std::uint64_t seed, const std::vector<int>& dims, std::size_t trials = 200);

nlohmann::json to_json(const SuiteResult& r);
std::string format_text(const SuiteResult& r);

} // namespace supool
