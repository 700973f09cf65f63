#include "supool/verify.hpp"

#include <gtest/gtest.h>

using namespace supool;

namespace {

const PropertyResult& find(const SuiteResult& r, const std::string& name, int d) {
    for (const auto& p : r.properties) {
        if (p.name == name && p.d == d) return p;
    }
    throw std::runtime_error("missing property " + name);
}

} // namespace

TEST(Verify, D2FullSuitePasses) {
    const SuiteResult r = run_suite(0, {2});
    for (const auto& p : r.properties) EXPECT_TRUE(p.passed) << p.name << " worst " << p.worst_error;
    EXPECT_TRUE(r.passed());
}

TEST(Verify, D3OrthogonalityAndRankAtZero) {
    const SuiteResult r = run_suite(1, {3}, 50);
    const auto& orth = find(r, "generator_orthogonality", 3);
    EXPECT_LE(orth.worst_error, 1e-12);
    EXPECT_EQ(orth.trials, 64u);
    ASSERT_EQ(r.ranks.size(), 1u);
    EXPECT_EQ(r.ranks[0].rank_at_zero, 5);
    EXPECT_EQ(r.ranks[0].quotient_dimension, 4);
}

TEST(Verify, DeterministicGivenSeed) {
    EXPECT_EQ(to_json(run_suite(9, {2, 4}, 20)).dump(), to_json(run_suite(9, {2, 4}, 20)).dump());
}

TEST(Verify, EveryPropertyReportedPerDimension) {
    const SuiteResult r = run_suite(2, {2, 3}, 10);
    std::size_t d2 = 0, d3 = 0;
    for (const auto& p : r.properties) (p.d == 2 ? d2 : d3)++;
    EXPECT_EQ(d2, d3);
    for (const char* name : {"unitarity", "phi_unit_norm", "one_parameter_subgroup", "generator_orthogonality",
                             "phi_orthogonal_to_jacobian", "jacobian_rank_at_most_2d_minus_1",
                             "stabilizer_columns_zero_at_origin", "collapse_witness",
                             "backward_equals_jacobian_transpose", "gradient_finite_difference"}) {
        EXPECT_NO_THROW(find(r, name, 3)) << name;
    }
}

TEST(Verify, PassedMeansNoFailuresWithinTolerance) {
    for (const auto& p : run_suite(3, {3, 5}, 20).properties) {
        EXPECT_EQ(p.passed, p.failures == 0 && p.worst_error <= p.tolerance) << p.name;
    }
}

TEST(Verify, RejectsUnsupportedDims) {
    EXPECT_THROW(run_suite(0, {1}), std::invalid_argument);
    EXPECT_THROW(run_suite(0, {9}), std::invalid_argument);
    EXPECT_THROW(run_suite(0, {}), std::invalid_argument);
}
