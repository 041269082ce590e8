#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace specgap;
using sgtest::vec2;

TEST(WeightedSupNorm, ZeroFunction) {
    Vector f = Vector::Zero(3);
    Vector phi = Vector::Constant(3, 2.0);
    EXPECT_EQ(weighted_sup_norm(f, phi), 0.0);
}

TEST(WeightedSupNorm, EqualityCase) {
    Vector phi(4);
    phi << 1.0, 0.5, 3.0, 7.0;
    EXPECT_DOUBLE_EQ(weighted_sup_norm(phi, phi), 1.0);
}

TEST(WeightedSupNorm, ClosedForm) {
    Vector f = vec2(3.0, -4.0);
    Vector phi = vec2(1.0, 2.0);
    EXPECT_DOUBLE_EQ(weighted_sup_norm(f, phi), 3.0);
}

TEST(WeightedSupNorm, RejectsDimensionMismatchAndBadWeights) {
    Vector f = vec2(1.0, 2.0);
    Vector phi3 = Vector::Ones(3);
    EXPECT_THROW(weighted_sup_norm(f, phi3), std::invalid_argument);
    EXPECT_THROW(weighted_sup_norm(f, vec2(1.0, 0.0)), std::invalid_argument);
    EXPECT_THROW(weighted_sup_norm(f, vec2(1.0, -1.0)), std::invalid_argument);
}

TEST(HahnJordan, Examples) {
    auto zero = hahn_jordan(vec2(0.0, 0.0));
    EXPECT_EQ(zero.plus, Vector::Zero(2));
    EXPECT_EQ(zero.minus, Vector::Zero(2));

    auto mixed = hahn_jordan(vec2(1.0, -2.0));
    EXPECT_EQ(mixed.plus, vec2(1.0, 0.0));
    EXPECT_EQ(mixed.minus, vec2(0.0, 2.0));

    Vector single(1);
    single << -5.0;
    auto neg = hahn_jordan(single);
    EXPECT_EQ(neg.plus[0], 0.0);
    EXPECT_EQ(neg.minus[0], 5.0);

    Vector bad(1);
    bad << std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(hahn_jordan(bad), std::invalid_argument);
}

TEST(SignedMeasure, RejectsNonSingularParts) {
    EXPECT_THROW(SignedMeasure(vec2(1.0, 1.0), vec2(0.5, 0.0)), std::invalid_argument);
    EXPECT_THROW(SignedMeasure(vec2(-1.0, 0.0), vec2(0.0, 0.0)), std::invalid_argument);
}

TEST(WeightedTvNorm, Examples) {
    auto zero = hahn_jordan(Vector::Zero(3));
    EXPECT_EQ(weighted_tv_norm(zero, Vector::Ones(3)), 0.0);

    // delta_x - delta_y against phi = 1 has total variation 2.
    auto dirac_diff = hahn_jordan(vec2(1.0, -1.0));
    EXPECT_DOUBLE_EQ(weighted_tv_norm(dirac_diff, Vector::Ones(2)), 2.0);

    EXPECT_DOUBLE_EQ(weighted_tv_norm(dirac_diff, vec2(2.0, 3.0)), 5.0);
}

TEST(WeightedTvNorm, MatchesSignEnumerationDual) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.1, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        Index n = 2 + static_cast<Index>(trial % 9);  // up to 10 states
        Vector raw(n), phi(n);
        for (Index i = 0; i < n; ++i) {
            raw[i] = unif(rng);
            phi[i] = pos(rng);
        }
        auto mu = hahn_jordan(raw);
        double dual = sgtest::tv_norm_by_sign_enumeration(mu, phi);
        EXPECT_NEAR(weighted_tv_norm(mu, phi), dual, 1e-12);
    }
}

TEST(StateSpace, RejectsEmptyAndDuplicates) {
    EXPECT_THROW(StateSpace(std::vector<std::string>{}), std::invalid_argument);
    EXPECT_THROW(StateSpace({"a", "a"}), std::invalid_argument);
    StateSpace s = StateSpace::indexed(3);
    EXPECT_EQ(s.size(), 3);
    EXPECT_EQ(s.label(2), "2");
}

TEST(WeightPair, EnforcesPsiBelowV) {
    EXPECT_NO_THROW(WeightPair(vec2(2.0, 2.0), vec2(1.0, 2.0)));
    EXPECT_THROW(WeightPair(vec2(1.0, 1.0), vec2(2.0, 1.0)), std::invalid_argument);
    EXPECT_THROW(WeightPair(vec2(1.0, 0.0), vec2(0.5, 0.0)), std::invalid_argument);
}

