#include "ccsvm/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using ccsvm::classify_target;
using ccsvm::target_geometry;

TEST(ClassCenters, TwoClasses) {
    const auto c = ccsvm::class_centers(2);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_DOUBLE_EQ(c[0](0), -1.0);
    EXPECT_DOUBLE_EQ(c[1](0), 1.0);
}

TEST(ClassCenters, ThreeClassesByHand) {
    const auto c = ccsvm::class_centers(3);
    const double h = std::sqrt(3.0) / 2.0;
    EXPECT_NEAR(c[0](0), 0.0, 1e-15);
    EXPECT_NEAR(c[0](1), -1.0, 1e-15);
    EXPECT_NEAR(c[1](0), -h, 1e-15);
    EXPECT_NEAR(c[1](1), 0.5, 1e-15);
    EXPECT_NEAR(c[2](0), h, 1e-15);
    EXPECT_NEAR(c[2](1), 0.5, 1e-15);
}

TEST(ClassCenters, RejectsFewerThanTwo) {
    EXPECT_THROW(ccsvm::class_centers(1), std::invalid_argument);
    EXPECT_THROW(target_geometry(0), std::invalid_argument);
}

class GeometryInvariants : public ::testing::TestWithParam<int> {};

TEST_P(GeometryInvariants, SimplexAndClassing) {
    const int n = GetParam();
    const target_geometry g(n);
    ASSERT_EQ(g.target_dim(), n - 1);
    for (int s = 1; s <= n; ++s) {
        EXPECT_NEAR(g.center(s).norm(), 1.0, 1e-12);
        EXPECT_EQ(classify_target(g.center(s), g), s);
        EXPECT_EQ(classify_target(3.7 * g.center(s), g), s);
        for (int t = 1; t <= n; ++t) {
            if (t == s) continue;
            EXPECT_NEAR(g.center(s).dot(g.center(t)), -1.0 / (n - 1), 1e-12);
            EXPECT_GT(g.center(s).dot(g.center(s)), g.center(t).dot(g.center(s)));
            EXPECT_EQ(g.diff(s, t), g.center(s) - g.center(t));
            EXPECT_EQ(g.diff(s, t), (-g.diff(t, s)).eval());
            EXPECT_NEAR(g.margin_terms(s, t).offset, static_cast<double>(n) / (n - 1), 1e-12);
        }
    }
}

TEST_P(GeometryInvariants, ScalingDoesNotChangeClass) {
    const int n = GetParam();
    const target_geometry g(n);
    std::mt19937_64 gen(static_cast<unsigned>(n));
    std::normal_distribution<double> nd;
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd a(n - 1);
        for (int i = 0; i < n - 1; ++i) a(i) = nd(gen);
        const int s = classify_target(a, g);
        for (double c : {1e-3, 0.5, 2.0, 1e4}) EXPECT_EQ(classify_target(c * a, g), s);
    }
}

INSTANTIATE_TEST_SUITE_P(TwoToSixteen, GeometryInvariants, ::testing::Range(2, 17));

TEST(Classify, Examples) {
    const target_geometry g2(2), g3(3);
    EXPECT_EQ(classify_target(Eigen::VectorXd::Constant(1, -0.7), g2), 1);
    EXPECT_EQ(classify_target(g3.center(2), g3), 2);
    EXPECT_EQ(classify_target(Eigen::VectorXd::Zero(2), g3), 1);
}

TEST(Classify, DimensionMismatch) {
    const target_geometry g3(3);
    EXPECT_THROW(classify_target(Eigen::VectorXd::Zero(3), g3), std::invalid_argument);
}

TEST(MarginTerms, Examples) {
    const target_geometry g2(2), g3(3);
    const auto m21 = g2.margin_terms(2, 1);
    EXPECT_DOUBLE_EQ(m21.v(0), 2.0);
    EXPECT_DOUBLE_EQ(m21.offset, 2.0);
    const auto m12 = g3.margin_terms(1, 2);
    EXPECT_NEAR(m12.v(0), std::sqrt(3.0) / 2.0, 1e-15);
    EXPECT_NEAR(m12.v(1), -1.5, 1e-15);
    EXPECT_NEAR(m12.offset, 1.5, 1e-15);
    EXPECT_THROW(g3.margin_terms(2, 2), std::invalid_argument);
    EXPECT_THROW(g3.margin_terms(0, 2), std::invalid_argument);
}
