#include "ccsvm/kernels.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ccsvm;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x(i++) = d;
    return x;
}

Eigen::MatrixXd random_points(std::mt19937_64& gen, int n, int d) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = nd(gen);
    return X;
}

std::vector<kernel_spec> all_kernels() {
    return {kernel_spec::linear(), kernel_spec::polynomial(2), kernel_spec::polynomial(4),
            kernel_spec::polynomial(6), kernel_spec::rbf(0.01), kernel_spec::rbf(1.0), kernel_spec::rbf(100.0)};
}
}  // namespace

TEST(KernelEval, Examples) {
    const auto x = vec({1, 2}), y = vec({3, 4});
    EXPECT_DOUBLE_EQ(kernel_eval(kernel_spec::linear(), x, y), 11.0);
    EXPECT_DOUBLE_EQ(kernel_eval(kernel_spec::polynomial(2), x, y), 144.0);
    EXPECT_DOUBLE_EQ(kernel_eval(kernel_spec::rbf(0.3), x, x), 1.0);
    EXPECT_NEAR(kernel_eval(kernel_spec::rbf(0.5), x, y), std::exp(-0.5 * 8.0), 1e-15);
    EXPECT_THROW(kernel_eval(kernel_spec::linear(), x, vec({1})), std::invalid_argument);
}

TEST(KernelSpec, Validation) {
    EXPECT_THROW(kernel_spec::polynomial(0), std::invalid_argument);
    EXPECT_THROW(kernel_spec::rbf(0.0), std::invalid_argument);
    EXPECT_THROW(kernel_spec::rbf(-1.0), std::invalid_argument);
}

TEST(KernelSpec, TextRoundTrip) {
    for (const auto& k : all_kernels()) {
        const auto back = parse_kernel_spec(to_string(k));
        EXPECT_EQ(back.kind, k.kind);
        EXPECT_EQ(back.degree, k.degree);
        EXPECT_EQ(back.gamma, k.gamma);
    }
    EXPECT_EQ(to_string(kernel_spec::polynomial(2)), "poly:d=2");
    EXPECT_EQ(to_string(kernel_spec::rbf(0.5)), "rbf:gamma=0.5");
    EXPECT_THROW(parse_kernel_spec("poly:d=2.5"), std::invalid_argument);
    EXPECT_THROW(parse_kernel_spec("sigmoid"), std::invalid_argument);
    EXPECT_THROW(parse_kernel_spec("rbf:gamma=abc"), std::invalid_argument);
}

TEST(Gram, Examples) {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_EQ(gram(kernel_spec::linear(), I, ridge_policy::none()).values, I);

    Eigen::MatrixXd X(2, 1);
    X << 1, 2;
    const auto k = gram(kernel_spec::polynomial(2), X, ridge_policy::none());
    Eigen::MatrixXd expected(2, 2);
    expected << 4, 9, 9, 25;
    EXPECT_EQ(k.values, expected);
    EXPECT_EQ(k.ridge, 0.0);

    EXPECT_THROW(gram(kernel_spec::linear(), Eigen::MatrixXd(0, 2)), std::invalid_argument);
}

TEST(Gram, DefaultRidgeAndRbfDiagonal) {
    std::mt19937_64 gen(3);
    const auto X = random_points(gen, 12, 3);
    const auto k = gram(kernel_spec::rbf(0.7), X);
    EXPECT_DOUBLE_EQ(k.ridge, 1e-8);
    for (Eigen::Index i = 0; i < 12; ++i) {
        EXPECT_EQ(k.values(i, i), 1.0);
        EXPECT_EQ(k.regularized()(i, i), 1.0 + 1e-8);
    }
}

TEST(Gram, LinearEqualsOuterProduct) {
    std::mt19937_64 gen(5);
    const auto X = random_points(gen, 25, 4);
    const auto k = gram(kernel_spec::linear(), X, ridge_policy::none());
    EXPECT_LE((k.values - X * X.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gram, ThreadCountDoesNotChangeValues) {
    std::mt19937_64 gen(9);
    const auto X = random_points(gen, 40, 3);
    for (const auto& spec : all_kernels()) {
        EXPECT_EQ(gram(spec, X, {}, 1).values, gram(spec, X, {}, 4).values) << to_string(spec);
    }
}

TEST(KernelProperties, SymmetryAndPsd) {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    for (const auto& spec : all_kernels()) {
        const auto P = random_points(gen, 100, 3);
        for (int i = 0; i < 50; ++i) {
            const Eigen::VectorXd x = P.row(2 * i).transpose(), y = P.row(2 * i + 1).transpose();
            EXPECT_EQ(kernel_eval(spec, x, y), kernel_eval(spec, y, x));
        }
        const auto X = random_points(gen, 30, 3);
        const auto k = gram(spec, X, ridge_policy::none());
        EXPECT_EQ(k.values, k.values.transpose());
        const double scale = k.values.trace() / 30.0;
        for (int r = 0; r < 20; ++r) {
            Eigen::VectorXd c(30);
            for (int i = 0; i < 30; ++i) c(i) = nd(gen);
            EXPECT_GE(c.dot(k.values * c), -1e-8 * c.squaredNorm() * scale) << to_string(spec);
        }
    }
}

TEST(KernelRow, Examples) {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_EQ(kernel_row(kernel_spec::linear(), vec({1, 1}), I), vec({1, 1}));
    std::mt19937_64 gen(2);
    const auto X = random_points(gen, 6, 2);
    const auto row = kernel_row(kernel_spec::rbf(2.0), X.row(4).transpose(), X);
    EXPECT_EQ(row(4), 1.0);
    Eigen::MatrixXd three(1, 1);
    three << 3;
    EXPECT_EQ(kernel_row(kernel_spec::polynomial(2), vec({0}), three), vec({1}));
    EXPECT_THROW(kernel_row(kernel_spec::linear(), vec({1, 2, 3}), I), std::invalid_argument);
}

TEST(Gram, SubsetKeepsRidge) {
    std::mt19937_64 gen(4);
    const auto X = random_points(gen, 8, 2);
    const auto k = gram(kernel_spec::polynomial(2), X);
    const auto s = k.subset({6, 1, 3});
    EXPECT_EQ(s.ridge, k.ridge);
    EXPECT_EQ(s.values(0, 1), k.values(6, 1));
    EXPECT_EQ(s.values(2, 2), k.values(3, 3));
}
