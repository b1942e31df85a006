#include <cmath>

#include <gtest/gtest.h>

#include "oracle_values.hpp"
#include "trego/kernel.hpp"
#include "trego/random.hpp"

using trego::matern52;

TEST(Matern52, EqualPointsGiveSignalVariance) {
    Eigen::VectorXd x(3);
    x << 0.1, 0.7, 0.3;
    EXPECT_DOUBLE_EQ(matern52(x, x, Eigen::VectorXd::Constant(3, 0.4), 1.0), 1.0);
    EXPECT_DOUBLE_EQ(matern52(x, x, Eigen::VectorXd::Constant(3, 0.4), 2.5), 2.5);
}

TEST(Matern52, UnitScaledDistanceMatchesOracle) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(1), b = Eigen::VectorXd::Ones(1);
    EXPECT_NEAR(matern52(a, b, Eigen::VectorXd::Ones(1), 1.0), oracle::kMatern52AtUnitDistance, 1e-15);
    // anisotropic: r = sqrt((0.6/2)^2 + (0.4/0.5)^2)... scale to r = 1 with lengthscales (0.6, 0.8)
    Eigen::VectorXd c(2), d(2), l(2);
    c << 0.0, 0.0;
    d << 0.6, 0.8;
    l << 1.0, 1.0;
    EXPECT_NEAR(matern52(c, d, l, 1.0), oracle::kMatern52AtUnitDistance, 1e-15);
}

TEST(Matern52, SymmetricForRandomPairs) {
    trego::Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        const int n = 1 + i % 6;
        const Eigen::VectorXd lo = Eigen::VectorXd::Zero(n), hi = Eigen::VectorXd::Ones(n);
        const Eigen::VectorXd x = trego::uniform_in_box(lo, hi, rng), y = trego::uniform_in_box(lo, hi, rng);
        const Eigen::VectorXd l = trego::uniform_in_box(Eigen::VectorXd::Constant(n, 0.05), hi, rng);
        EXPECT_EQ(matern52(x, y, l, 1.7), matern52(y, x, l, 1.7));
    }
}

TEST(Matern52, DecreasingInDistance) {
    Eigen::VectorXd o = Eigen::VectorXd::Zero(1), l = Eigen::VectorXd::Constant(1, 0.3);
    double prev = matern52(o, o, l, 1.0);
    for (int i = 1; i <= 200; ++i) {
        Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.01 * i);
        const double k = matern52(o, x, l, 1.0);
        EXPECT_LT(k, prev);
        prev = k;
    }
}

TEST(Matern52, RejectsInvalidHyperparameters) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd bad(2);
    bad << 0.5, 0.0;
    EXPECT_THROW(matern52(x, x, bad, 1.0), trego::InvalidHyperparameterError);
    bad << -0.1, 0.5;
    EXPECT_THROW(matern52(x, x, bad, 1.0), trego::InvalidHyperparameterError);
    EXPECT_THROW(matern52(x, x, Eigen::VectorXd::Ones(2), 0.0), trego::InvalidHyperparameterError);
    EXPECT_THROW(matern52(x, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(2), 1.0),
                 trego::InvalidHyperparameterError);
}
