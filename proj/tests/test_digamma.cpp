#include <gtest/gtest.h>

#include <complex>
#include <numbers>
#include <random>

#include "lqbm/digamma.hpp"
#include "oracles.hpp"

using lqbm::digamma;
using cd = std::complex<double>;

TEST(Digamma, EulerGammaAtOne) { EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-15); }

TEST(Digamma, HalfIntegerIdentity) {
    EXPECT_NEAR(digamma(0.5), -0.5772156649015329 - 2.0 * std::log(2.0), 1e-14);
}

TEST(Digamma, FrozenComplexValue) {
    const cd v = digamma(cd(2.0, 3.0));
    EXPECT_NEAR(v.real(), 1.2079807107101508808, 1e-14);
    EXPECT_NEAR(v.imag(), 1.1041296805875762097, 1e-14);
}

TEST(Digamma, SeriesOracleAtTwoPlusThreeI) {
    const cd ref = oracle::digamma_series(cd(2.0, 3.0));
    const cd v = digamma(cd(2.0, 3.0));
    EXPECT_LT(std::abs(v - ref), 1e-11);
}

TEST(Digamma, SeriesOracleOnScatteredPoints) {
    for (const cd z : {cd(0.3, 0.0), cd(7.5, -2.0), cd(0.01, 0.2), cd(12.0, 40.0), cd(-3.7, 0.4)}) {
        const cd ref = oracle::digamma_series(z, 2'000'000);
        EXPECT_LT(std::abs(digamma(z) - ref), 1e-9 * std::max(1.0, std::abs(ref))) << z;
    }
}

TEST(Digamma, RecurrenceProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> re(-30.0, 30.0), im(-20.0, 20.0);
    for (int i = 0; i < 2000; ++i) {
        const cd z(re(rng), im(rng));
        if (std::abs(z.imag()) < 1e-3) continue;
        const cd lhs = digamma(z + 1.0);
        const cd rhs = digamma(z) + 1.0 / z;
        EXPECT_LT(std::abs(lhs - rhs), 1e-11 * std::max(1.0, std::abs(lhs))) << z;
    }
}

TEST(Digamma, ReflectionProperty) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> re(-40.0, 40.0), im(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const cd z(re(rng), im(rng));
        if (std::abs(z.imag()) < 1e-2) continue;
        const cd lhs = digamma(1.0 - z) - digamma(z);
        const cd rhs = std::numbers::pi / std::tan(std::numbers::pi * z);
        EXPECT_LT(std::abs(lhs - rhs), 1e-9 * std::max(1.0, std::abs(rhs))) << z;
    }
}

TEST(Digamma, ConjugateSymmetry) {
    for (const cd z : {cd(0.4, 1.3), cd(-5.5, 2.0), cd(25.0, -0.7)}) {
        EXPECT_LT(std::abs(digamma(std::conj(z)) - std::conj(digamma(z))), 1e-14 * std::abs(digamma(z)));
    }
}

TEST(Digamma, RealOverloadMatchesComplex) {
    for (const double x : {0.1, 0.9, 3.3, 15.0, 300.0, -2.5, -25.25}) {
        EXPECT_NEAR(digamma(x), digamma(cd(x, 0.0)).real(), 1e-13 * std::max(1.0, std::abs(digamma(x))));
    }
}

TEST(Digamma, PolesRaise) {
    for (const double x : {0.0, -1.0, -2.0, -37.0}) {
        try {
            digamma(cd(x, 0.0));
            FAIL() << "expected pole error at " << x;
        } catch (const lqbm::Error& e) {
            EXPECT_EQ(e.reason(), lqbm::Reason::Pole);
            EXPECT_EQ(e.kind(), lqbm::ErrorKind::Numerical);
        }
    }
}

TEST(Digamma, NonFiniteArgumentRaises) {
    EXPECT_THROW(digamma(cd(std::nan(""), 0.0)), lqbm::Error);
}
