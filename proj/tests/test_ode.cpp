#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lqbm/ode.hpp"

using namespace lqbm;

TEST(Dopri5, ExponentialDecay) {
    const std::vector<double> ts{0.5, 1.0, 2.0, 5.0};
    std::vector<double> got;
    const auto res = integrate<1>([](double, const Vec<1>& y) { return Vec<1>{-y[0]}; }, Vec<1>{1.0}, 0.0, ts,
                                  OdeOptions{}, [&](double, const Vec<1>& y) { got.push_back(y[0]); });
    ASSERT_TRUE(res.ok());
    ASSERT_EQ(got.size(), ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_NEAR(got[i], std::exp(-ts[i]), 1e-9);
}

TEST(Dopri5, HarmonicOscillatorPhaseAndOutputTimes) {
    std::vector<double> ts;
    for (int i = 0; i <= 100; ++i) ts.push_back(0.3 * i);
    std::vector<double> seen;
    OdeOptions o;
    o.rtol = o.atol = 1e-11;
    const auto res = integrate<2>([](double, const Vec<2>& y) { return Vec<2>{y[1], -y[0]}; }, Vec<2>{1.0, 0.0}, 0.0,
                                  ts, o, [&](double t, const Vec<2>& y) {
                                      seen.push_back(t);
                                      EXPECT_NEAR(y[0], std::cos(t), 1e-9);
                                      EXPECT_NEAR(y[1], -std::sin(t), 1e-9);
                                  });
    ASSERT_TRUE(res.ok());
    EXPECT_EQ(seen, ts);
    EXPECT_DOUBLE_EQ(res.t_reached, ts.back());
}

TEST(Dopri5, ToleranceControlsError) {
    const auto run = [](double tol) {
        OdeOptions o;
        o.rtol = o.atol = tol;
        double end = 0.0;
        const std::vector<double> ts{10.0};
        integrate<2>([](double, const Vec<2>& y) { return Vec<2>{y[1], -y[0]}; }, Vec<2>{1.0, 0.0}, 0.0, ts, o,
                     [&](double, const Vec<2>& y) { end = y[0]; });
        return std::abs(end - std::cos(10.0));
    };
    EXPECT_LT(run(1e-10), run(1e-5));
    EXPECT_LT(run(1e-10), 1e-8);
}

TEST(Dopri5, FiniteTimeBlowUpIsStiffnessFailure) {
    // y' = y^2, y(0) = 1 blows up at t = 1
    const std::vector<double> ts{2.0};
    const auto res = integrate<1>([](double, const Vec<1>& y) { return Vec<1>{y[0] * y[0]}; }, Vec<1>{1.0}, 0.0, ts,
                                  OdeOptions{}, [](double, const Vec<1>&) {});
    EXPECT_EQ(res.reason, Reason::StiffnessFailure);
    EXPECT_LT(res.t_reached, 1.0);
    EXPECT_GT(res.t_reached, 0.99);
}

TEST(Dopri5, GuardStopsIntegration) {
    const std::vector<double> ts{10.0};
    const auto res = integrate<1>(
        [](double, const Vec<1>&) { return Vec<1>{-1.0}; }, Vec<1>{1.0}, 0.0, ts, OdeOptions{},
        [](double, const Vec<1>&) {},
        [](double, const Vec<1>& y) { return y[0] < 0.0 ? Reason::StateCollapse : Reason::None; });
    EXPECT_EQ(res.reason, Reason::StateCollapse);
    EXPECT_LT(res.t_reached, 10.0);
}

TEST(Dopri5, StepBudget) {
    OdeOptions o;
    o.max_steps = 5;
    const std::vector<double> ts{100.0};
    const auto res = integrate<2>([](double, const Vec<2>& y) { return Vec<2>{y[1], -y[0]}; }, Vec<2>{1.0, 0.0}, 0.0,
                                  ts, o, [](double, const Vec<2>&) {});
    EXPECT_EQ(res.reason, Reason::StiffnessFailure);
}

TEST(Dopri5, NonFiniteInitialState) {
    const std::vector<double> ts{1.0};
    const auto res = integrate<1>([](double, const Vec<1>& y) { return y; }, Vec<1>{std::nan("")}, 0.0, ts,
                                  OdeOptions{}, [](double, const Vec<1>&) {});
    EXPECT_EQ(res.reason, Reason::NonFinite);
}

TEST(Dopri5, InvalidTolerance) {
    OdeOptions o;
    o.rtol = 0.0;
    const std::vector<double> ts{1.0};
    EXPECT_THROW(integrate<1>([](double, const Vec<1>& y) { return y; }, Vec<1>{1.0}, 0.0, ts, o,
                              [](double, const Vec<1>&) {}),
                 Error);
}

TEST(Dopri5, InitialTimeOutputIsEmitted) {
    const std::vector<double> ts{0.0, 1.0};
    int count = 0;
    integrate<1>([](double, const Vec<1>& y) { return Vec<1>{-y[0]}; }, Vec<1>{2.0}, 0.0, ts, OdeOptions{},
                 [&](double t, const Vec<1>& y) {
                     if (count++ == 0) {
                         EXPECT_EQ(t, 0.0);
                         EXPECT_EQ(y[0], 2.0);
                     }
                 });
    EXPECT_EQ(count, 2);
}
