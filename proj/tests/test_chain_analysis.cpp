#include "corpus.hpp"
#include "oracles.hpp"

#include "pips/chain_analysis.hpp"
#include "pips/fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pips;
using fixtures::kStay;
using fixtures::kToggle;

namespace {

using Classes = std::vector<std::vector<State>>;

void expect_rows_near(const ValueRow& a, const ValueRow& b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "state " << i;
}

} // namespace

TEST(CommunicatingClasses, Toggle2StayStay) {
    const auto p = communicating_classes(fixtures::toggle2(), {kStay, kStay});
    EXPECT_EQ(p.classes, (Classes{{0}, {1}}));
    EXPECT_EQ(p.recurrent, (std::vector<bool>{true, true}));
}

TEST(CommunicatingClasses, Toggle2ToggleToggle) {
    const auto p = communicating_classes(fixtures::toggle2(), {kToggle, kToggle});
    EXPECT_EQ(p.classes, (Classes{{0, 1}}));
    EXPECT_EQ(p.recurrent, (std::vector<bool>{true}));
}

TEST(CommunicatingClasses, Toggle2ToggleStay) {
    const auto p = communicating_classes(fixtures::toggle2(), {kToggle, kStay});
    EXPECT_EQ(p.classes, (Classes{{0}, {1}}));
    EXPECT_EQ(p.recurrent, (std::vector<bool>{false, true}));
    EXPECT_EQ(p.class_containing(0), (std::vector<State>{0}));
}

TEST(CommunicatingClasses, AgreesWithReachabilityOracle) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto m = seed % 2 ? corpus::random_instance(seed).model : corpus::absorbing_instance(seed).model;
        RngStream rng(seed);
        StationaryPolicy phi(m.num_states());
        for (State x = 0; x < phi.size(); ++x) phi[x] = rng.below(m.num_actions(x));
        const auto part = communicating_classes(m, phi);
        const auto reach = oracle::reachability(m, phi);
        const std::size_t n = m.num_states();
        for (State x = 0; x < n; ++x)
            for (State y = 0; y < n; ++y)
                EXPECT_EQ(part.class_of[x] == part.class_of[y], reach[x][y] && reach[y][x]);
        for (std::size_t c = 0; c < part.size(); ++c) {
            bool closed = true;
            for (State x : part.classes[c])
                for (State y = 0; y < n; ++y)
                    if (reach[x][y] && part.class_of[y] != c) closed = false;
            EXPECT_EQ(part.recurrent[c], closed);
            EXPECT_TRUE(std::is_sorted(part.classes[c].begin(), part.classes[c].end()));
            if (c > 0) {
                EXPECT_LT(part.classes[c - 1].front(), part.classes[c].front());
            }
        }
    }
}

TEST(CommunicatingClasses, RejectsWrongShape) {
    EXPECT_THROW(communicating_classes(fixtures::toggle2(), {kStay}), PreconditionError);
    EXPECT_THROW(communicating_classes(fixtures::toggle2(), {kStay, 5}), PreconditionError);
}

TEST(IsMdpCommunicating, Toggle2ExhaustiveFindsStayStay) {
    const auto v = is_mdp_communicating(fixtures::toggle2(), CommunicatingMode::kExhaustive);
    EXPECT_EQ(v.verdict, Verdict::kNo);
    ASSERT_TRUE(v.witness);
    EXPECT_EQ(*v.witness, (StationaryPolicy{kStay, kStay}));
}

TEST(IsMdpCommunicating, SufficientModeIsConservative) {
    EXPECT_EQ(is_mdp_communicating(fixtures::toggle2(), CommunicatingMode::kSufficient).verdict,
              Verdict::kUnknown);
    const auto positive = corpus::positive_instance(3).model;
    EXPECT_EQ(is_mdp_communicating(positive, CommunicatingMode::kSufficient).verdict, Verdict::kYes);
    EXPECT_EQ(is_mdp_communicating(positive, CommunicatingMode::kExhaustive).verdict, Verdict::kYes);
}

TEST(IsMdpCommunicating, ExhaustiveAgreesWithOracle) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const auto m = corpus::random_instance(seed).model;
        bool expected = true;
        StationaryPolicy phi(m.num_states(), 0);
        for (bool more = true; more;) {
            const auto reach = oracle::reachability(m, phi);
            for (const auto& row : reach)
                for (bool r : row) expected = expected && r;
            State x = 0;
            for (; x < phi.size(); ++x) {
                if (++phi[x] < m.num_actions(x)) break;
                phi[x] = 0;
            }
            more = x < phi.size();
        }
        const auto v = is_mdp_communicating(m, CommunicatingMode::kExhaustive);
        EXPECT_EQ(v.verdict, expected ? Verdict::kYes : Verdict::kNo) << "seed " << seed;
        if (v.witness) {
            EXPECT_GT(communicating_classes(m, *v.witness).size(), 1u);
        }
    }
}

TEST(IsMdpCommunicating, CapIsEnforced) {
    EXPECT_THROW(is_mdp_communicating(fixtures::toggle2(), CommunicatingMode::kExhaustive, 3), PreconditionError);
    EXPECT_NO_THROW(is_mdp_communicating(fixtures::toggle2(), CommunicatingMode::kExhaustive, 4));
}

TEST(EvaluateStationaryInfinite, Toggle2) {
    const auto m = fixtures::toggle2();
    expect_rows_near(evaluate_stationary_infinite(m, {kToggle, kStay}), {3, 4}, 1e-12);
    expect_rows_near(evaluate_stationary_infinite(m, {kStay, kStay}), {0, 4}, 1e-12);
    expect_rows_near(evaluate_stationary_infinite(m, {kToggle, kToggle}), {4.0 / 3.0, 2.0 / 3.0}, 1e-12);
}

TEST(EvaluateStationaryInfinite, MatchesFixedPointIteration) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto m = corpus::random_instance(seed).model;
        RngStream rng(seed);
        StationaryPolicy phi(m.num_states());
        for (State x = 0; x < phi.size(); ++x) phi[x] = rng.below(m.num_actions(x));
        const auto v = evaluate_stationary_infinite(m, phi);
        expect_rows_near(v, oracle::iterate_stationary(m, phi), 1e-9);
        EXPECT_LE(bellman_residual(m, phi, v), 1e-10);
    }
}

TEST(SolveInfiniteOptimal, Toggle2) {
    const auto sol = solve_infinite_optimal(fixtures::toggle2());
    expect_rows_near(sol.values, {3, 4}, 1e-12);
    EXPECT_EQ(sol.policy, (StationaryPolicy{kToggle, kStay}));
    EXPECT_THROW(solve_infinite_optimal(fixtures::toggle2(), 0.0), PreconditionError);
}

TEST(SolveInfiniteOptimal, ConstantRewardGivesGeometricSum) {
    const MdpModel m("flat", 0.75, 3, {2, 2, 2}, {{1, 1}, {1, 1}, {1, 1}},
                     {{{0.5, 0.5, 0}, {0, 0, 1}}, {{1, 0, 0}, {0, 1, 0}}, {{0.2, 0.3, 0.5}, {0, 0, 1}}});
    const auto sol = solve_infinite_optimal(m);
    expect_rows_near(sol.values, {4, 4, 4}, 1e-12);
    EXPECT_EQ(sol.policy, (StationaryPolicy{0, 0, 0}));
}

TEST(SolveInfiniteOptimal, MatchesEnumeration) {
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        const auto m = seed % 2 ? corpus::random_instance(seed).model : corpus::absorbing_instance(seed).model;
        const auto sol = solve_infinite_optimal(m);
        expect_rows_near(sol.values, oracle::enumerate_infinite_optimal(m), 1e-9);
        EXPECT_LE(optimality_residual(m, sol.values), 1e-10);
        expect_rows_near(evaluate_stationary_infinite(m, sol.policy), sol.values, 1e-9);
    }
}

TEST(RollingHorizonError, Toggle2IsExactAtEveryHorizon) {
    const std::vector<std::size_t> hs{1, 2, 3, 5, 8};
    for (const auto& e : rolling_horizon_error(fixtures::toggle2(), hs)) EXPECT_LE(e.error, 1e-12);
}

TEST(RollingHorizonError, OptimalTerminalGivesZeroError) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = corpus::random_instance(seed).model;
        const auto vstar = solve_infinite_optimal(m).values;
        const std::vector<std::size_t> hs{1, 2, 4};
        for (const auto& e : rolling_horizon_error(m, hs, vstar)) EXPECT_LE(e.error, 1e-9) << seed;
    }
}

TEST(RollingHorizonError, StaysUnderGeometricEnvelope) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto m = corpus::random_instance(seed).model;
        const double c = m.max_abs_reward();
        const double g = m.gamma();
        std::vector<std::size_t> hs(10);
        for (std::size_t i = 0; i < hs.size(); ++i) hs[i] = i + 1;
        for (const auto& e : rolling_horizon_error(m, hs))
            EXPECT_LE(e.error, 2 * std::pow(g, static_cast<double>(e.horizon)) * c / ((1 - g) * (1 - g)) + 1e-9);
    }
}

TEST(RollingHorizonError, RejectsBadHorizonLists) {
    const auto m = fixtures::toggle2();
    EXPECT_THROW(rolling_horizon_error(m, std::vector<std::size_t>{}), PreconditionError);
    EXPECT_THROW(rolling_horizon_error(m, std::vector<std::size_t>{0, 1}), PreconditionError);
    EXPECT_THROW(rolling_horizon_error(m, std::vector<std::size_t>{2, 2}), PreconditionError);
}
