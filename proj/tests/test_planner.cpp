#include <cmath>

#include "doctest.h"
#include "goalinf/planner.hpp"
#include "helpers.hpp"

using namespace goalinf;
using namespace goalinf::testing;

TEST_CASE("q_value: corridor two moves from the gem") {
    GridMap map = make_map(kCorridorMap);
    Goal goal = make_goal(map, "gem1");
    QSource qs(map, goal);
    PlannerConfig cfg;

    WorldState s = initial_state(map);
    Action toward{Verb::right};
    QValue qv = qs.q_value(s, toward, cfg);
    CHECK(qv.exact);

    // Oracle: move(1) + wait(0.6) + move(1) + wait(0.6) + pickup(1) = 4.2
    OracleIndex oracle_idx(map, goal);
    CostUnits oracle = oracle_idx.q_units(s, toward);
    CHECK(qv.units == oracle);
    CHECK(qv.units == -21);
    CHECK(qv.value == doctest::Approx(-4.2).epsilon(1e-12));
}

TEST_CASE("q_value: pickup while standing on the goal gem is -1.0") {
    GridMap map = make_map(kCorridorMap);
    Goal goal = make_goal(map, "gem1");
    QSource qs(map, goal);
    WorldState s = initial_state(map);
    s.principal_pos = Cell{3, 1};
    int gem = map.find_item("gem1");
    QValue qv = qs.q_value(s, Action{Verb::pickup, gem}, PlannerConfig{});
    CHECK(qv.value == -1.0);
    CHECK(qv.units == -5);
}

TEST_CASE("q_value: sealed goal yields the finite unreachable sentinel") {
    GridMap map = make_map(kSealedMap);
    Goal goal = make_goal(map, "gem1");
    QSource qs(map, goal);
    OracleIndex oracle(map, goal);
    WorldState s = initial_state(map);
    for (const Action& a : legal_actions(map, s, s.ply)) {
        QValue qv = qs.q_value(s, a, PlannerConfig{});
        CHECK(qv.units == kUnreachableQUnits);
        CHECK(qv.value == -1e6);
        CHECK(oracle.q_units(s, a) == kUnreachableQUnits);
    }
}

TEST_CASE("q_value matches exhaustive Dijkstra on random mazes") {
    std::mt19937_64 rng(2024);
    PlannerConfig cfg;
    for (int maze = 0; maze < 8; ++maze) {
        GridMap map = random_maze(rng);
        for (const std::string& gem_id : {std::string("gem1"), std::string("gem2")}) {
            Goal goal = make_goal(map, gem_id);
            QSource qs(map, goal);
            OracleIndex oracle(map, goal);
            // initial state plus a few random-walk states
            std::vector<WorldState> states = {initial_state(map)};
            for (int i = 0; i < 4; ++i)
                states.push_back(random_walk(map, 1 + static_cast<int>(rng() % 12), rng));
            for (const WorldState& s : states) {
                if (is_terminal(s, goal)) continue;
                for (const Action& a : legal_actions(map, s, s.ply)) {
                    QValue qv = qs.q_value(s, a, cfg);
                    REQUIRE(qv.exact);
                    CHECK(qv.units == oracle.q_units(s, a));
                }
            }
        }
    }
}

TEST_CASE("adaptive consistency: interleaved queries never corrupt results") {
    std::mt19937_64 rng(55);
    PlannerConfig cfg;
    GridMap map = make_map(kTwoDoorMap);
    for (const std::string& gem_id : {std::string("gem3"), std::string("gem4")}) {
        Goal goal = make_goal(map, gem_id);
        QSource qs(map, goal);
        OracleIndex oracle(map, goal);
        std::vector<std::pair<WorldState, Action>> queries;
        for (int i = 0; i < 30; ++i) {
            WorldState s = random_walk(map, static_cast<int>(rng() % 16), rng);
            if (is_terminal(s, goal)) continue;
            auto actions = legal_actions(map, s, s.ply);
            queries.emplace_back(s, actions[rng() % actions.size()]);
        }
        // warm the caches in one order, then re-check everything
        for (const auto& [s, a] : queries) qs.q_value(s, a, cfg);
        for (const auto& [s, a] : queries) {
            QValue qv = qs.q_value(s, a, cfg);
            CHECK(qv.units == oracle.q_units(s, a));
        }
        CHECK(qs.heuristic_memory_size() > 0);
    }
}

TEST_CASE("softmax: worked examples") {
    std::vector<double> q = {-1.0, -2.0};
    std::vector<CostUnits> units = {-5, -10};
    std::vector<double> probs, log_probs;
    softmax_policy(q, units, 1.0, probs, log_probs);
    CHECK(probs[0] == doctest::Approx(0.7311).epsilon(1e-3));
    CHECK(probs[1] == doctest::Approx(0.2689).epsilon(1e-3));

    softmax_policy({-3.0, -3.0}, {-15, -15}, 1.0, probs, log_probs);
    CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(0.5).epsilon(1e-12));

    // argmax limit
    softmax_policy({-1.0, -2.0}, {-5, -10}, 0.0, probs, log_probs);
    CHECK(probs[0] == 1.0);
    CHECK(probs[1] == 0.0);
}

TEST_CASE("softmax properties: normalization and shift invariance") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> qdist(-40.0, 0.0);
    std::uniform_real_distribution<double> tdist(0.05, 16.0);
    for (int it = 0; it < 1000; ++it) {
        size_t n = 2 + rng() % 6;
        std::vector<double> q(n);
        std::vector<CostUnits> units(n, 0);
        for (double& v : q) v = qdist(rng);
        double T = tdist(rng);
        std::vector<double> probs, log_probs;
        softmax_policy(q, units, T, probs, log_probs);
        double sum = 0.0;
        for (double p : probs) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

        double shift = qdist(rng);
        std::vector<double> q2 = q;
        for (double& v : q2) v += shift;
        std::vector<double> probs2, log_probs2;
        softmax_policy(q2, units, T, probs2, log_probs2);
        for (size_t i = 0; i < n; ++i)
            CHECK(probs[i] == doctest::Approx(probs2[i]).epsilon(1e-9));
    }
}

TEST_CASE("softmax property: odds of the better action never grow with temperature") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> qdist(-30.0, 0.0);
    for (int it = 0; it < 1000; ++it) {
        double qa = qdist(rng), qb = qdist(rng);
        if (qa == qb) continue;
        if (qa < qb) std::swap(qa, qb);
        double prev_ratio = std::numeric_limits<double>::infinity();
        for (double T : {0.0625, 0.25, 1.0, 4.0, 16.0}) {
            std::vector<double> probs, log_probs;
            softmax_policy({qa, qb}, {0, 0}, T, probs, log_probs);
            double ratio = probs[0] / probs[1];
            CHECK(ratio <= prev_ratio * (1.0 + 1e-12));
            prev_ratio = ratio;
        }
    }
}

TEST_CASE("boltzmann_policy: support equals legal actions and sums to one") {
    GridMap map = make_map(kTwoDoorMap);
    Goal goal = make_goal(map, "gem3");
    QSource qs(map, goal);
    PlannerConfig cfg;
    WorldState s = initial_state(map);
    PolicyQuery pq = qs.boltzmann_policy(s, cfg);
    CHECK(pq.actions.size() == legal_actions(map, s, s.ply).size());
    double sum = 0.0;
    for (double p : pq.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    for (size_t i = 0; i < pq.probs.size(); ++i)
        CHECK(std::exp(pq.log_probs[i]) == doctest::Approx(pq.probs[i]).epsilon(1e-12));
}

TEST_CASE("rollout: already-terminal start yields an empty plan") {
    GridMap map = make_map(kCorridorMap);
    Goal goal = make_goal(map, "gem1");
    QSource qs(map, goal);
    WorldState s = initial_state(map);
    s.gem_held = static_cast<int8_t>(goal.gem_slot);
    CHECK(qs.rollout_optimal(s, PlannerConfig{}).empty());
}

TEST_CASE("rollout: cost equals the oracle optimum and is reproducible") {
    std::mt19937_64 rng(77);
    PlannerConfig cfg;
    int checked = 0;
    for (int maze = 0; maze < 8; ++maze) {
        GridMap map = random_maze(rng);
        for (const std::string& gem_id : {std::string("gem1"), std::string("gem2")}) {
            Goal goal = make_goal(map, gem_id);
            WorldState start = initial_state(map);
            OracleIndex oracle_idx(map, goal);
            auto oracle = oracle_idx.remaining(start);
            QSource qs(map, goal);
            if (!oracle) {
                CHECK_THROWS_AS(qs.rollout_optimal(start, cfg), UnreachableGoalError);
                continue;
            }
            auto plan = qs.rollout_optimal(start, cfg);
            CostUnits total = 0;
            WorldState s = start;
            for (const auto& [role, action] : plan) {
                CHECK(role == s.ply);
                total += action_cost_units(action);
                s = step(map, s, action);
            }
            CHECK(is_terminal(s, goal));
            CHECK(total == *oracle);

            QSource qs2(map, goal);
            auto plan2 = qs2.rollout_optimal(start, cfg);
            REQUIRE(plan.size() == plan2.size());
            for (size_t i = 0; i < plan.size(); ++i) CHECK(plan[i].second == plan2[i].second);
            ++checked;
        }
    }
    CHECK(checked >= 6);
}

TEST_CASE("rollout: two-door layout routes the assistant through the blue door") {
    GridMap map = make_map(kTwoDoorMap);
    Goal goal = make_goal(map, "gem3");
    QSource qs(map, goal);
    auto plan = qs.rollout_optimal(initial_state(map), PlannerConfig{});
    bool unlocked_blue = false;
    int door2 = map.find_item("door2");
    for (const auto& [role, action] : plan)
        if (role == Role::assistant && action.verb == Verb::unlock && action.arg1 == door2)
            unlocked_blue = true;
    CHECK(unlocked_blue);
}

TEST_CASE("rollout: pinched corridor forces a key handover") {
    GridMap map = make_map(kHandoverMap);
    Goal goal = make_goal(map, "gem1");
    QSource qs(map, goal);
    auto plan = qs.rollout_optimal(initial_state(map), PlannerConfig{});
    bool handed_over = false;
    for (const auto& [role, action] : plan)
        if (role == Role::assistant && action.verb == Verb::handover) handed_over = true;
    CHECK(handed_over);
}

TEST_CASE("budget exhaustion returns a lower-bound estimate, flagged inexact") {
    GridMap map = make_map(kTwoDoorMap);
    Goal goal = make_goal(map, "gem3");
    WorldState s = initial_state(map);
    Action a{Verb::right};

    QSource exact_qs(map, goal);
    PlannerConfig full;
    QValue truth = exact_qs.q_value(s, a, full);
    REQUIRE(truth.exact);

    QSource budget_qs(map, goal);
    PlannerConfig tiny;
    tiny.search_budget = 3;
    QValue approx = budget_qs.q_value(s, a, tiny);
    CHECK(!approx.exact);
    CHECK(approx.value >= truth.value); // lower bound on cost = upper bound on Q
}

TEST_CASE("rollout total cost equals -max_a Q(start, a)") {
    GridMap map = make_map(kTwoDoorMap);
    Goal goal = make_goal(map, "gem2");
    QSource qs(map, goal);
    PlannerConfig cfg;
    WorldState start = initial_state(map);
    CostUnits best = std::numeric_limits<CostUnits>::min();
    for (const Action& a : legal_actions(map, start, start.ply))
        best = std::max(best, qs.q_value(start, a, cfg).units);
    auto plan = qs.rollout_optimal(start, cfg);
    CostUnits total = 0;
    for (const auto& [role, action] : plan) total += action_cost_units(action);
    CHECK(total == -best);
}
