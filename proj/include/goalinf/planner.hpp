#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "goalinf/gridworld.hpp"

namespace goalinf {

struct PlannerConfig {
    double temperature = 1.0;      // T = 0 means argmax
    int64_t search_budget = 100000; // max node expansions per A* query
    std::string heuristic = "manhattan";
};

// Q for unreachable goals: finite so softmax stays well defined in log space.
constexpr CostUnits kUnreachableQUnits = -5'000'000; // -1e6 after scaling
constexpr double kUnreachableQ = kUnreachableQUnits * kCostUnit;

struct QValue {
    double value = 0.0;       // -(cost of action + optimal remaining cost)
    CostUnits units = 0;      // same, in exact 0.2 cost units
    bool exact = true;        // false when the search budget ran out; value is
                              // then the best lower bound found
};

struct PolicyQuery {
    std::vector<Action> actions;   // legal actions in canonical order
    std::vector<double> q_values;  // aligned with actions
    std::vector<double> probs;     // softmax at cfg.temperature, sums to 1
    std::vector<double> log_probs; // log of probs, computed in log space
    bool exact = true;

    int index_of(const Action& a) const {
        for (size_t i = 0; i < actions.size(); ++i)
            if (actions[i] == a) return static_cast<int>(i);
        return -1;
    }
};

// Per-goal incremental Q provider. A* searches over the joint turn-taking
// state space; completed searches raise stored heuristic values (adaptive A*)
// and cache proven-optimal remaining costs, so later queries get cheaper
// while staying exact. Not thread-safe: callers serialize access per QSource;
// distinct goals' QSources are independent.
class QSource {
  public:
    QSource(const GridMap& map, Goal goal) : map_(&map), goal_(std::move(goal)) {}

    const Goal& goal() const { return goal_; }

    // Q(s, a) = -(cost(a) + optimal cost from step(s, a) to the goal), with
    // both agents' action costs (waits included) counted. Unreachable goals
    // get the finite sentinel.
    QValue q_value(const WorldState& state, const Action& a, const PlannerConfig& cfg);

    // Softmax over legal actions of Q/T at temperature cfg.temperature;
    // uniform over the exact argmax set at T = 0.
    PolicyQuery boltzmann_policy(const WorldState& state, const PlannerConfig& cfg);

    // Deterministic T=0 rollout to a terminal state; ties broken by the
    // canonical action order. Throws UnreachableGoalError.
    std::vector<std::pair<Role, Action>> rollout_optimal(const WorldState& start,
                                                         const PlannerConfig& cfg);

    size_t heuristic_memory_size() const { return h_mem_.size(); }
    size_t solved_cache_size() const { return solved_.size(); }

  private:
    struct RemainingCost {
        CostUnits units = 0;
        bool reachable = true;
        bool exact = true;
    };

    RemainingCost remaining_cost(const WorldState& s, int64_t budget);
    CostUnits heuristic(const WorldState& s) const;

    const GridMap* map_;
    Goal goal_;
    std::unordered_map<uint64_t, CostUnits> h_mem_;      // learned h, only ever raised
    std::unordered_map<uint64_t, CostUnits> solved_;     // proven optimal remaining cost
    std::unordered_map<uint64_t, bool> unreachable_;     // proven dead states
};

// Softmax of q (already divided by nothing; raw Q values) at temperature T,
// written for reuse by tests. Fills probs and log_probs. T = 0 takes the
// argmax set from exact integer units.
void softmax_policy(const std::vector<double>& q, const std::vector<CostUnits>& q_units,
                    double temperature, std::vector<double>& probs,
                    std::vector<double>& log_probs);

} // namespace goalinf
