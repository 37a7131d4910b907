#include "goalinf/planner.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace goalinf {

namespace {

struct OpenEntry {
    CostUnits f = 0;
    CostUnits g = 0;
    uint64_t seq = 0; // insertion order, for deterministic pops
    uint32_t node = 0;
};

struct OpenCmp {
    bool operator()(const OpenEntry& a, const OpenEntry& b) const {
        if (a.f != b.f) return a.f > b.f;
        if (a.g != b.g) return a.g < b.g; // prefer deeper nodes on f ties
        return a.seq > b.seq;
    }
};

} // namespace

CostUnits QSource::heuristic(const WorldState& s) const {
    if (is_terminal(s, goal_)) return 0;
    // Manhattan distance of the principal to the gem plus the pickup, in cost
    // units. Doors, keys and the other agent only ever add cost, so this is
    // admissible and consistent.
    const Cell gem_cell = map_->gem(goal_.gem_slot).cell;
    return kMoveCostUnits * (manhattan(s.principal_pos, gem_cell) + 1);
}

// A* over the joint turn-taking space with the learned heuristic. The learned
// values come from completed searches (h <- optimal - g for expanded states),
// which keeps the heuristic consistent, so closed nodes carry optimal g and
// the solution cost is exact. The solved cache is consulted only for the
// query state itself: feeding exact remainders into the middle of a search
// would break consistency.
QSource::RemainingCost QSource::remaining_cost(const WorldState& s, int64_t budget) {
    if (is_terminal(s, goal_)) return {0, true, true};
    const uint64_t start_key = pack_state(*map_, s);
    if (auto it = solved_.find(start_key); it != solved_.end()) return {it->second, true, true};
    if (unreachable_.count(start_key)) return {0, false, true};

    std::vector<WorldState> states;
    std::vector<CostUnits> g;
    std::vector<int32_t> parent;
    std::vector<uint8_t> closed;
    std::unordered_map<uint64_t, uint32_t> index_of;

    auto intern = [&](const WorldState& w, uint64_t key) {
        auto [it, fresh] = index_of.try_emplace(key, static_cast<uint32_t>(states.size()));
        if (fresh) {
            states.push_back(w);
            g.push_back(std::numeric_limits<CostUnits>::max());
            parent.push_back(-1);
            closed.push_back(0);
        }
        return it->second;
    };

    auto h_of = [&](const WorldState& w, uint64_t key) {
        CostUnits h = heuristic(w);
        if (auto it = h_mem_.find(key); it != h_mem_.end()) h = std::max(h, it->second);
        return h;
    };

    std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenCmp> open;
    uint64_t seq = 0;

    uint32_t root = intern(s, start_key);
    g[root] = 0;
    open.push({h_of(s, start_key), 0, seq++, root});

    int64_t expansions = 0;
    int32_t goal_node = -1;

    while (!open.empty()) {
        OpenEntry top = open.top();
        open.pop();
        if (closed[top.node]) continue;
        closed[top.node] = 1;
        const WorldState cur = states[top.node];

        if (is_terminal(cur, goal_)) {
            goal_node = static_cast<int32_t>(top.node);
            break;
        }
        if (++expansions > budget) {
            // Budget exhausted. Pops are in nondecreasing f order, so the f
            // of the node at hand bounds the optimum from below. Nothing is
            // cached from an incomplete search.
            return {top.f, true, false};
        }

        for (const Action& a : legal_actions(*map_, cur, cur.ply)) {
            WorldState nxt = step(*map_, cur, a);
            uint64_t key = pack_state(*map_, nxt);
            CostUnits ng = g[top.node] + action_cost_units(a);
            uint32_t node = intern(nxt, key);
            if (ng < g[node]) {
                g[node] = ng;
                parent[node] = static_cast<int32_t>(top.node);
                if (!closed[node]) open.push({ng + h_of(nxt, key), ng, seq++, node});
            }
        }
    }

    if (goal_node < 0) {
        // Search space exhausted: the goal is unreachable from every state we
        // expanded (all of them are reachable from s).
        for (size_t i = 0; i < states.size(); ++i)
            if (closed[i]) unreachable_[pack_state(*map_, states[i])] = true;
        return {0, false, true};
    }

    const CostUnits optimal = g[goal_node];

    // Adaptive update: raise h of every expanded state to optimal - g.
    for (size_t i = 0; i < states.size(); ++i) {
        if (!closed[i]) continue;
        CostUnits hv = optimal - g[i];
        if (hv <= 0) continue;
        uint64_t key = pack_state(*map_, states[i]);
        auto [it, fresh] = h_mem_.try_emplace(key, hv);
        if (!fresh && hv > it->second) it->second = hv;
    }
    // States on the found optimal path have proven-optimal remaining cost.
    for (int32_t n = goal_node; n >= 0; n = parent[n]) {
        uint64_t key = pack_state(*map_, states[n]);
        solved_.emplace(key, optimal - g[n]);
    }
    return {optimal, true, true};
}

QValue QSource::q_value(const WorldState& state, const Action& a, const PlannerConfig& cfg) {
    WorldState after = step(*map_, state, a);
    RemainingCost rc = remaining_cost(after, cfg.search_budget);
    QValue out;
    if (!rc.reachable) {
        out.units = kUnreachableQUnits;
        out.value = kUnreachableQ;
        out.exact = true;
        return out;
    }
    out.units = -(action_cost_units(a) + rc.units);
    out.value = out.units * kCostUnit;
    out.exact = rc.exact;
    return out;
}

void softmax_policy(const std::vector<double>& q, const std::vector<CostUnits>& q_units,
                    double temperature, std::vector<double>& probs,
                    std::vector<double>& log_probs) {
    const size_t n = q.size();
    probs.assign(n, 0.0);
    log_probs.assign(n, -std::numeric_limits<double>::infinity());
    if (n == 0) return;

    if (temperature <= 0.0) {
        CostUnits best = *std::max_element(q_units.begin(), q_units.end());
        size_t count = 0;
        for (CostUnits u : q_units)
            if (u == best) ++count;
        for (size_t i = 0; i < n; ++i) {
            if (q_units[i] == best) {
                probs[i] = 1.0 / static_cast<double>(count);
                log_probs[i] = -std::log(static_cast<double>(count));
            }
        }
        return;
    }

    double max_logit = -std::numeric_limits<double>::infinity();
    std::vector<double> logits(n);
    for (size_t i = 0; i < n; ++i) {
        logits[i] = q[i] / temperature;
        max_logit = std::max(max_logit, logits[i]);
    }
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += std::exp(logits[i] - max_logit);
    const double lse = max_logit + std::log(sum);
    for (size_t i = 0; i < n; ++i) {
        log_probs[i] = logits[i] - lse;
        probs[i] = std::exp(log_probs[i]);
    }
}

PolicyQuery QSource::boltzmann_policy(const WorldState& state, const PlannerConfig& cfg) {
    PolicyQuery out;
    out.actions = legal_actions(*map_, state, state.ply);
    out.q_values.reserve(out.actions.size());
    std::vector<CostUnits> units;
    units.reserve(out.actions.size());
    for (const Action& a : out.actions) {
        QValue qv = q_value(state, a, cfg);
        out.q_values.push_back(qv.value);
        units.push_back(qv.units);
        out.exact = out.exact && qv.exact;
    }
    softmax_policy(out.q_values, units, cfg.temperature, out.probs, out.log_probs);
    return out;
}

std::vector<std::pair<Role, Action>> QSource::rollout_optimal(const WorldState& start,
                                                              const PlannerConfig& cfg) {
    std::vector<std::pair<Role, Action>> plan;
    WorldState s = start;
    // Every step strictly reduces the optimal remaining cost, so the plan
    // length is bounded; the guard only trips on internal errors.
    const int step_guard = 100000;
    while (!is_terminal(s, goal_)) {
        std::vector<Action> actions = legal_actions(*map_, s, s.ply);
        int best_idx = -1;
        CostUnits best_units = std::numeric_limits<CostUnits>::min();
        for (size_t i = 0; i < actions.size(); ++i) {
            QValue qv = q_value(s, actions[i], cfg);
            if (qv.units > best_units) {
                best_units = qv.units;
                best_idx = static_cast<int>(i);
            }
        }
        if (best_idx < 0 || best_units == kUnreachableQUnits)
            throw UnreachableGoalError("goal " + goal_.gem_id + " is unreachable from this state");
        plan.emplace_back(s.ply, actions[best_idx]);
        s = step(*map_, s, actions[best_idx]);
        if (static_cast<int>(plan.size()) > step_guard)
            throw Error("rollout failed to terminate");
    }
    return plan;
}

} // namespace goalinf
