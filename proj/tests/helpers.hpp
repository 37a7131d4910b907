#pragma once

// Shared fixtures and independent oracles for the test suite. The oracles
// here deliberately avoid the planner: plain Dijkstra over the joint
// turn-taking space, driven only by the gridworld primitives, so that planner
// results can be checked against an implementation that shares none of its
// search machinery.

#include <optional>
#include <queue>
#include <random>
#include <unordered_map>

#include "goalinf/gridworld.hpp"
#include "goalinf/io.hpp"

namespace goalinf::testing {

inline GridMap make_map(const std::string& text) { return parse_map_text(text); }

// Principal two moves from the only gem, assistant in a spur below.
inline const char* kCorridorMap = R"(######
#h.1.#
#r...#
######

legend:
1 = gem1 red
)";

// Reconstruction of the two-door layout: the green gem sits in the open with
// the agents and both keys; the red gem is sealed behind the red door, the
// yellow and blue gems behind the blue door.
inline const char* kTwoDoorMap = R"(#############
#h......#.1.#
#.......A...#
#..4....#...#
#.......#####
#..a.b..#.2.#
#....r..B...#
#.......#.3.#
#############

legend:
A = door1 red
B = door2 blue
a = key1 red
b = key2 blue
1 = gem1 red
2 = gem2 yellow
3 = gem3 blue
4 = gem4 green
)";

// The only efficient route to the gem is a handover: the assistant fetches
// the blue key, but the door can only be approached from the principal's
// corridor, which the principal blocks.
inline const char* kHandoverMap = R"(########
#r.a...#
#.####.#
#h.B.1.#
########

legend:
a = key1 blue
B = door1 blue
1 = gem1 green
)";

// Gem sealed behind a blue door with no blue key anywhere.
inline const char* kSealedMap = R"(######
#h.B1#
#r.###
######

legend:
B = door1 blue
1 = gem1 red
)";

// Exhaustive Dijkstra oracle for one (map, goal): enumerates every state
// reachable from the given roots, then runs a single backward Dijkstra from
// all terminal states over the reversed transition graph. Remaining costs for
// the whole space come out at once, in exact 0.2 units.
class OracleIndex {
  public:
    OracleIndex(const GridMap& map, Goal goal) : map_(&map), goal_(std::move(goal)) {
        add_root(initial_state(map));
    }

    // nullopt when the goal is unreachable from s
    std::optional<CostUnits> remaining(const WorldState& s) {
        ensure(s);
        CostUnits d = dist_[index_.at(pack_state(*map_, s))];
        if (d == kInf) return std::nullopt;
        return d;
    }

    // kUnreachableQUnits sentinel matches the planner's contract
    CostUnits q_units(const WorldState& s, const Action& a) {
        WorldState after = step(*map_, s, a);
        auto rem = remaining(after);
        if (!rem) return CostUnits{-5'000'000};
        return -(action_cost_units(a) + *rem);
    }

  private:
    static constexpr CostUnits kInf = std::numeric_limits<CostUnits>::max();

    void add_root(const WorldState& root) {
        uint64_t key = pack_state(*map_, root);
        if (index_.count(key)) return;
        // forward BFS to enumerate everything reachable from the root
        std::vector<uint32_t> frontier = {intern(root, key)};
        while (!frontier.empty()) {
            std::vector<uint32_t> next;
            for (uint32_t u : frontier) {
                if (expanded_[u]) continue;
                expanded_[u] = 1;
                const WorldState su = states_[u];
                for (const Action& a : legal_actions(*map_, su, su.ply)) {
                    WorldState sv = step(*map_, su, a);
                    uint64_t kv = pack_state(*map_, sv);
                    auto it = index_.find(kv);
                    uint32_t v = it == index_.end() ? intern(sv, kv) : it->second;
                    rev_edges_[v].emplace_back(u, action_cost_units(a));
                    if (!expanded_[v]) next.push_back(v);
                }
            }
            frontier = std::move(next);
        }
        solve();
    }

    uint32_t intern(const WorldState& s, uint64_t key) {
        auto [it, fresh] = index_.try_emplace(key, static_cast<uint32_t>(states_.size()));
        if (fresh) {
            states_.push_back(s);
            expanded_.push_back(0);
            rev_edges_.emplace_back();
        }
        return it->second;
    }

    void solve() {
        dist_.assign(states_.size(), kInf);
        using Entry = std::pair<CostUnits, uint32_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
        for (uint32_t i = 0; i < states_.size(); ++i) {
            if (is_terminal(states_[i], goal_)) {
                dist_[i] = 0;
                open.push({0, i});
            }
        }
        while (!open.empty()) {
            auto [d, v] = open.top();
            open.pop();
            if (d > dist_[v]) continue;
            for (const auto& [u, cost] : rev_edges_[v]) {
                if (d + cost < dist_[u]) {
                    dist_[u] = d + cost;
                    open.push({dist_[u], u});
                }
            }
        }
    }

    void ensure(const WorldState& s) {
        if (!index_.count(pack_state(*map_, s))) add_root(s);
    }

    const GridMap* map_;
    Goal goal_;
    std::unordered_map<uint64_t, uint32_t> index_;
    std::vector<WorldState> states_;
    std::vector<uint8_t> expanded_;
    std::vector<std::vector<std::pair<uint32_t, CostUnits>>> rev_edges_;
    std::vector<CostUnits> dist_;
};

inline std::optional<CostUnits> oracle_remaining(OracleIndex& oracle, const WorldState& s) {
    return oracle.remaining(s);
}

inline CostUnits oracle_q_units(OracleIndex& oracle, const WorldState& s, const Action& a) {
    return oracle.q_units(s, a);
}

// Random solvable-ish mazes up to 7x7 with 2 gems and 1-2 key/door pairs.
// Not all goals are guaranteed reachable; tests compare against the oracle
// either way.
inline GridMap random_maze(std::mt19937_64& rng) {
    for (;;) {
        int w = 5 + static_cast<int>(rng() % 3); // 5..7
        int h = 5 + static_cast<int>(rng() % 3);
        GridMap map;
        map.width = w;
        map.height = h;
        map.wall.assign(w * h, 0);
        for (int x = 0; x < w; ++x) {
            map.wall[x] = 1;
            map.wall[(h - 1) * w + x] = 1;
        }
        for (int y = 0; y < h; ++y) {
            map.wall[y * w] = 1;
            map.wall[y * w + w - 1] = 1;
        }
        std::vector<Cell> floor;
        for (int y = 1; y < h - 1; ++y)
            for (int x = 1; x < w - 1; ++x) {
                if (rng() % 100 < 20) {
                    map.wall[y * w + x] = 1;
                } else {
                    floor.push_back(Cell{x, y});
                }
            }
        int pairs = 1 + static_cast<int>(rng() % 2);
        size_t needed = 2 /*agents*/ + 2 /*gems*/ + 2 * static_cast<size_t>(pairs);
        if (floor.size() < needed + 2) continue;
        std::shuffle(floor.begin(), floor.end(), rng);
        size_t idx = 0;
        map.principal_start = floor[idx++];
        map.assistant_start = floor[idx++];
        map.items.push_back(Item{ItemKind::gem, Color::red, "gem1", floor[idx++]});
        map.items.push_back(Item{ItemKind::gem, Color::green, "gem2", floor[idx++]});
        const Color pair_colors[2] = {Color::blue, Color::yellow};
        for (int p = 0; p < pairs; ++p) {
            map.items.push_back(
                Item{ItemKind::key, pair_colors[p], "key" + std::to_string(p + 1), floor[idx++]});
            map.items.push_back(
                Item{ItemKind::door, pair_colors[p], "door" + std::to_string(p + 1), floor[idx++]});
        }
        try {
            map.finalize();
        } catch (const ValidationError&) {
            continue;
        }
        return map;
    }
}

// A legal random walk of n plies from the initial state; useful for sampling
// reachable states.
inline WorldState random_walk(const GridMap& map, int plies, std::mt19937_64& rng) {
    WorldState s = initial_state(map);
    for (int i = 0; i < plies; ++i) {
        auto actions = legal_actions(map, s, s.ply);
        s = step(map, s, actions[rng() % actions.size()]);
    }
    return s;
}

} // namespace goalinf::testing
