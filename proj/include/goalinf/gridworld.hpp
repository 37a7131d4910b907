#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "goalinf/types.hpp"

namespace goalinf {

struct Item {
    ItemKind kind = ItemKind::key;
    Color color = Color::red;
    std::string id;  // unique within a map, e.g. "key2", "door1", "gem3"
    Cell cell;       // initial placement (doors never move, keys move by pickup/handover)
};

// Packed-state and cache machinery rely on these caps; load_environment enforces them.
constexpr int kMaxCells = 256;
constexpr int kMaxKeys = 8;
constexpr int kMaxDoors = 8;
constexpr int kMaxGems = 8;

struct GridMap {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> wall;  // row-major, 1 = wall
    std::vector<Item> items;
    Cell principal_start;
    Cell assistant_start;

    // Per-kind slot tables, filled by finalize(). A slot is the index used in
    // WorldState bitfields; slot_of[item] maps back.
    std::vector<int> key_items, door_items, gem_items;
    std::vector<int> slot_of;              // item index -> slot within its kind
    std::vector<int> item_at;              // cell index -> item index or -1

    bool in_bounds(const Cell& c) const {
        return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height;
    }
    bool is_wall(const Cell& c) const { return wall[cell_index(c)] != 0; }
    int cell_index(const Cell& c) const { return c.y * width + c.x; }
    Cell cell_at(int idx) const { return Cell{idx % width, idx / width}; }

    int num_keys() const { return static_cast<int>(key_items.size()); }
    int num_doors() const { return static_cast<int>(door_items.size()); }
    int num_gems() const { return static_cast<int>(gem_items.size()); }

    const Item& key(int slot) const { return items[key_items[slot]]; }
    const Item& door(int slot) const { return items[door_items[slot]]; }
    const Item& gem(int slot) const { return items[gem_items[slot]]; }

    // -1 if no such id
    int find_item(const std::string& id) const;
    int find_gem_slot(const std::string& gem_id) const;

    // Builds slot tables and item_at, and checks structural invariants.
    // Throws ValidationError on duplicate ids, out-of-bounds placements,
    // overlapping items, agents on walls, or exceeded size caps.
    void finalize();
};

enum class KeyLoc : uint8_t { on_floor = 0, held_by_principal = 1, held_by_assistant = 2, consumed = 3 };

struct WorldState {
    Cell principal_pos;
    Cell assistant_pos;
    Role ply = Role::principal;
    int8_t gem_held = -1;  // gem slot held by the principal, -1 if none
    std::array<KeyLoc, kMaxKeys> key_loc{};
    uint8_t door_open = 0;  // bit per door slot

    Cell pos(Role r) const { return r == Role::principal ? principal_pos : assistant_pos; }
    bool is_door_open(int slot) const { return (door_open >> slot) & 1; }
    bool holds_key(Role r, int key_slot) const {
        return key_loc[key_slot] == (r == Role::principal ? KeyLoc::held_by_principal
                                                          : KeyLoc::held_by_assistant);
    }
};

WorldState initial_state(const GridMap& map);

// Canonical 64-bit encoding of the dynamic state, used as a cache key.
uint64_t pack_state(const GridMap& map, const WorldState& s);

// Verbs in tie-break order; comparisons on Action use this order first.
enum class Verb : uint8_t { up = 0, down, left, right, pickup, unlock, handover, wait };

const char* to_string(Verb v);

struct Action {
    Verb verb = Verb::wait;
    int arg0 = -1;  // item index: pickup target / unlock key / handover key
    int arg1 = -1;  // unlock door

    friend bool operator==(const Action& a, const Action& b) {
        return a.verb == b.verb && a.arg0 == b.arg0 && a.arg1 == b.arg1;
    }
};

std::string to_string(const GridMap& map, const Action& a);

// Parses "up", "wait", "pickup key1", "unlock key1 door1", "handover key2".
// Throws ParseError on unknown verbs/ids or arity mismatch.
Action parse_action(const GridMap& map, const std::string& text);

double action_cost(const Action& a);
CostUnits action_cost_units(const Action& a);

// All actions legal for `agent` at `state`, in canonical tie-break order
// (verb, then argument ids lexically). Requires agent == state.ply.
std::vector<Action> legal_actions(const GridMap& map, const WorldState& state, Role agent);

// Deterministic transition; advances the ply. Throws IllegalActionError
// naming the violated precondition.
WorldState step(const GridMap& map, const WorldState& state, const Action& a);

struct Goal {
    std::string gem_id;
    int gem_slot = -1;
};

Goal make_goal(const GridMap& map, const std::string& gem_id);

inline bool is_terminal(const WorldState& s, const Goal& g) {
    return s.gem_held == g.gem_slot;
}

} // namespace goalinf
