#include "goalinf/gridworld.hpp"

#include <algorithm>
#include <sstream>

namespace goalinf {

bool parse_color(const std::string& s, Color& out) {
    static const std::pair<const char*, Color> table[] = {
        {"red", Color::red},       {"green", Color::green},   {"blue", Color::blue},
        {"yellow", Color::yellow}, {"orange", Color::orange}, {"purple", Color::purple},
        {"cyan", Color::cyan},     {"magenta", Color::magenta},
    };
    for (const auto& [name, c] : table) {
        if (s == name) {
            out = c;
            return true;
        }
    }
    return false;
}

int GridMap::find_item(const std::string& id) const {
    for (size_t i = 0; i < items.size(); ++i)
        if (items[i].id == id) return static_cast<int>(i);
    return -1;
}

int GridMap::find_gem_slot(const std::string& gem_id) const {
    for (size_t i = 0; i < gem_items.size(); ++i)
        if (items[gem_items[i]].id == gem_id) return static_cast<int>(i);
    return -1;
}

void GridMap::finalize() {
    if (width <= 0 || height <= 0 || width * height > kMaxCells)
        throw ValidationError("map size must be positive and at most " + std::to_string(kMaxCells) +
                              " cells, got " + std::to_string(width) + "x" + std::to_string(height));
    if (static_cast<int>(wall.size()) != width * height)
        throw ValidationError("wall grid size does not match map dimensions");

    key_items.clear();
    door_items.clear();
    gem_items.clear();
    slot_of.assign(items.size(), -1);
    item_at.assign(width * height, -1);

    for (size_t i = 0; i < items.size(); ++i) {
        const Item& it = items[i];
        for (size_t j = 0; j < i; ++j)
            if (items[j].id == it.id) throw ValidationError("duplicate item id: " + it.id);
        if (!in_bounds(it.cell))
            throw ValidationError("item " + it.id + " placed out of bounds");
        if (is_wall(it.cell)) throw ValidationError("item " + it.id + " placed on a wall");
        int ci = cell_index(it.cell);
        if (item_at[ci] != -1)
            throw ValidationError("items " + items[item_at[ci]].id + " and " + it.id +
                                  " share a cell");
        item_at[ci] = static_cast<int>(i);
        switch (it.kind) {
            case ItemKind::key:
                slot_of[i] = static_cast<int>(key_items.size());
                key_items.push_back(static_cast<int>(i));
                break;
            case ItemKind::door:
                slot_of[i] = static_cast<int>(door_items.size());
                door_items.push_back(static_cast<int>(i));
                break;
            case ItemKind::gem:
                slot_of[i] = static_cast<int>(gem_items.size());
                gem_items.push_back(static_cast<int>(i));
                break;
        }
    }
    if (num_keys() > kMaxKeys) throw ValidationError("too many keys (max 8)");
    if (num_doors() > kMaxDoors) throw ValidationError("too many doors (max 8)");
    if (num_gems() > kMaxGems) throw ValidationError("too many gems (max 8)");

    for (Cell c : {principal_start, assistant_start}) {
        if (!in_bounds(c)) throw ValidationError("agent start out of bounds");
        if (is_wall(c)) throw ValidationError("agent start on a wall");
    }
    if (principal_start == assistant_start)
        throw ValidationError("agents share a start cell");
    for (int d : door_items)
        if (items[d].cell == principal_start || items[d].cell == assistant_start)
            throw ValidationError("agent starts on door cell " + items[d].id);
}

WorldState initial_state(const GridMap& map) {
    WorldState s;
    s.principal_pos = map.principal_start;
    s.assistant_pos = map.assistant_start;
    s.ply = Role::principal;
    s.gem_held = -1;
    s.key_loc.fill(KeyLoc::on_floor);
    s.door_open = 0;
    return s;
}

uint64_t pack_state(const GridMap& map, const WorldState& s) {
    uint64_t v = 0;
    v |= static_cast<uint64_t>(map.cell_index(s.principal_pos));        // 8 bits
    v |= static_cast<uint64_t>(map.cell_index(s.assistant_pos)) << 8;   // 8 bits
    v |= static_cast<uint64_t>(s.ply == Role::assistant ? 1 : 0) << 16; // 1 bit
    v |= static_cast<uint64_t>(static_cast<uint8_t>(s.gem_held + 1)) << 17; // 4 bits
    uint64_t keys = 0;
    for (int k = 0; k < map.num_keys(); ++k)
        keys |= static_cast<uint64_t>(s.key_loc[k]) << (2 * k);
    v |= keys << 21;                                                    // 16 bits
    v |= static_cast<uint64_t>(s.door_open) << 37;                      // 8 bits
    return v;
}

const char* to_string(Verb v) {
    switch (v) {
        case Verb::up: return "up";
        case Verb::down: return "down";
        case Verb::left: return "left";
        case Verb::right: return "right";
        case Verb::pickup: return "pickup";
        case Verb::unlock: return "unlock";
        case Verb::handover: return "handover";
        case Verb::wait: return "wait";
    }
    return "?";
}

std::string to_string(const GridMap& map, const Action& a) {
    std::string s = to_string(a.verb);
    if (a.arg0 >= 0) s += " " + map.items[a.arg0].id;
    if (a.arg1 >= 0) s += " " + map.items[a.arg1].id;
    return s;
}

Action parse_action(const GridMap& map, const std::string& text) {
    std::istringstream in(text);
    std::string verb_tok;
    in >> verb_tok;
    static const std::pair<const char*, Verb> verbs[] = {
        {"up", Verb::up},         {"down", Verb::down},       {"left", Verb::left},
        {"right", Verb::right},   {"pickup", Verb::pickup},   {"unlock", Verb::unlock},
        {"handover", Verb::handover}, {"wait", Verb::wait},
    };
    Action a;
    bool found = false;
    for (const auto& [name, v] : verbs) {
        if (verb_tok == name) {
            a.verb = v;
            found = true;
            break;
        }
    }
    if (!found) throw ParseError("unknown action verb: '" + verb_tok + "'", 0, 0);

    std::vector<std::string> args;
    std::string tok;
    while (in >> tok) args.push_back(tok);

    auto expect = [&](size_t n) {
        if (args.size() != n)
            throw ParseError("action '" + std::string(to_string(a.verb)) + "' takes " +
                                 std::to_string(n) + " argument(s), got " +
                                 std::to_string(args.size()),
                             0, 0);
    };
    auto resolve = [&](const std::string& id) {
        int idx = map.find_item(id);
        if (idx < 0) throw ParseError("unknown item id: '" + id + "'", 0, 0);
        return idx;
    };
    switch (a.verb) {
        case Verb::up:
        case Verb::down:
        case Verb::left:
        case Verb::right:
        case Verb::wait:
            expect(0);
            break;
        case Verb::pickup:
        case Verb::handover:
            expect(1);
            a.arg0 = resolve(args[0]);
            break;
        case Verb::unlock:
            expect(2);
            a.arg0 = resolve(args[0]);
            a.arg1 = resolve(args[1]);
            break;
    }
    return a;
}

double action_cost(const Action& a) { return a.verb == Verb::wait ? 0.6 : 1.0; }

CostUnits action_cost_units(const Action& a) {
    return a.verb == Verb::wait ? kWaitCostUnits : kMoveCostUnits;
}

namespace {

Cell moved(const Cell& c, Verb v) {
    switch (v) {
        case Verb::up: return Cell{c.x, c.y - 1};
        case Verb::down: return Cell{c.x, c.y + 1};
        case Verb::left: return Cell{c.x - 1, c.y};
        case Verb::right: return Cell{c.x + 1, c.y};
        default: return c;
    }
}

bool adjacent(const Cell& a, const Cell& b) { return manhattan(a, b) == 1; }

// Is the cell free to move into: in bounds, not a wall, not a locked door,
// not occupied by the other agent.
bool enterable(const GridMap& map, const WorldState& s, Role mover, const Cell& c) {
    if (!map.in_bounds(c) || map.is_wall(c)) return false;
    int it = map.item_at[map.cell_index(c)];
    if (it >= 0 && map.items[it].kind == ItemKind::door && !s.is_door_open(map.slot_of[it]))
        return false;
    if (c == s.pos(other(mover))) return false;
    return true;
}

// Item sitting on the floor at cell c, or -1. Keys leave the floor once picked
// up or consumed; gems leave the floor when held; open doors stop mattering
// but are not floor items anyway.
int floor_item_at(const GridMap& map, const WorldState& s, const Cell& c) {
    int it = map.item_at[map.cell_index(c)];
    if (it < 0) return -1;
    const Item& item = map.items[it];
    int slot = map.slot_of[it];
    switch (item.kind) {
        case ItemKind::key: return s.key_loc[slot] == KeyLoc::on_floor ? it : -1;
        case ItemKind::gem: return s.gem_held == slot ? -1 : it;
        case ItemKind::door: return -1;
    }
    return -1;
}

bool id_less(const GridMap& map, const Action& a, const Action& b) {
    if (a.verb != b.verb) return a.verb < b.verb;
    auto id = [&](int idx) { return idx >= 0 ? map.items[idx].id : std::string(); };
    if (id(a.arg0) != id(b.arg0)) return id(a.arg0) < id(b.arg0);
    return id(a.arg1) < id(b.arg1);
}

} // namespace

std::vector<Action> legal_actions(const GridMap& map, const WorldState& state, Role agent) {
    std::vector<Action> out;
    if (agent != state.ply) return out;
    const Cell pos = state.pos(agent);

    for (Verb v : {Verb::up, Verb::down, Verb::left, Verb::right})
        if (enterable(map, state, agent, moved(pos, v))) out.push_back(Action{v});

    int floor_it = floor_item_at(map, state, pos);
    if (floor_it >= 0) {
        const Item& item = map.items[floor_it];
        bool can_take = item.kind == ItemKind::key ||
                        (item.kind == ItemKind::gem && agent == Role::principal &&
                         state.gem_held < 0);
        if (can_take) out.push_back(Action{Verb::pickup, floor_it});
    }

    std::vector<Action> unlocks;
    for (int ks = 0; ks < map.num_keys(); ++ks) {
        if (!state.holds_key(agent, ks)) continue;
        for (int ds = 0; ds < map.num_doors(); ++ds) {
            if (state.is_door_open(ds)) continue;
            const Item& door = map.door(ds);
            if (door.color != map.key(ks).color) continue;
            if (!adjacent(pos, door.cell)) continue;
            unlocks.push_back(Action{Verb::unlock, map.key_items[ks], map.door_items[ds]});
        }
    }
    std::sort(unlocks.begin(), unlocks.end(),
              [&](const Action& a, const Action& b) { return id_less(map, a, b); });
    out.insert(out.end(), unlocks.begin(), unlocks.end());

    if (adjacent(pos, state.pos(other(agent)))) {
        std::vector<Action> handovers;
        for (int ks = 0; ks < map.num_keys(); ++ks)
            if (state.holds_key(agent, ks))
                handovers.push_back(Action{Verb::handover, map.key_items[ks]});
        std::sort(handovers.begin(), handovers.end(),
                  [&](const Action& a, const Action& b) { return id_less(map, a, b); });
        out.insert(out.end(), handovers.begin(), handovers.end());
    }

    out.push_back(Action{Verb::wait});
    return out;
}

WorldState step(const GridMap& map, const WorldState& state, const Action& a) {
    const Role actor = state.ply;
    const Cell pos = state.pos(actor);
    WorldState next = state;

    auto fail = [&](const std::string& why) {
        throw IllegalActionError("illegal action '" + to_string(map, a) + "' for " +
                                 std::string(to_string(actor)) + ": " + why);
    };

    switch (a.verb) {
        case Verb::up:
        case Verb::down:
        case Verb::left:
        case Verb::right: {
            Cell dst = moved(pos, a.verb);
            if (!map.in_bounds(dst)) fail("target cell out of bounds");
            if (map.is_wall(dst)) fail("target cell is a wall");
            int it = map.item_at[map.cell_index(dst)];
            if (it >= 0 && map.items[it].kind == ItemKind::door &&
                !state.is_door_open(map.slot_of[it]))
                fail("target cell blocked by locked door " + map.items[it].id);
            if (dst == state.pos(other(actor))) fail("target cell occupied by the other agent");
            if (actor == Role::principal)
                next.principal_pos = dst;
            else
                next.assistant_pos = dst;
            break;
        }
        case Verb::pickup: {
            if (a.arg0 < 0) fail("pickup needs an item argument");
            const Item& item = map.items[a.arg0];
            if (floor_item_at(map, state, pos) != a.arg0)
                fail("item " + item.id + " is not on the agent's cell");
            if (item.kind == ItemKind::door) fail("doors cannot be picked up");
            if (item.kind == ItemKind::gem) {
                if (actor != Role::principal) fail("the assistant may not pick up gems");
                if (state.gem_held >= 0) fail("principal already holds a gem");
                next.gem_held = static_cast<int8_t>(map.slot_of[a.arg0]);
            } else {
                next.key_loc[map.slot_of[a.arg0]] = actor == Role::principal
                                                        ? KeyLoc::held_by_principal
                                                        : KeyLoc::held_by_assistant;
            }
            break;
        }
        case Verb::unlock: {
            if (a.arg0 < 0 || a.arg1 < 0) fail("unlock needs key and door arguments");
            const Item& key = map.items[a.arg0];
            const Item& door = map.items[a.arg1];
            if (key.kind != ItemKind::key || door.kind != ItemKind::door)
                fail("unlock arguments must be a key and a door");
            int ks = map.slot_of[a.arg0], ds = map.slot_of[a.arg1];
            if (!state.holds_key(actor, ks)) fail("agent does not hold " + key.id);
            if (state.is_door_open(ds)) fail("door " + door.id + " is already unlocked");
            if (key.color != door.color) fail("key and door colors differ");
            if (!adjacent(pos, door.cell)) fail("door " + door.id + " is not adjacent");
            next.key_loc[ks] = KeyLoc::consumed;
            next.door_open |= static_cast<uint8_t>(1u << ds);
            break;
        }
        case Verb::handover: {
            if (a.arg0 < 0) fail("handover needs a key argument");
            const Item& key = map.items[a.arg0];
            if (key.kind != ItemKind::key) fail("only keys can be handed over");
            int ks = map.slot_of[a.arg0];
            if (!state.holds_key(actor, ks)) fail("agent does not hold " + key.id);
            if (!adjacent(pos, state.pos(other(actor)))) fail("agents are not adjacent");
            next.key_loc[ks] = actor == Role::principal ? KeyLoc::held_by_assistant
                                                        : KeyLoc::held_by_principal;
            break;
        }
        case Verb::wait:
            break;
    }
    next.ply = other(actor);
    return next;
}

Goal make_goal(const GridMap& map, const std::string& gem_id) {
    int slot = map.find_gem_slot(gem_id);
    if (slot < 0) throw ValidationError("no gem with id '" + gem_id + "' on this map");
    return Goal{gem_id, slot};
}

} // namespace goalinf
