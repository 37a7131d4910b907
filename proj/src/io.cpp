#include "goalinf/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace goalinf {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

void map_diagnostics(const GridMap& map, std::vector<std::string>& out) {
    // Door colors without a matching key are a warning, not an error.
    for (int d : map.door_items) {
        bool has_key = false;
        for (int k : map.key_items)
            if (map.items[k].color == map.items[d].color) has_key = true;
        if (!has_key)
            out.push_back("warning: door " + map.items[d].id + " (" +
                          to_string(map.items[d].color) + ") has no same-colored key on the map");
    }

    // Per-gem reachability: BFS with locked doors blocked, vs with every door
    // that has a same-colored key treated as open (keyless doors can never
    // open, so they always block).
    auto bfs = [&](Cell from, bool doors_block) {
        std::vector<uint8_t> seen(map.width * map.height, 0);
        std::queue<Cell> q;
        seen[map.cell_index(from)] = 1;
        q.push(from);
        while (!q.empty()) {
            Cell c = q.front();
            q.pop();
            const Cell nbrs[4] = {{c.x, c.y - 1}, {c.x, c.y + 1}, {c.x - 1, c.y}, {c.x + 1, c.y}};
            for (const Cell& nb : nbrs) {
                if (!map.in_bounds(nb) || map.is_wall(nb)) continue;
                if (seen[map.cell_index(nb)]) continue;
                int it = map.item_at[map.cell_index(nb)];
                if (it >= 0 && map.items[it].kind == ItemKind::door) {
                    bool openable = false;
                    for (int k : map.key_items)
                        if (map.items[k].color == map.items[it].color) openable = true;
                    if (doors_block || !openable) continue;
                }
                seen[map.cell_index(nb)] = 1;
                q.push(nb);
            }
        }
        return seen;
    };
    const auto direct_h = bfs(map.principal_start, true);
    const auto direct_r = bfs(map.assistant_start, true);
    const auto open_h = bfs(map.principal_start, false);

    for (int gi : map.gem_items) {
        const Item& gem = map.items[gi];
        int ci = map.cell_index(gem.cell);
        if (direct_h[ci]) {
            out.push_back("gem " + gem.id + ": directly reachable by the principal");
            continue;
        }
        if (!open_h[ci]) {
            out.push_back("warning: gem " + gem.id +
                          " is unreachable by the principal even with all doors open");
            continue;
        }
        std::string key_side = "none";
        for (int k : map.key_items) {
            int kc = map.cell_index(map.items[k].cell);
            if (direct_h[kc]) {
                key_side = key_side == "assistant" ? "both" : "principal";
            } else if (direct_r[kc]) {
                key_side = key_side == "principal" ? "both" : "assistant";
            }
        }
        std::string note = "gem " + gem.id + ": requires unlocking doors";
        if (key_side == "assistant")
            note += " (keys are only on the assistant's side; assistant cooperation required)";
        out.push_back(note);
    }
}

} // namespace

GridMap parse_map_text(const std::string& text, std::vector<std::string>* diagnostics) {
    const std::vector<std::string> lines = split_lines(text);
    GridMap map;
    std::vector<std::string> grid;
    size_t i = 0;
    // grid rows run until a blank line or the legend marker
    for (; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (trim(line).empty() || trim(line) == "legend:") break;
        grid.push_back(line);
    }
    if (grid.empty()) throw ParseError("map has no grid rows", 1, 1);
    map.height = static_cast<int>(grid.size());
    map.width = static_cast<int>(grid[0].size());
    for (size_t r = 0; r < grid.size(); ++r)
        if (static_cast<int>(grid[r].size()) != map.width)
            throw ParseError("grid rows must have equal length", static_cast<int>(r + 1),
                             static_cast<int>(grid[r].size() + 1));

    // legend
    struct LegendEntry {
        char ch;
        std::string id;
        Color color;
    };
    std::vector<LegendEntry> legend;
    bool in_legend = false;
    for (; i < lines.size(); ++i) {
        std::string line = trim(lines[i]);
        if (line.empty()) continue;
        if (line == "legend:") {
            in_legend = true;
            continue;
        }
        if (!in_legend) throw ParseError("unexpected content before 'legend:'",
                                         static_cast<int>(i + 1), 1);
        // "<char> = <id> <color>"
        std::istringstream ss(line);
        std::string ch_tok, eq, id, color_tok;
        ss >> ch_tok >> eq >> id >> color_tok;
        if (ch_tok.size() != 1 || eq != "=" || id.empty() || color_tok.empty())
            throw ParseError("legend line must be '<char> = <id> <color>'",
                             static_cast<int>(i + 1), 1);
        Color color;
        if (!parse_color(color_tok, color))
            throw ParseError("unknown color '" + color_tok + "'", static_cast<int>(i + 1), 1);
        for (const auto& e : legend)
            if (e.ch == ch_tok[0])
                throw ParseError(std::string("duplicate legend char '") + ch_tok[0] + "'",
                                 static_cast<int>(i + 1), 1);
        legend.push_back({ch_tok[0], id, color});
    }

    map.wall.assign(map.width * map.height, 0);
    int h_count = 0, r_count = 0;
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            char c = grid[y][x];
            Cell cell{x, y};
            if (c == '#') {
                map.wall[map.cell_index(cell)] = 1;
            } else if (c == '.') {
            } else if (c == 'h') {
                map.principal_start = cell;
                ++h_count;
            } else if (c == 'r') {
                map.assistant_start = cell;
                ++r_count;
            } else {
                const LegendEntry* entry = nullptr;
                for (const auto& e : legend)
                    if (e.ch == c) entry = &e;
                if (!entry)
                    throw ParseError(std::string("cell char '") + c + "' has no legend entry",
                                     y + 1, x + 1);
                ItemKind kind;
                if (std::isdigit(static_cast<unsigned char>(c)))
                    kind = ItemKind::gem;
                else if (std::isupper(static_cast<unsigned char>(c)))
                    kind = ItemKind::door;
                else if (std::islower(static_cast<unsigned char>(c)))
                    kind = ItemKind::key;
                else
                    throw ParseError(std::string("invalid cell char '") + c + "'", y + 1, x + 1);
                map.items.push_back(Item{kind, entry->color, entry->id, cell});
            }
        }
    }
    if (h_count != 1) throw ParseError("map must contain exactly one 'h'", 1, 1);
    if (r_count != 1) throw ParseError("map must contain exactly one 'r'", 1, 1);

    // every legend entry must be placed exactly once
    for (const auto& e : legend) {
        int count = 0;
        for (const Item& it : map.items)
            if (it.id == e.id) ++count;
        if (count == 0)
            throw ParseError("legend entry '" + std::string(1, e.ch) + "' never appears in grid",
                             1, 1);
    }

    map.finalize();
    if (diagnostics) map_diagnostics(map, *diagnostics);
    return map;
}

GridMap load_environment(const std::string& path, std::vector<std::string>* diagnostics) {
    try {
        return parse_map_text(read_file(path), diagnostics);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line, e.col);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::string map_to_text(const GridMap& map) {
    std::vector<std::string> grid(map.height, std::string(map.width, '.'));
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            if (map.is_wall(Cell{x, y})) grid[y][x] = '#';
    grid[map.principal_start.y][map.principal_start.x] = 'h';
    grid[map.assistant_start.y][map.assistant_start.x] = 'r';

    // Assign legend chars deterministically: keys a.., doors A.., gems 1..
    std::string out;
    std::vector<std::pair<char, const Item*>> legend;
    for (size_t slot = 0; slot < map.key_items.size(); ++slot)
        legend.emplace_back(static_cast<char>('a' + slot), &map.items[map.key_items[slot]]);
    for (size_t slot = 0; slot < map.door_items.size(); ++slot)
        legend.emplace_back(static_cast<char>('A' + slot), &map.items[map.door_items[slot]]);
    for (size_t slot = 0; slot < map.gem_items.size(); ++slot)
        legend.emplace_back(static_cast<char>('1' + slot), &map.items[map.gem_items[slot]]);
    for (const auto& [ch, item] : legend) grid[item->cell.y][item->cell.x] = ch;

    for (const std::string& row : grid) out += row + "\n";
    out += "\nlegend:\n";
    for (const auto& [ch, item] : legend)
        out += std::string(1, ch) + " = " + item->id + " " + to_string(item->color) + "\n";
    return out;
}

// --- stimuli ----------------------------------------------------------------

namespace {

Stimulus stimulus_from_json(const json& j) {
    Stimulus s;
    try {
        s.id = j.at("id").get<std::string>();
        s.map_path = j.at("map").get<std::string>();
        if (j.contains("instruction") && !j.at("instruction").is_null())
            s.instruction = j.at("instruction").get<std::string>();
        s.true_goal = j.at("true_goal").get<std::string>();
        s.judgment_points = j.at("judgment_points").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad stimulus JSON: ") + e.what(), 0, 0);
    }
    return s;
}

} // namespace

LoadedStimulus load_stimulus(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what(), 0, 0);
    }
    LoadedStimulus out;
    out.stim = stimulus_from_json(j);

    fs::path map_path = out.stim.map_path;
    if (map_path.is_relative()) map_path = fs::path(path).parent_path() / map_path;
    out.map = load_environment(map_path.string(), &out.warnings);

    // trajectory, with legality replay
    if (!j.contains("trajectory") || !j.at("trajectory").is_array())
        throw ParseError(path + ": stimulus needs a trajectory array", 0, 0);
    WorldState state = initial_state(out.map);
    int t = 0;
    for (const json& entry : j.at("trajectory")) {
        ++t;
        ObservedTimestep ts;
        try {
            ts.principal = parse_action(out.map, entry.at("principal").get<std::string>());
            if (entry.contains("assistant") && !entry.at("assistant").is_null())
                ts.assistant = parse_action(out.map, entry.at("assistant").get<std::string>());
        } catch (const json::exception& e) {
            throw ParseError(path + ": timestep " + std::to_string(t) + ": " + e.what(), 0, 0);
        }
        try {
            state = step(out.map, state, ts.principal);
            if (ts.assistant) state = step(out.map, state, *ts.assistant);
        } catch (const IllegalActionError& e) {
            throw ValidationError(path + ": trajectory replay failed at timestep " +
                                  std::to_string(t) + ": " + e.what());
        }
        out.stim.trajectory.push_back(std::move(ts));
    }
    for (size_t i = 0; i + 1 < out.stim.trajectory.size(); ++i)
        if (!out.stim.trajectory[i].assistant)
            throw ValidationError(path + ": only the final timestep may omit the assistant action");

    if (out.map.find_gem_slot(out.stim.true_goal) < 0)
        throw ValidationError(path + ": true_goal '" + out.stim.true_goal + "' is not a gem id");

    const auto& jp = out.stim.judgment_points;
    for (size_t i = 0; i < jp.size(); ++i) {
        if (jp[i] < 0 || jp[i] > static_cast<int>(out.stim.trajectory.size()))
            throw ValidationError(path + ": judgment point " + std::to_string(jp[i]) +
                                  " is outside the trajectory");
        if (i > 0 && jp[i] <= jp[i - 1])
            throw ValidationError(path + ": judgment points must be strictly increasing");
    }
    if (jp.size() < 4 || jp.size() > 5)
        out.warnings.push_back("warning: stimulus " + out.stim.id + " has " +
                               std::to_string(jp.size()) + " judgment points (4-5 are typical)");
    return out;
}

std::vector<LoadedStimulus> load_stimulus_dir(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    std::vector<LoadedStimulus> out;
    for (const std::string& p : paths) out.push_back(load_stimulus(p));
    return out;
}

std::string stimulus_to_json(const Stimulus& s, const GridMap& map) {
    json j;
    j["id"] = s.id;
    j["map"] = s.map_path;
    if (s.instruction) j["instruction"] = *s.instruction;
    j["true_goal"] = s.true_goal;
    j["judgment_points"] = s.judgment_points;
    json traj = json::array();
    for (const ObservedTimestep& ts : s.trajectory) {
        json e;
        e["principal"] = to_string(map, ts.principal);
        if (ts.assistant) e["assistant"] = to_string(map, *ts.assistant);
        traj.push_back(e);
    }
    j["trajectory"] = traj;
    return j.dump(2) + "\n";
}

// --- traces -----------------------------------------------------------------

std::string trace_to_json(const GoalPosteriorTrace& t) {
    json j;
    j["stimulus"] = t.stimulus_id;
    j["mode"] = to_string(t.mode);
    j["temperature"] = t.temperature;
    j["backend"] = t.backend;
    j["goals"] = t.goal_ids;
    j["true_goal"] = t.true_goal;
    json rows = json::array();
    for (const TraceRow& r : t.rows) {
        json row;
        row["t"] = r.t;
        row["log_weights"] = r.log_weights;
        row["probs"] = r.probs;
        json evidence = json::array();
        if (r.used_utterance) evidence.push_back("utterance");
        if (r.used_actions) evidence.push_back("actions");
        row["evidence"] = evidence;
        row["judgment"] = r.judgment;
        rows.push_back(row);
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

GoalPosteriorTrace trace_from_json(const std::string& text) {
    GoalPosteriorTrace t;
    json j;
    try {
        j = json::parse(text);
        t.stimulus_id = j.at("stimulus").get<std::string>();
        Mode m;
        if (!parse_mode(j.at("mode").get<std::string>(), m))
            throw ParseError("bad mode in trace", 0, 0);
        t.mode = m;
        t.temperature = j.at("temperature").get<double>();
        t.backend = j.value("backend", "");
        t.goal_ids = j.at("goals").get<std::vector<std::string>>();
        t.true_goal = j.value("true_goal", "");
        for (const json& row : j.at("rows")) {
            TraceRow r;
            r.t = row.at("t").get<int>();
            r.log_weights = row.at("log_weights").get<std::vector<double>>();
            r.probs = row.at("probs").get<std::vector<double>>();
            for (const json& ev : row.at("evidence")) {
                if (ev == "utterance") r.used_utterance = true;
                if (ev == "actions") r.used_actions = true;
            }
            r.judgment = row.value("judgment", false);
            t.rows.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad trace JSON: ") + e.what(), 0, 0);
    }
    return t;
}

std::string trace_to_csv(const GoalPosteriorTrace& t) {
    std::string out = "stimulus,timestep,goal,probability,mode\n";
    for (const TraceRow& r : t.rows)
        for (size_t g = 0; g < t.goal_ids.size(); ++g)
            out += t.stimulus_id + "," + std::to_string(r.t) + "," + t.goal_ids[g] + "," +
                   fmt_double(r.probs[g]) + "," + to_string(t.mode) + "\n";
    return out;
}

std::string traces_to_csv(const std::vector<GoalPosteriorTrace>& ts) {
    std::string out = "stimulus,timestep,goal,probability,mode\n";
    for (const GoalPosteriorTrace& t : ts)
        for (const TraceRow& r : t.rows)
            for (size_t g = 0; g < t.goal_ids.size(); ++g)
                out += t.stimulus_id + "," + std::to_string(r.t) + "," + t.goal_ids[g] + "," +
                       fmt_double(r.probs[g]) + "," + to_string(t.mode) + "\n";
    return out;
}

// --- human responses --------------------------------------------------------

std::string human_csv_header() {
    return "participant_id,stimulus_id,judgment_index,condition,selected_goals";
}

std::vector<HumanResponseRow> load_human_csv(const std::string& path) {
    const std::vector<std::string> lines = split_lines(read_file(path));
    if (lines.empty()) throw ParseError(path + ": empty human CSV", 1, 1);
    if (trim(lines[0]) != human_csv_header())
        throw ParseError(path + ": expected header '" + human_csv_header() + "'", 1, 1);

    std::vector<HumanResponseRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : lines[i]) {
            if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else
                cur += c;
        }
        fields.push_back(cur);
        if (fields.size() != 5)
            throw ParseError(path + ": expected 5 fields", static_cast<int>(i + 1), 1);
        HumanResponseRow row;
        row.participant = trim(fields[0]);
        row.stimulus = trim(fields[1]);
        try {
            row.judgment_index = std::stoi(fields[2]);
        } catch (...) {
            throw ParseError(path + ": bad judgment_index", static_cast<int>(i + 1), 1);
        }
        if (!parse_mode(trim(fields[3]), row.condition))
            throw ParseError(path + ": bad condition '" + fields[3] + "'",
                             static_cast<int>(i + 1), 1);
        std::string sel = trim(fields[4]);
        if (sel == "ALL") {
            row.all_equally = true;
        } else {
            std::string item;
            for (char c : sel + ";") {
                if (c == ';') {
                    if (!trim(item).empty()) row.selected.push_back(trim(item));
                    item.clear();
                } else
                    item += c;
            }
            if (row.selected.empty())
                throw ParseError(path + ": empty goal selection", static_cast<int>(i + 1), 1);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string human_rows_to_csv(const std::vector<HumanResponseRow>& rows) {
    std::string out = human_csv_header() + "\n";
    for (const HumanResponseRow& r : rows) {
        std::string sel;
        if (r.all_equally)
            sel = "ALL";
        else
            for (const std::string& s : r.selected) sel += (sel.empty() ? "" : ";") + s;
        out += r.participant + "," + r.stimulus + "," + std::to_string(r.judgment_index) + "," +
               (r.condition == Mode::with_instructions ? "with" : "without") + "," + sel + "\n";
    }
    return out;
}

// --- config & few-shot examples ---------------------------------------------

RunConfig load_run_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what(), 0, 0);
    }
    RunConfig cfg;
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.p_communicate = j.value("p_communicate", cfg.p_communicate);
    std::string backend = j.value("backend", "template");
    if (backend == "template")
        cfg.backend = ScorerBackend::template_backend;
    else if (backend == "external-lm")
        cfg.backend = ScorerBackend::external_lm;
    else
        throw ValidationError(path + ": unknown backend '" + backend + "'");
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
    cfg.fewshot_file = j.value("fewshot_file", cfg.fewshot_file);
    cfg.search_budget = j.value("search_budget", cfg.search_budget);
    if (j.contains("lm")) {
        const json& lm = j.at("lm");
        cfg.lm.base_url = lm.value("base_url", cfg.lm.base_url);
        cfg.lm.model = lm.value("model", cfg.lm.model);
        cfg.lm.adapter = lm.value("adapter", cfg.lm.adapter);
        cfg.lm.path = lm.value("path", cfg.lm.path);
        cfg.lm.api_key_env = lm.value("api_key_env", cfg.lm.api_key_env);
        cfg.lm.timeout_seconds = lm.value("timeout_seconds", cfg.lm.timeout_seconds);
        cfg.lm.max_in_flight = lm.value("max_in_flight", cfg.lm.max_in_flight);
    }
    if (cfg.temperature < 0) throw ValidationError(path + ": temperature must be >= 0");
    if (cfg.p_communicate <= 0 || cfg.p_communicate >= 1)
        throw ValidationError(path + ": p_communicate must be in (0,1)");
    if (cfg.search_budget < 1) throw ValidationError(path + ": search_budget must be >= 1");
    return cfg;
}

std::vector<FewShotExample> load_fewshot(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what(), 0, 0);
    }
    std::vector<FewShotExample> out;
    try {
        for (const json& e : j)
            out.push_back(FewShotExample{e.at("input").get<std::string>(),
                                         e.at("output").get<std::string>()});
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what(), 0, 0);
    }
    if (out.empty()) throw ValidationError(path + ": few-shot example list is empty");
    return out;
}

} // namespace goalinf
