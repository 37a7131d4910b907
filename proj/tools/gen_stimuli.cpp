// Regenerates the bundled stimulus set from the maps in data/maps. Each
// stimulus is a T=0 optimal rollout (optionally after a few idle timesteps),
// paired with an authored instruction. Run from the repo root:
//
//   goalinf_gen data
//
// Prints every generated plan and its salient serialization for review.

#include <filesystem>
#include <iostream>

#include "goalinf/analysis.hpp"
#include "goalinf/io.hpp"
#include "goalinf/planner.hpp"
#include "goalinf/utterance.hpp"

using namespace goalinf;
namespace fs = std::filesystem;

namespace {

struct Recipe {
    std::string id;
    std::string map_file;
    std::string goal;
    std::string instruction; // empty = no instruction
    int lead_waits = 0;
};

const Recipe kRecipes[] = {
    {"s01", "two_door.map", "gem3", "Can you unlock the blue door for me?", 0},
    {"s02", "two_door.map", "gem2", "Could you open the blue door?", 0},
    {"s03", "two_door.map", "gem1", "Can you pass me the red key?", 0},
    {"s04", "two_door.map", "gem4", "", 0},
    {"s05", "keyring.map", "gem1", "Can you pass me the blue key?", 0},
    {"s06", "keyring.map", "gem3", "Hand me the red key.", 0},
    {"s07", "keyring.map", "gem4", "Can you pass me the blue key?", 1},
    {"s08", "enfilade.map", "gem3", "Can you pass me the red and the blue key?", 0},
    {"s09", "enfilade.map", "gem2", "Could you give me the red key?", 0},
    {"s10", "enfilade.map", "gem1", "Pass me the red and blue keys.", 0},
    {"s11", "twin_rooms.map", "gem2", "Bring me the blue key.", 0},
    {"s12", "twin_rooms.map", "gem1", "", 0},
    {"s13", "twin_rooms.map", "gem4", "Can you pass me the blue key?", 1},
    {"s14", "ring.map", "gem2", "", 0},
    {"s15", "ring.map", "gem3", "", 0},
    {"s16", "corridors.map", "gem2", "Pass me the blue key.", 0},
    {"s17", "corridors.map", "gem3", "Could you bring me the red key?", 0},
};

std::vector<ObservedTimestep> build_trajectory(const GridMap& map, const Goal& goal,
                                               int lead_waits) {
    WorldState s = initial_state(map);
    std::vector<ObservedTimestep> out;
    for (int i = 0; i < lead_waits; ++i) {
        out.push_back(ObservedTimestep{Action{Verb::wait}, Action{Verb::wait}});
        s = step(map, s, Action{Verb::wait});
        s = step(map, s, Action{Verb::wait});
    }
    QSource qs(map, goal);
    PlannerConfig cfg;
    cfg.temperature = 0.0;
    auto plan = qs.rollout_optimal(s, cfg);
    for (size_t i = 0; i < plan.size(); i += 2) {
        ObservedTimestep ts;
        ts.principal = plan[i].second;
        if (i + 1 < plan.size()) ts.assistant = plan[i + 1].second;
        out.push_back(ts);
    }
    return out;
}

std::vector<int> judgment_points(int len) {
    std::vector<int> pts = {0, (len + 3) / 4, len / 2, (3 * len + 3) / 4, len};
    std::vector<int> out;
    for (int p : pts)
        if (out.empty() || p > out.back()) out.push_back(p);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: goalinf_gen <data dir>\n";
        return 2;
    }
    const fs::path data_dir = argv[1];
    const fs::path maps_dir = data_dir / "maps";
    const fs::path out_dir = data_dir / "stimuli";
    fs::create_directories(out_dir);

    int failures = 0;
    for (const Recipe& recipe : kRecipes) {
        try {
            GridMap map = load_environment((maps_dir / recipe.map_file).string());
            Goal goal = make_goal(map, recipe.goal);

            Stimulus stim;
            stim.id = recipe.id;
            stim.map_path = "../maps/" + recipe.map_file;
            stim.true_goal = recipe.goal;
            if (!recipe.instruction.empty()) stim.instruction = recipe.instruction;
            stim.trajectory = build_trajectory(map, goal, recipe.lead_waits);
            stim.judgment_points = judgment_points(static_cast<int>(stim.trajectory.size()));

            write_file((out_dir / (recipe.id + ".json")).string(),
                       stimulus_to_json(stim, map));

            // echo the per-goal salient serializations for review
            std::cout << recipe.id << " map=" << recipe.map_file << " goal=" << recipe.goal
                      << " len=" << stim.trajectory.size()
                      << " jp=" << stim.judgment_points.size() << "\n";
            PlannerConfig zero;
            zero.temperature = 0.0;
            for (int slot = 0; slot < map.num_gems(); ++slot) {
                Goal g{map.gem(slot).id, slot};
                QSource qs(map, g);
                std::string salient = "<unreachable>";
                try {
                    auto plan = qs.rollout_optimal(initial_state(map), zero);
                    salient = "'" + serialize_salient(extract_salient(map, plan)) + "'";
                } catch (const UnreachableGoalError&) {
                }
                std::cout << "    " << g.gem_id << " (" << to_string(map.gem(slot).color)
                          << "): " << salient << "\n";
            }
        } catch (const std::exception& e) {
            std::cerr << recipe.id << ": FAILED: " << e.what() << "\n";
            ++failures;
        }
    }
    if (failures > 0) return 1;

    // Synthetic observer pool for exercising the eval pipeline: the model at
    // T = 2 with seeded noise, 30 participants per condition.
    try {
        auto stimuli = load_stimulus_dir(out_dir.string());
        RunConfig cfg;
        cfg.temperature = 2.0;
        TemplateScorer scorer;
        std::vector<HumanResponseRow> rows;
        for (Mode mode : {Mode::with_instructions, Mode::without_instructions}) {
            auto traces = run_all(stimuli, mode, cfg, scorer, false);
            auto more = synthesize_human_rows(stimuli, traces, 30, 0.15,
                                              mode == Mode::with_instructions ? 11 : 12);
            rows.insert(rows.end(), more.begin(), more.end());
        }
        write_file((data_dir / "human_synthetic.csv").string(), human_rows_to_csv(rows));
        std::cout << "wrote " << rows.size() << " synthetic observer rows\n";
    } catch (const std::exception& e) {
        std::cerr << "synthetic observers: FAILED: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
