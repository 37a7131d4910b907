#pragma once

#include <string>
#include <vector>

#include "goalinf/config.hpp"
#include "goalinf/inference.hpp"

namespace goalinf {

// --- environments -----------------------------------------------------------
//
// ASCII map grammar (docs/formats.md): a rectangular block of cells followed
// by a legend. '#' wall, '.' floor, 'h' principal start, 'r' assistant start;
// lowercase letters are keys, uppercase letters doors, digits gems, each
// resolved by a "<char> = <id> <color>" legend line.

GridMap parse_map_text(const std::string& text, std::vector<std::string>* diagnostics = nullptr);
GridMap load_environment(const std::string& path, std::vector<std::string>* diagnostics = nullptr);
std::string map_to_text(const GridMap& map); // canonical form, reparses losslessly

// --- stimuli ----------------------------------------------------------------

struct LoadedStimulus {
    Stimulus stim;
    GridMap map;
    std::vector<std::string> warnings;
};

// Parses the stimulus JSON, loads its environment (path relative to the
// stimulus file) and replays the trajectory to verify legality. Throws
// ParseError/ValidationError; replay failures name the first bad timestep.
LoadedStimulus load_stimulus(const std::string& path);

// All *.json stimuli in a directory, sorted by filename.
std::vector<LoadedStimulus> load_stimulus_dir(const std::string& dir);

std::string stimulus_to_json(const Stimulus& s, const GridMap& map);

// --- traces -----------------------------------------------------------------

std::string trace_to_json(const GoalPosteriorTrace& t);
GoalPosteriorTrace trace_from_json(const std::string& text);
// long format: stimulus,timestep,goal,probability,mode
std::string trace_to_csv(const GoalPosteriorTrace& t);
std::string traces_to_csv(const std::vector<GoalPosteriorTrace>& ts);

// --- human responses --------------------------------------------------------
//
// CSV schema: participant_id,stimulus_id,judgment_index,condition,selected_goals
// condition is with|without; selected_goals is ;-separated gem ids or ALL.

struct HumanResponseRow {
    std::string participant;
    std::string stimulus;
    int judgment_index = 0;
    Mode condition = Mode::with_instructions;
    bool all_equally = false;
    std::vector<std::string> selected;
};

std::vector<HumanResponseRow> load_human_csv(const std::string& path);
std::string human_csv_header();
std::string human_rows_to_csv(const std::vector<HumanResponseRow>& rows);

// --- config & few-shot examples ---------------------------------------------

RunConfig load_run_config(const std::string& path);
std::vector<FewShotExample> load_fewshot(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace goalinf
