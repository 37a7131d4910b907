#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "goalinf/config.hpp"
#include "goalinf/gridworld.hpp"
#include "goalinf/planner.hpp"
#include "goalinf/utterance.hpp"

namespace goalinf {

struct GoalSpace {
    std::vector<Goal> goals;
    std::vector<double> prior; // sums to 1

    static GoalSpace uniform(const GridMap& map);
};

enum class Mode { with_instructions, without_instructions, instructions_only };

const char* to_string(Mode m);
bool parse_mode(const std::string& s, Mode& out);

// One observed timestep: the principal's ply and, except possibly at the very
// end of a trajectory (the principal's gem pickup ends the episode mid-pair),
// the assistant's reply.
struct ObservedTimestep {
    Action principal;
    std::optional<Action> assistant;
};

struct TraceRow {
    int t = 0;
    std::vector<double> log_weights; // unnormalized, running log w_t^g
    std::vector<double> probs;       // normalized posterior P_t^g
    bool used_utterance = false;
    bool used_actions = false;
    bool judgment = false;
};

struct GoalPosteriorTrace {
    std::string stimulus_id;
    Mode mode = Mode::with_instructions;
    double temperature = 1.0;
    std::string backend;
    std::vector<std::string> goal_ids;
    std::string true_goal;
    std::vector<TraceRow> rows; // rows[0] is t = 0

    int goal_index(const std::string& id) const {
        for (size_t i = 0; i < goal_ids.size(); ++i)
            if (goal_ids[i] == id) return static_cast<int>(i);
        return -1;
    }
};

// A stimulus as played back for inference; loading and validation live in io.
struct Stimulus {
    std::string id;
    std::string map_path;
    std::optional<std::string> instruction;
    std::string true_goal;
    std::vector<int> judgment_points; // timestep indices, strictly increasing
    std::vector<ObservedTimestep> trajectory;
};

// Exact sequential Bayesian filter over the goal set. Owns one QSource per
// goal; per-goal evaluations run in parallel when enabled (each goal's state
// is confined to its loop iteration).
class Filter {
  public:
    Filter(const GridMap& map, GoalSpace space, const RunConfig& cfg, UtteranceScorer& scorer,
           bool parallel_goals = true);

    // Fills the t = 0 row. With-instructions conditions on (u, c); the
    // without-instructions baseline records the bare prior.
    void init(const UtteranceObservation& obs, Mode mode);

    // Multiplies in the Boltzmann probabilities of the observed actions at
    // the current checkpoint, advances it, and appends a row.
    void observe(const ObservedTimestep& ts);

    // Rewinds weights, checkpoint and trace but keeps the per-goal QSources
    // (their caches are temperature-independent), so one Filter can replay a
    // stimulus under several modes or temperatures cheaply.
    void reset();

    const GoalPosteriorTrace& trace() const { return trace_; }
    GoalPosteriorTrace& trace() { return trace_; }
    const WorldState& checkpoint() const { return checkpoint_; }
    QSource& qsource(int goal_idx) { return *qsources_[goal_idx]; }
    void set_temperature(double t) {
        cfg_.temperature = t;
        trace_.temperature = t;
    }

  private:
    void push_row(int t, bool used_utterance, bool used_actions);

    const GridMap* map_;
    GoalSpace space_;
    RunConfig cfg_;
    UtteranceScorer* scorer_;
    bool parallel_goals_;
    std::vector<std::unique_ptr<QSource>> qsources_;
    std::vector<double> log_w_;
    WorldState checkpoint_;
    GoalPosteriorTrace trace_;
    int t_ = 0;
};

// Runs the full filter over a stimulus in the given mode and tags its
// judgment points. Instructions-only stops after the t = 0 row.
GoalPosteriorTrace run_stimulus(const GridMap& map, const Stimulus& stim, Mode mode,
                                const RunConfig& cfg, UtteranceScorer& scorer,
                                bool parallel_goals = true);

// Same, but replaying through an existing (reset) filter so Q caches carry
// over between modes and temperatures.
GoalPosteriorTrace run_stimulus_with(Filter& filter, const Stimulus& stim, Mode mode,
                                     const std::string& backend_name);

// max-shifted exp-normalization of log weights; used everywhere a posterior
// is produced.
std::vector<double> normalize_log_weights(const std::vector<double>& log_w);

} // namespace goalinf
