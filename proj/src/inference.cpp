#include "goalinf/inference.hpp"

#include <algorithm>
#include <cmath>

namespace goalinf {

GoalSpace GoalSpace::uniform(const GridMap& map) {
    GoalSpace space;
    for (int slot = 0; slot < map.num_gems(); ++slot) {
        const Item& gem = map.gem(slot);
        space.goals.push_back(Goal{gem.id, slot});
    }
    if (space.goals.empty()) throw ValidationError("map has no gems, goal space is empty");
    space.prior.assign(space.goals.size(), 1.0 / static_cast<double>(space.goals.size()));
    return space;
}

const char* to_string(Mode m) {
    switch (m) {
        case Mode::with_instructions: return "with-instructions";
        case Mode::without_instructions: return "without-instructions";
        case Mode::instructions_only: return "instructions-only";
    }
    return "?";
}

bool parse_mode(const std::string& s, Mode& out) {
    if (s == "with" || s == "with-instructions") {
        out = Mode::with_instructions;
        return true;
    }
    if (s == "without" || s == "without-instructions") {
        out = Mode::without_instructions;
        return true;
    }
    if (s == "instructions-only") {
        out = Mode::instructions_only;
        return true;
    }
    return false;
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_w) {
    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : log_w) max_lw = std::max(max_lw, lw);
    std::vector<double> probs(log_w.size(), 0.0);
    if (!(max_lw > -std::numeric_limits<double>::infinity())) return probs;
    double sum = 0.0;
    for (size_t i = 0; i < log_w.size(); ++i) {
        probs[i] = std::exp(log_w[i] - max_lw);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

Filter::Filter(const GridMap& map, GoalSpace space, const RunConfig& cfg,
               UtteranceScorer& scorer, bool parallel_goals)
    : map_(&map), space_(std::move(space)), cfg_(cfg), scorer_(&scorer),
      parallel_goals_(parallel_goals) {
    for (const Goal& g : space_.goals)
        qsources_.push_back(std::make_unique<QSource>(map, g));
    checkpoint_ = initial_state(map);
    log_w_.assign(space_.goals.size(), 0.0);
    for (const Goal& g : space_.goals) trace_.goal_ids.push_back(g.gem_id);
    trace_.temperature = cfg.temperature;
}

void Filter::reset() {
    checkpoint_ = initial_state(*map_);
    log_w_.assign(space_.goals.size(), 0.0);
    t_ = 0;
    GoalPosteriorTrace fresh;
    fresh.goal_ids = trace_.goal_ids;
    fresh.temperature = cfg_.temperature;
    trace_ = std::move(fresh);
}

void Filter::push_row(int t, bool used_utterance, bool used_actions) {
    TraceRow row;
    row.t = t;
    row.log_weights = log_w_;
    row.probs = normalize_log_weights(log_w_);
    row.used_utterance = used_utterance;
    row.used_actions = used_actions;
    trace_.rows.push_back(std::move(row));
}

void Filter::init(const UtteranceObservation& obs, Mode mode) {
    trace_.mode = mode;
    const int n = static_cast<int>(space_.goals.size());
    for (int g = 0; g < n; ++g) log_w_[g] = std::log(space_.prior[g]);

    const bool condition_on_utterance = mode != Mode::without_instructions;
    if (condition_on_utterance) {
        UtteranceModelConfig ucfg;
        ucfg.p_communicate = cfg_.p_communicate;
        PlannerConfig rollout_cfg = cfg_.planner_config();
        rollout_cfg.temperature = 0.0; // instructions describe the optimal plan

        const WorldState start = initial_state(*map_);
        std::vector<double> loglik(n, 0.0);
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel_goals_)
        for (int g = 0; g < n; ++g) {
            try {
                SalientActionList sal;
                try {
                    auto plan = qsources_[g]->rollout_optimal(start, rollout_cfg);
                    sal = extract_salient(*map_, plan);
                } catch (const UnreachableGoalError&) {
                    // Unreachable goal: no plan, nothing salient; the goal
                    // keeps its prior times the k = 0 utterance branch.
                }
                loglik[g] = utterance_likelihood(obs, sal, ucfg, *scorer_);
            } catch (...) {
                // Exceptions (e.g. LM backend failures) must not escape the
                // parallel region; surface the first one afterwards.
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
        for (int g = 0; g < n; ++g) log_w_[g] += loglik[g];
    }
    push_row(0, condition_on_utterance, false);
}

void Filter::observe(const ObservedTimestep& ts) {
    ++t_;
    const int n = static_cast<int>(space_.goals.size());
    const PlannerConfig pcfg = cfg_.planner_config();

    if (checkpoint_.ply != Role::principal)
        throw IllegalActionError("timestep " + std::to_string(t_) +
                                 ": checkpoint is not at a principal ply");

    // The checkpoint advances identically under every goal hypothesis; only
    // the action probabilities differ.
    WorldState s_mid;
    try {
        s_mid = step(*map_, checkpoint_, ts.principal);
    } catch (const IllegalActionError& e) {
        throw IllegalActionError("timestep " + std::to_string(t_) + ": " + e.what());
    }

    std::vector<double> delta(n, 0.0);
    bool bad_principal = false, bad_assistant = false;
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel_goals_)
    for (int g = 0; g < n; ++g) {
        try {
            PolicyQuery pq1 = qsources_[g]->boltzmann_policy(checkpoint_, pcfg);
            int i1 = pq1.index_of(ts.principal);
            if (i1 < 0) {
                bad_principal = true;
                continue;
            }
            double d = pq1.log_probs[i1];
            if (ts.assistant) {
                PolicyQuery pq2 = qsources_[g]->boltzmann_policy(s_mid, pcfg);
                int i2 = pq2.index_of(*ts.assistant);
                if (i2 < 0) {
                    bad_assistant = true;
                    continue;
                }
                d += pq2.log_probs[i2];
            }
            delta[g] = d;
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    if (bad_principal)
        throw IllegalActionError("timestep " + std::to_string(t_) +
                                 ": observed principal action is not legal at the checkpoint");
    if (bad_assistant)
        throw IllegalActionError("timestep " + std::to_string(t_) +
                                 ": observed assistant action is not legal at the checkpoint");

    for (int g = 0; g < n; ++g) log_w_[g] += delta[g];
    checkpoint_ = ts.assistant ? step(*map_, s_mid, *ts.assistant) : s_mid;
    push_row(t_, false, true);
}

GoalPosteriorTrace run_stimulus_with(Filter& filter, const Stimulus& stim, Mode mode,
                                     const std::string& backend_name) {
    filter.reset();
    UtteranceObservation obs;
    obs.communicated = stim.instruction.has_value();
    obs.text = stim.instruction;
    filter.init(obs, mode);

    if (mode != Mode::instructions_only)
        for (const ObservedTimestep& ts : stim.trajectory) filter.observe(ts);

    GoalPosteriorTrace trace = filter.trace();
    trace.stimulus_id = stim.id;
    trace.true_goal = stim.true_goal;
    trace.backend = backend_name;
    for (TraceRow& row : trace.rows)
        row.judgment = std::find(stim.judgment_points.begin(), stim.judgment_points.end(),
                                 row.t) != stim.judgment_points.end();
    return trace;
}

GoalPosteriorTrace run_stimulus(const GridMap& map, const Stimulus& stim, Mode mode,
                                const RunConfig& cfg, UtteranceScorer& scorer,
                                bool parallel_goals) {
    Filter filter(map, GoalSpace::uniform(map), cfg, scorer, parallel_goals);
    return run_stimulus_with(
        filter, stim, mode,
        cfg.backend == ScorerBackend::template_backend ? "template" : "external-lm");
}

} // namespace goalinf
