// Acceptance suite over the bundled dataset. Each criterion prints exactly
// one PASS/FAIL line; the process exits nonzero if any criterion fails.
//
//   goalinf_acceptance <data dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>

#include "goalinf/analysis.hpp"
#include "goalinf/io.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace goalinf;
using namespace goalinf::testing;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail = "") {
    std::printf("%s criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// --- criterion 1: sequential filter == monolithic product oracle -------------

void criterion_exactness(const std::vector<LoadedStimulus>& stimuli, const RunConfig& cfg,
                         UtteranceScorer& scorer) {
    auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_at;
    std::map<std::string, std::unique_ptr<OracleModel>> oracles; // one per map file
    for (const LoadedStimulus& ls : stimuli) {
        auto& om = oracles[ls.stim.map_path];
        if (!om) om = std::make_unique<OracleModel>(ls.map);
        for (Mode mode : {Mode::with_instructions, Mode::without_instructions}) {
            GoalPosteriorTrace trace = run_stimulus(ls.map, ls.stim, mode, cfg, scorer, false);
            auto rows = oracle_log_posteriors(*om, ls.stim, mode, cfg, scorer);
            for (size_t t = 0; t < rows.size(); ++t) {
                double mx = *std::max_element(trace.rows[t].log_weights.begin(),
                                              trace.rows[t].log_weights.end());
                double sum = 0.0;
                for (double v : trace.rows[t].log_weights) sum += std::exp(v - mx);
                double lse = mx + std::log(sum);
                for (size_t g = 0; g < rows[t].size(); ++g) {
                    double diff = std::fabs((trace.rows[t].log_weights[g] - lse) - rows[t][g]);
                    if (diff > worst) {
                        worst = diff;
                        worst_at = ls.stim.id + " t=" + std::to_string(t);
                    }
                }
            }
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(1, worst <= 1e-9,
           "sequential filter matches the monolithic-product oracle on all " +
               std::to_string(stimuli.size()) + " stimuli",
           "max log-space deviation " + fmt(worst) + (worst_at.empty() ? "" : " at " + worst_at) +
               ", " + fmt(secs) + "s total");
}

// --- criterion 2: planner vs exhaustive Dijkstra on random mazes --------------

void criterion_planner_oracle() {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240717);
    int mazes = 0, q_checks = 0;
    bool ok = true;
    std::string detail;
    while (mazes < 20) {
        GridMap map = random_maze(rng);
        ++mazes;
        for (const std::string& gem_id : {std::string("gem1"), std::string("gem2")}) {
            Goal goal = make_goal(map, gem_id);
            QSource qs(map, goal);
            OracleIndex oracle(map, goal);
            PlannerConfig cfg;

            std::vector<WorldState> states = {initial_state(map)};
            for (int i = 0; i < 3; ++i)
                states.push_back(random_walk(map, 1 + static_cast<int>(rng() % 10), rng));
            for (const WorldState& s : states) {
                if (is_terminal(s, goal)) continue;
                for (const Action& a : legal_actions(map, s, s.ply)) {
                    QValue qv = qs.q_value(s, a, cfg);
                    ++q_checks;
                    if (!qv.exact || qv.units != oracle.q_units(s, a)) {
                        ok = false;
                        detail = "q mismatch on maze " + std::to_string(mazes) + " goal " + gem_id;
                    }
                }
            }

            auto optimal = oracle.remaining(initial_state(map));
            if (!optimal) continue;
            auto plan = qs.rollout_optimal(initial_state(map), cfg);
            CostUnits total = 0;
            for (const auto& [role, action] : plan) total += action_cost_units(action);
            if (total != *optimal) {
                ok = false;
                detail = "rollout cost mismatch on maze " + std::to_string(mazes);
            }
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(2, ok && secs < 60.0,
           "q_value and rollout match exhaustive Dijkstra on 20 random mazes",
           detail.empty() ? std::to_string(q_checks) + " Q checks, " + fmt(secs) + "s" : detail);
}

// --- criterion 3: uniform prior without instructions, exactly ----------------

void criterion_uniform_prior(const std::vector<LoadedStimulus>& stimuli, const RunConfig& cfg,
                             UtteranceScorer& scorer) {
    bool ok = true;
    std::string detail;
    for (const LoadedStimulus& ls : stimuli) {
        GoalPosteriorTrace trace =
            run_stimulus(ls.map, ls.stim, Mode::without_instructions, cfg, scorer, false);
        int true_idx = trace.goal_index(ls.stim.true_goal);
        const auto& p0 = trace.rows[0].probs;
        for (double p : p0)
            if (p != 0.25) ok = false;
        if (p0[true_idx] != 0.25) ok = false;
        if (brier(p0, true_idx) != 0.1875) ok = false;
        if (!ok && detail.empty()) detail = "stimulus " + ls.stim.id;
    }
    report(3, ok,
           "without-instructions first judgment point gives P(g_true) = 0.25 (SD 0) and "
           "Brier = 0.1875 exactly",
           detail);
}

// --- criterion 4: near-1 convergence at the final judgment point -------------

void criterion_convergence(const std::vector<LoadedStimulus>& stimuli, const RunConfig& cfg,
                           UtteranceScorer& scorer) {
    double sum_with = 0.0, sum_without = 0.0;
    for (const LoadedStimulus& ls : stimuli) {
        for (Mode mode : {Mode::with_instructions, Mode::without_instructions}) {
            GoalPosteriorTrace trace = run_stimulus(ls.map, ls.stim, mode, cfg, scorer, false);
            int t_last = ls.stim.judgment_points.back();
            double p = trace.rows[t_last].probs[trace.goal_index(ls.stim.true_goal)];
            (mode == Mode::with_instructions ? sum_with : sum_without) += p;
        }
    }
    double mean_with = sum_with / static_cast<double>(stimuli.size());
    double mean_without = sum_without / static_cast<double>(stimuli.size());
    report(4, mean_with >= 0.9 && mean_without >= 0.9,
           "mean final-judgment P(g_true) >= 0.9 in both modes at T = 1",
           "with " + fmt(mean_with) + ", without " + fmt(mean_without));
}

// --- criterion 5: instructions shift t=0 mass onto consistent goals ----------

void criterion_instruction_information(const std::vector<LoadedStimulus>& stimuli,
                                       const RunConfig& cfg, UtteranceScorer& scorer) {
    bool ok = true;
    int tested = 0;
    std::string detail;
    for (const LoadedStimulus& ls : stimuli) {
        if (!ls.stim.instruction) continue;

        // goals whose optimal-plan serialization the instruction describes
        // best define the instruction-consistent set
        GoalSpace space = GoalSpace::uniform(ls.map);
        std::vector<double> score(space.goals.size());
        PlannerConfig zero = cfg.planner_config();
        zero.temperature = 0.0;
        for (size_t g = 0; g < space.goals.size(); ++g) {
            SalientActionList sal;
            try {
                QSource qs(ls.map, space.goals[g]);
                sal = extract_salient(ls.map, qs.rollout_optimal(initial_state(ls.map), zero));
            } catch (const UnreachableGoalError&) {
            }
            score[g] = scorer.score(*ls.stim.instruction, serialize_salient(sal));
        }
        double best = *std::max_element(score.begin(), score.end());
        std::vector<size_t> consistent;
        for (size_t g = 0; g < score.size(); ++g)
            if (score[g] >= best - 1e-9) consistent.push_back(g);
        if (consistent.size() >= space.goals.size()) continue; // not a strict subset
        ++tested;

        GoalPosteriorTrace trace =
            run_stimulus(ls.map, ls.stim, Mode::with_instructions, cfg, scorer, false);
        const auto& p0 = trace.rows[0].probs;
        int true_idx = trace.goal_index(ls.stim.true_goal);
        if (!(p0[true_idx] > 0.25)) {
            ok = false;
            detail = ls.stim.id + ": P0(true) = " + fmt(p0[true_idx]);
        }
        // the |consistent| highest-posterior goals must be the consistent set
        std::vector<size_t> order(p0.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p0[a] > p0[b]; });
        for (size_t i = 0; i < consistent.size(); ++i) {
            if (std::find(consistent.begin(), consistent.end(), order[i]) == consistent.end()) {
                ok = false;
                detail = ls.stim.id + ": top posterior mass off the consistent goal set";
            }
        }
    }
    report(5, ok && tested > 0,
           "with-instructions t=0 posterior exceeds 0.25 on the true goal and concentrates on "
           "instruction-consistent goals",
           detail.empty() ? std::to_string(tested) + " stimuli tested" : detail);
}

// --- criterion 6: serialization goldens --------------------------------------

void criterion_goldens() {
    auto handover = [](const std::string& key, Color c) {
        SalientAction sa;
        sa.verb = Verb::handover;
        sa.actor = Role::assistant;
        sa.args = {key};
        sa.color_bindings = {{key, c}};
        return sa;
    };
    auto unlock = [](const std::string& key, const std::string& door, Color c) {
        SalientAction sa;
        sa.verb = Verb::unlock;
        sa.actor = Role::assistant;
        sa.args = {key, door};
        sa.color_bindings = {{door, c}};
        return sa;
    };
    bool ok =
        serialize_salient({handover("key2", Color::blue)}) ==
            "(handover robot human key2) where (iscolor key2 blue)" &&
        serialize_salient({unlock("key1", "door1", Color::red)}) ==
            "(unlockr robot key1 door1) where (iscolor door1 red)" &&
        serialize_salient({handover("key1", Color::green), handover("key2", Color::red)}) ==
            "(handover robot human key1) (handover robot human key2) where "
            "(iscolor key1 green) (iscolor key2 red)";
    report(6, ok, "all three salient-action serialization goldens reproduce byte-exactly");
}

// --- criterion 7: softmax/inference property suite ----------------------------

void criterion_properties() {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> qdist(-50.0, 0.0);
    std::uniform_real_distribution<double> tdist(0.05, 16.0);
    bool ok = true;
    std::string detail;

    // softmax normalization and shift invariance
    for (int it = 0; it < 1000 && ok; ++it) {
        size_t n = 2 + rng() % 6;
        std::vector<double> q(n);
        std::vector<CostUnits> units(n, 0);
        for (double& v : q) v = qdist(rng);
        double T = tdist(rng);
        std::vector<double> p1, lp1, p2, lp2;
        softmax_policy(q, units, T, p1, lp1);
        double sum = 0.0;
        for (double p : p1) sum += p;
        if (std::fabs(sum - 1.0) > 1e-9) {
            ok = false;
            detail = "normalization";
        }
        double shift = qdist(rng);
        std::vector<double> qs = q;
        for (double& v : qs) v += shift;
        softmax_policy(qs, units, T, p2, lp2);
        for (size_t i = 0; i < n; ++i)
            if (std::fabs(p1[i] - p2[i]) > 1e-9) {
                ok = false;
                detail = "shift invariance";
            }
    }

    // temperature monotonicity of the odds ratio
    for (int it = 0; it < 1000 && ok; ++it) {
        double qa = qdist(rng), qb = qdist(rng);
        if (qa < qb) std::swap(qa, qb);
        if (qa == qb) continue;
        double prev = std::numeric_limits<double>::infinity();
        for (double T : {0.0625, 0.25, 1.0, 4.0, 16.0}) {
            std::vector<double> p, lp;
            softmax_policy({qa, qb}, {0, 0}, T, p, lp);
            double ratio = p[0] / p[1];
            if (ratio > prev * (1.0 + 1e-12)) {
                ok = false;
                detail = "temperature monotonicity";
            }
            prev = ratio;
        }
    }

    // evidence order within a timestep: two factors in sequence equal their
    // product, after normalization
    for (int it = 0; it < 1000 && ok; ++it) {
        size_t n = 2 + rng() % 4;
        std::vector<double> w(n), f1(n), f2(n);
        for (size_t i = 0; i < n; ++i) {
            w[i] = qdist(rng);
            f1[i] = qdist(rng) / 10;
            f2[i] = qdist(rng) / 10;
        }
        std::vector<double> seq = w, joint = w;
        for (size_t i = 0; i < n; ++i) seq[i] += f1[i];
        for (size_t i = 0; i < n; ++i) seq[i] += f2[i];
        for (size_t i = 0; i < n; ++i) joint[i] += f1[i] + f2[i];
        auto pa = normalize_log_weights(seq);
        auto pb = normalize_log_weights(joint);
        for (size_t i = 0; i < n; ++i)
            if (std::fabs(pa[i] - pb[i]) > 1e-9) {
                ok = false;
                detail = "evidence order invariance";
            }
    }

    // common likelihood factors cancel
    for (int it = 0; it < 1000 && ok; ++it) {
        size_t n = 2 + rng() % 4;
        std::vector<double> w(n);
        for (double& v : w) v = qdist(rng);
        double common = qdist(rng);
        std::vector<double> shifted = w;
        for (double& v : shifted) v += common;
        auto pa = normalize_log_weights(w);
        auto pb = normalize_log_weights(shifted);
        for (size_t i = 0; i < n; ++i)
            if (std::fabs(pa[i] - pb[i]) > 1e-9) {
                ok = false;
                detail = "common factor cancellation";
            }
    }

    report(7, ok, "softmax/inference property suite (1000 cases per property)", detail);
}

// --- criterion 8: metric checks ----------------------------------------------

void criterion_metrics() {
    bool ok = brier({0.25, 0.25, 0.25, 0.25}, 1) == 0.1875;
    ok = ok && std::fabs(pearson({1, 2, 3}, {1, 2, 3}) - 1.0) < 1e-3;
    ok = ok && std::fabs(pearson({1, 2, 3}, {4, 2, 0}) + 1.0) < 1e-3;
    ok = ok && std::fabs(pearson({1, 2, 3}, {2, 2, 4}) - 0.866) < 1e-3;

    std::vector<std::pair<double, double>> pairs;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 40; ++i)
        pairs.emplace_back(static_cast<double>(rng() % 100),
                           static_cast<double>(rng() % 100));
    auto stat = [](const std::vector<std::pair<double, double>>& ps) {
        double s = 0;
        for (const auto& [x, y] : ps) s += y - x;
        return s / static_cast<double>(ps.size());
    };
    Interval a = bootstrap_ci(pairs, stat, 1000, 0.95, 31337);
    Interval b = bootstrap_ci(pairs, stat, 1000, 0.95, 31337);
    ok = ok && a.lo == b.lo && a.hi == b.hi && a.lo <= a.hi;
    report(8, ok, "brier(uniform4) = 0.1875, pearson worked examples within 1e-3, "
                  "seeded bootstrap byte-identical");
}

// --- criterion 9: eval pipeline self-consistency ------------------------------

void criterion_eval_pipeline(const std::vector<LoadedStimulus>& stimuli, const RunConfig& cfg,
                             UtteranceScorer& scorer) {
    // synthetic observers: model at T=2 plus log-normal noise, thresholded
    RunConfig hot = cfg;
    hot.temperature = 2.0;
    std::vector<HumanResponseRow> synthetic;
    for (Mode mode : {Mode::with_instructions, Mode::without_instructions}) {
        auto traces = run_all(stimuli, mode, hot, scorer, false);
        auto rows = synthesize_human_rows(stimuli, traces, 30, 0.15, 2023 + (mode == Mode::with_instructions));
        synthetic.insert(synthetic.end(), rows.begin(), rows.end());
    }

    EvalReport report_t1 = evaluate(stimuli, synthetic, cfg, scorer, false);
    bool ok = report_t1.corr_with.r > 0.9 && report_t1.corr_without.r > 0.9;
    ok = ok && report_t1.corr_with.ci.lo <= report_t1.corr_with.r &&
         report_t1.corr_with.r <= report_t1.corr_with.ci.hi;
    report(9, ok,
           "eval pipeline end-to-end on synthetic T=2 observers: R against the T=1 model "
           "exceeds 0.9 in both conditions",
           "with " + fmt(report_t1.corr_with.r) + " CI [" + fmt(report_t1.corr_with.ci.lo) +
               ", " + fmt(report_t1.corr_with.ci.hi) + "], without " +
               fmt(report_t1.corr_without.r));
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: goalinf_acceptance <data dir>\n";
        return 2;
    }
    const std::string stim_dir = (fs::path(argv[1]) / "stimuli").string();

    std::vector<LoadedStimulus> stimuli;
    try {
        stimuli = load_stimulus_dir(stim_dir);
    } catch (const std::exception& e) {
        std::cerr << "cannot load stimulus set: " << e.what() << "\n";
        return 2;
    }
    if (stimuli.empty()) {
        std::cerr << "no stimuli under " << stim_dir << "\n";
        return 2;
    }
    std::printf("loaded %zu stimuli from %s\n", stimuli.size(), stim_dir.c_str());

    RunConfig cfg; // T = 1, p_communicate = 0.95, template backend
    TemplateScorer scorer;

    criterion_exactness(stimuli, cfg, scorer);
    criterion_planner_oracle();
    criterion_uniform_prior(stimuli, cfg, scorer);
    criterion_convergence(stimuli, cfg, scorer);
    criterion_instruction_information(stimuli, cfg, scorer);
    criterion_goldens();
    criterion_properties();
    criterion_metrics();
    criterion_eval_pipeline(stimuli, cfg, scorer);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
