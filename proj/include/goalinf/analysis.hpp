#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "goalinf/io.hpp"

namespace goalinf {

enum class Source { model, human_mean, human_individual };

const char* to_string(Source s);

struct JudgmentRecord {
    std::string stimulus;
    int judgment_index = 0; // position in the stimulus's judgment point list
    int timestep = 0;
    Source source = Source::model;
    std::vector<double> probs; // aligned with the stimulus's goal order
    Mode condition = Mode::with_instructions;
};

// Uniform distribution over the selected goals; ALL spreads over the whole
// goal set. Throws ValidationError on unknown goal ids.
std::vector<double> response_to_distribution(const HumanResponseRow& r,
                                             const std::vector<std::string>& goal_ids);

// Mean squared error against the one-hot true goal, averaged over goals
// (uniform over 4 goals scores 0.1875).
double brier(const std::vector<double>& pred, int true_index);

// Product-moment correlation; throws ValidationError on length mismatch,
// fewer than 2 points, or zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap over paired samples. The statistic may return NaN for
// degenerate resamples; those are dropped from the percentile computation.
Interval bootstrap_ci(const std::vector<std::pair<double, double>>& pairs,
                      const std::function<double(const std::vector<std::pair<double, double>>&)>&
                          statistic,
                      int n_resamples, double level, uint64_t seed);

// --- experiment drivers ------------------------------------------------------

// Inference over a stimulus set; parallel fans out across stimuli (each
// stimulus gets its own QSources). The serial path is kept as the reference
// the tests and the benchmark compare against.
std::vector<GoalPosteriorTrace> run_all(const std::vector<LoadedStimulus>& stimuli, Mode mode,
                                        const RunConfig& cfg, UtteranceScorer& scorer,
                                        bool parallel);

std::vector<JudgmentRecord> model_judgments(const std::vector<LoadedStimulus>& stimuli,
                                            const std::vector<GoalPosteriorTrace>& traces);

// Per-participant records plus their per-(stimulus, judgment point) means.
std::vector<JudgmentRecord> human_judgments(const std::vector<HumanResponseRow>& rows,
                                            const std::vector<LoadedStimulus>& stimuli);
std::vector<JudgmentRecord> mean_by_judgment(const std::vector<JudgmentRecord>& individual);

struct CorrelationResult {
    double r = 0.0;
    Interval ci;
    int n_points = 0;
};

// Pools one (model, human) pair per (stimulus, judgment point, goal) and
// correlates; model records of model_condition vs human records of
// human_condition (they differ for the cross baseline).
CorrelationResult correlate(const std::vector<JudgmentRecord>& model,
                            const std::vector<JudgmentRecord>& human_means,
                            const std::vector<LoadedStimulus>& stimuli, Mode model_condition,
                            Mode human_condition, int n_resamples, double level, uint64_t seed);

struct AccuracyCell {
    double p_true_mean = 0.0, p_true_sd = 0.0;
    double brier_mean = 0.0, brier_sd = 0.0;
};

struct AccuracyRow {
    Source source = Source::model;
    Mode condition = Mode::with_instructions;
    AccuracyCell first, median, last;
};

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0; // two-sided
    int n = 0;
};

struct EvalReport {
    std::vector<AccuracyRow> accuracy;
    CorrelationResult corr_with;    // model(with) vs human(with)
    CorrelationResult corr_without; // model(without) vs human(without)
    CorrelationResult corr_cross;   // model(without) vs human(with)
    TTest paired_t_with;            // model vs human P(g_true), paired
    TTest paired_t_without;
    double human_sd_with = 0.0;  // mean across-participant SD per judgment point
    double human_sd_without = 0.0;
    TTest sd_t; // two-sample t for the SD difference
};

// Mean/SD of P(g_true) and Brier at first/median/last judgment points, per
// source and condition; an even judgment-point count averages the middle two.
std::vector<AccuracyRow> accuracy_table(const std::vector<JudgmentRecord>& records,
                                        const std::vector<LoadedStimulus>& stimuli);

EvalReport evaluate(const std::vector<LoadedStimulus>& stimuli,
                    const std::vector<HumanResponseRow>& human_rows, const RunConfig& cfg,
                    UtteranceScorer& scorer, bool parallel);

struct SweepRow {
    double temperature = 0.0;
    Mode condition = Mode::with_instructions;
    double r = 0.0;
    int n_points = 0;
    bool best = false; // argmax R within its condition
};

std::vector<double> default_temperature_grid(); // 0.0625 .. 16, powers of two

std::vector<SweepRow> temperature_sweep(const std::vector<LoadedStimulus>& stimuli,
                                        const std::vector<HumanResponseRow>& human_rows,
                                        const std::vector<double>& grid, const RunConfig& cfg,
                                        UtteranceScorer& scorer, bool parallel);

// Synthetic observer pool for pipeline self-checks: perturbs the given traces'
// judgment posteriors with seeded log-normal noise and thresholds them into
// goal selections.
std::vector<HumanResponseRow> synthesize_human_rows(const std::vector<LoadedStimulus>& stimuli,
                                                    const std::vector<GoalPosteriorTrace>& traces,
                                                    int participants, double noise_sd,
                                                    uint64_t seed);

// Optional ingestion filter (off by default; bundled datasets are already
// clean): drops participants whose accuracy score falls below Q1 - IQR of
// the per-participant score distribution within their condition. The score is
// the participant's mean P(g_true) across their responses.
std::vector<HumanResponseRow> filter_outlier_participants(
    const std::vector<HumanResponseRow>& rows, const std::vector<LoadedStimulus>& stimuli,
    std::vector<std::string>* excluded = nullptr);

// --- report serialization ----------------------------------------------------

std::string accuracy_csv(const EvalReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);
// One row per (stimulus, judgment point, goal, condition) with the model
// probability, the mean human probability, and a 95% bootstrap CI over
// participants for the human mean.
std::string correlation_points_csv(const std::vector<JudgmentRecord>& model,
                                   const std::vector<JudgmentRecord>& human_individual,
                                   const std::vector<LoadedStimulus>& stimuli, uint64_t seed);
std::string report_to_json(const EvalReport& report);

// mean and sample SD (n - 1); sd of fewer than 2 values is 0
double mean_of(const std::vector<double>& xs);
double sd_of(const std::vector<double>& xs);

} // namespace goalinf
