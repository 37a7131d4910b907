#include "goalinf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "json.hpp"

namespace goalinf {

using json = nlohmann::json;

const char* to_string(Source s) {
    switch (s) {
        case Source::model: return "model";
        case Source::human_mean: return "human-mean";
        case Source::human_individual: return "human-individual";
    }
    return "?";
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::vector<double> response_to_distribution(const HumanResponseRow& r,
                                             const std::vector<std::string>& goal_ids) {
    const size_t n = goal_ids.size();
    std::vector<double> probs(n, 0.0);
    if (r.all_equally) {
        for (double& p : probs) p = 1.0 / static_cast<double>(n);
        return probs;
    }
    if (r.selected.empty()) throw ValidationError("empty goal selection");
    for (const std::string& id : r.selected) {
        auto it = std::find(goal_ids.begin(), goal_ids.end(), id);
        if (it == goal_ids.end()) throw ValidationError("unknown goal id in response: " + id);
        probs[it - goal_ids.begin()] = 1.0;
    }
    double sum = 0.0;
    for (double p : probs) sum += p;
    for (double& p : probs) p /= sum;
    return probs;
}

double brier(const std::vector<double>& pred, int true_index) {
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double target = static_cast<int>(i) == true_index ? 1.0 : 0.0;
        sum += (pred[i] - target) * (pred[i] - target);
    }
    return sum / static_cast<double>(pred.size());
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ValidationError("pearson: length mismatch");
    if (xs.size() < 2) throw ValidationError("pearson: need at least 2 points");
    const double mx = mean_of(xs), my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

Interval bootstrap_ci(const std::vector<std::pair<double, double>>& pairs,
                      const std::function<double(const std::vector<std::pair<double, double>>&)>&
                          statistic,
                      int n_resamples, double level, uint64_t seed) {
    if (pairs.empty()) throw ValidationError("bootstrap_ci: empty input");
    if (n_resamples < 1) throw ValidationError("bootstrap_ci: n_resamples must be >= 1");
    if (level <= 0.0 || level >= 1.0) throw ValidationError("bootstrap_ci: level must be in (0,1)");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, pairs.size() - 1);
    std::vector<double> stats;
    stats.reserve(n_resamples);
    std::vector<std::pair<double, double>> sample(pairs.size());
    for (int i = 0; i < n_resamples; ++i) {
        for (size_t k = 0; k < pairs.size(); ++k) sample[k] = pairs[pick(rng)];
        double v = statistic(sample);
        if (!std::isnan(v)) stats.push_back(v);
    }
    if (stats.empty()) throw ValidationError("bootstrap_ci: statistic degenerate on all resamples");
    std::sort(stats.begin(), stats.end());

    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(stats.size() - 1);
        size_t lo = static_cast<size_t>(pos);
        size_t hi = std::min(lo + 1, stats.size() - 1);
        double frac = pos - static_cast<double>(lo);
        return stats[lo] * (1.0 - frac) + stats[hi] * frac;
    };
    const double alpha = (1.0 - level) / 2.0;
    return Interval{quantile(alpha), quantile(1.0 - alpha)};
}

// --- experiment drivers ------------------------------------------------------

std::vector<GoalPosteriorTrace> run_all(const std::vector<LoadedStimulus>& stimuli, Mode mode,
                                        const RunConfig& cfg, UtteranceScorer& scorer,
                                        bool parallel) {
    const int n = static_cast<int>(stimuli.size());
    std::vector<GoalPosteriorTrace> traces(n);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int i = 0; i < n; ++i) {
        try {
            traces[i] = run_stimulus(stimuli[i].map, stimuli[i].stim, mode, cfg, scorer,
                                     /*parallel_goals=*/false);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return traces;
}

std::vector<JudgmentRecord> model_judgments(const std::vector<LoadedStimulus>& stimuli,
                                            const std::vector<GoalPosteriorTrace>& traces) {
    std::vector<JudgmentRecord> out;
    for (const GoalPosteriorTrace& trace : traces) {
        const LoadedStimulus* ls = nullptr;
        for (const LoadedStimulus& s : stimuli)
            if (s.stim.id == trace.stimulus_id) ls = &s;
        if (!ls) throw ValidationError("trace for unknown stimulus " + trace.stimulus_id);
        const auto& jps = ls->stim.judgment_points;
        for (size_t idx = 0; idx < jps.size(); ++idx) {
            int t = jps[idx];
            if (t >= static_cast<int>(trace.rows.size()))
                throw ValidationError("stimulus " + trace.stimulus_id +
                                      ": judgment point beyond trace");
            JudgmentRecord rec;
            rec.stimulus = trace.stimulus_id;
            rec.judgment_index = static_cast<int>(idx);
            rec.timestep = t;
            rec.source = Source::model;
            rec.probs = trace.rows[t].probs;
            rec.condition = trace.mode;
            out.push_back(std::move(rec));
        }
    }
    return out;
}

std::vector<JudgmentRecord> human_judgments(const std::vector<HumanResponseRow>& rows,
                                            const std::vector<LoadedStimulus>& stimuli) {
    std::vector<JudgmentRecord> out;
    for (const HumanResponseRow& row : rows) {
        const LoadedStimulus* ls = nullptr;
        for (const LoadedStimulus& s : stimuli)
            if (s.stim.id == row.stimulus) ls = &s;
        if (!ls) throw ValidationError("human response for unknown stimulus " + row.stimulus);
        std::vector<std::string> goal_ids;
        for (int slot = 0; slot < ls->map.num_gems(); ++slot)
            goal_ids.push_back(ls->map.gem(slot).id);
        if (row.judgment_index < 0 ||
            row.judgment_index >= static_cast<int>(ls->stim.judgment_points.size()))
            throw ValidationError("human response judgment index out of range for stimulus " +
                                  row.stimulus);
        JudgmentRecord rec;
        rec.stimulus = row.stimulus;
        rec.judgment_index = row.judgment_index;
        rec.timestep = ls->stim.judgment_points[row.judgment_index];
        rec.source = Source::human_individual;
        rec.probs = response_to_distribution(row, goal_ids);
        rec.condition = row.condition;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<JudgmentRecord> mean_by_judgment(const std::vector<JudgmentRecord>& individual) {
    std::map<std::tuple<std::string, int, Mode>, std::vector<const JudgmentRecord*>> groups;
    for (const JudgmentRecord& rec : individual)
        groups[{rec.stimulus, rec.judgment_index, rec.condition}].push_back(&rec);
    std::vector<JudgmentRecord> out;
    for (const auto& [key, members] : groups) {
        JudgmentRecord mean = *members[0];
        mean.source = Source::human_mean;
        std::fill(mean.probs.begin(), mean.probs.end(), 0.0);
        for (const JudgmentRecord* rec : members)
            for (size_t g = 0; g < mean.probs.size(); ++g) mean.probs[g] += rec->probs[g];
        for (double& p : mean.probs) p /= static_cast<double>(members.size());
        out.push_back(std::move(mean));
    }
    return out;
}

CorrelationResult correlate(const std::vector<JudgmentRecord>& model,
                            const std::vector<JudgmentRecord>& human_means,
                            const std::vector<LoadedStimulus>& stimuli, Mode model_condition,
                            Mode human_condition, int n_resamples, double level, uint64_t seed) {
    (void)stimuli;
    std::vector<std::pair<double, double>> pairs;
    for (const JudgmentRecord& m : model) {
        if (m.condition != model_condition) continue;
        for (const JudgmentRecord& h : human_means) {
            if (h.condition != human_condition) continue;
            if (h.stimulus != m.stimulus || h.judgment_index != m.judgment_index) continue;
            for (size_t g = 0; g < m.probs.size() && g < h.probs.size(); ++g)
                pairs.emplace_back(m.probs[g], h.probs[g]);
        }
    }
    if (pairs.size() < 2) throw ValidationError("correlate: no overlapping judgment records");

    auto stat = [](const std::vector<std::pair<double, double>>& ps) {
        std::vector<double> xs, ys;
        xs.reserve(ps.size());
        ys.reserve(ps.size());
        for (const auto& [x, y] : ps) {
            xs.push_back(x);
            ys.push_back(y);
        }
        try {
            return pearson(xs, ys);
        } catch (const ValidationError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };

    CorrelationResult out;
    out.n_points = static_cast<int>(pairs.size());
    out.r = stat(pairs);
    out.ci = bootstrap_ci(pairs, stat, n_resamples, level, seed);
    return out;
}

namespace {

// P(g_true) and Brier for one record against its stimulus's true goal.
struct PointMetrics {
    double p_true = 0.0;
    double brier_score = 0.0;
};

PointMetrics metrics_for(const JudgmentRecord& rec, const LoadedStimulus& ls) {
    int true_slot = ls.map.find_gem_slot(ls.stim.true_goal);
    PointMetrics pm;
    pm.p_true = rec.probs[true_slot];
    pm.brier_score = brier(rec.probs, true_slot);
    return pm;
}

struct TTestInput {
    std::vector<double> a, b;
};

double t_cdf_two_sided(double t, double df); // below

TTest paired_t(const std::vector<double>& a, const std::vector<double>& b) {
    TTest out;
    if (a.size() != b.size() || a.size() < 2) return out;
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double md = mean_of(d), sd = sd_of(d);
    out.n = static_cast<int>(d.size());
    out.df = static_cast<double>(out.n - 1);
    if (sd == 0.0) {
        out.t = md == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        out.p = md == 0.0 ? 1.0 : 0.0;
        return out;
    }
    out.t = md / (sd / std::sqrt(static_cast<double>(out.n)));
    out.p = t_cdf_two_sided(out.t, out.df);
    return out;
}

TTest welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    TTest out;
    if (a.size() < 2 || b.size() < 2) return out;
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = sd_of(a) * sd_of(a), vb = sd_of(b) * sd_of(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    out.n = static_cast<int>(a.size() + b.size());
    if (se2 == 0.0) {
        out.t = ma == mb ? 0.0 : std::numeric_limits<double>::infinity();
        out.p = ma == mb ? 1.0 : 0.0;
        out.df = na + nb - 2;
        return out;
    }
    out.t = (ma - mb) / std::sqrt(se2);
    out.df = se2 * se2 /
             (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    out.p = t_cdf_two_sided(out.t, out.df);
    return out;
}

// Regularized incomplete beta via Lentz's continued fraction; standard route
// to the two-sided t-test p-value.
double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const int max_iter = 300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 3e-12) break;
    }
    return h;
}

double ibeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double t_cdf_two_sided(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    return ibeta(df / 2.0, 0.5, df / (df + t * t));
}

} // namespace

std::vector<AccuracyRow> accuracy_table(const std::vector<JudgmentRecord>& records,
                                        const std::vector<LoadedStimulus>& stimuli) {
    // model traces must cover the whole stimulus set; human data may be
    // partial (it simply contributes fewer rows)
    for (Mode condition : {Mode::with_instructions, Mode::without_instructions}) {
        std::vector<const LoadedStimulus*> covered, missing;
        bool any = false;
        for (const LoadedStimulus& ls : stimuli) {
            bool found = false;
            for (const JudgmentRecord& rec : records)
                if (rec.source == Source::model && rec.condition == condition &&
                    rec.stimulus == ls.stim.id)
                    found = true;
            (found ? covered : missing).push_back(&ls);
            any = any || found;
        }
        if (any && !missing.empty())
            throw ValidationError("accuracy_table: no model trace for stimulus " +
                                  missing.front()->stim.id);
    }

    std::vector<AccuracyRow> table;
    for (Source source : {Source::human_mean, Source::model}) {
        for (Mode condition : {Mode::with_instructions, Mode::without_instructions}) {
            std::vector<double> p_first, p_median, p_last;
            std::vector<double> b_first, b_median, b_last;
            bool any = false;
            for (const LoadedStimulus& ls : stimuli) {
                // records for this (stimulus, source, condition), by index
                std::map<int, const JudgmentRecord*> by_index;
                for (const JudgmentRecord& rec : records)
                    if (rec.stimulus == ls.stim.id && rec.source == source &&
                        rec.condition == condition)
                        by_index[rec.judgment_index] = &rec;
                if (by_index.empty()) continue;
                const int count = static_cast<int>(ls.stim.judgment_points.size());
                auto need = [&](int idx) -> const JudgmentRecord* {
                    auto it = by_index.find(idx);
                    if (it == by_index.end())
                        throw ValidationError("missing judgment record " + std::to_string(idx) +
                                              " for stimulus " + ls.stim.id);
                    return it->second;
                };
                any = true;
                PointMetrics first = metrics_for(*need(0), ls);
                PointMetrics last = metrics_for(*need(count - 1), ls);
                PointMetrics median;
                if (count % 2 == 1) {
                    median = metrics_for(*need(count / 2), ls);
                } else {
                    // even number of judgment points: average the middle two
                    PointMetrics lo = metrics_for(*need(count / 2 - 1), ls);
                    PointMetrics hi = metrics_for(*need(count / 2), ls);
                    median.p_true = 0.5 * (lo.p_true + hi.p_true);
                    median.brier_score = 0.5 * (lo.brier_score + hi.brier_score);
                }
                p_first.push_back(first.p_true);
                b_first.push_back(first.brier_score);
                p_median.push_back(median.p_true);
                b_median.push_back(median.brier_score);
                p_last.push_back(last.p_true);
                b_last.push_back(last.brier_score);
            }
            if (!any) continue;
            AccuracyRow row;
            row.source = source;
            row.condition = condition;
            row.first = {mean_of(p_first), sd_of(p_first), mean_of(b_first), sd_of(b_first)};
            row.median = {mean_of(p_median), sd_of(p_median), mean_of(b_median), sd_of(b_median)};
            row.last = {mean_of(p_last), sd_of(p_last), mean_of(b_last), sd_of(b_last)};
            table.push_back(row);
        }
    }
    return table;
}

EvalReport evaluate(const std::vector<LoadedStimulus>& stimuli,
                    const std::vector<HumanResponseRow>& human_rows, const RunConfig& cfg,
                    UtteranceScorer& scorer, bool parallel) {
    EvalReport report;

    auto with_traces = run_all(stimuli, Mode::with_instructions, cfg, scorer, parallel);
    auto without_traces = run_all(stimuli, Mode::without_instructions, cfg, scorer, parallel);

    std::vector<JudgmentRecord> records = model_judgments(stimuli, with_traces);
    {
        auto more = model_judgments(stimuli, without_traces);
        records.insert(records.end(), more.begin(), more.end());
    }
    std::vector<JudgmentRecord> individual = human_judgments(human_rows, stimuli);
    std::vector<JudgmentRecord> means = mean_by_judgment(individual);
    records.insert(records.end(), means.begin(), means.end());

    report.accuracy = accuracy_table(records, stimuli);

    const int n_resamples = 1000;
    const double level = 0.95;
    report.corr_with = correlate(records, means, stimuli, Mode::with_instructions,
                                 Mode::with_instructions, n_resamples, level, cfg.seed);
    report.corr_without = correlate(records, means, stimuli, Mode::without_instructions,
                                    Mode::without_instructions, n_resamples, level, cfg.seed + 1);
    report.corr_cross = correlate(records, means, stimuli, Mode::without_instructions,
                                  Mode::with_instructions, n_resamples, level, cfg.seed + 2);

    // paired t on P(g_true), model vs the mean human, per (stimulus, point)
    for (Mode condition : {Mode::with_instructions, Mode::without_instructions}) {
        std::vector<double> model_p, human_p;
        for (const JudgmentRecord& m : records) {
            if (m.source != Source::model || m.condition != condition) continue;
            for (const JudgmentRecord& h : means) {
                if (h.condition != condition || h.stimulus != m.stimulus ||
                    h.judgment_index != m.judgment_index)
                    continue;
                const LoadedStimulus* ls = nullptr;
                for (const LoadedStimulus& s : stimuli)
                    if (s.stim.id == m.stimulus) ls = &s;
                model_p.push_back(metrics_for(m, *ls).p_true);
                human_p.push_back(metrics_for(h, *ls).p_true);
            }
        }
        TTest t = paired_t(model_p, human_p);
        (condition == Mode::with_instructions ? report.paired_t_with : report.paired_t_without) =
            t;
    }

    // across-participant SD of P(g_true) per (stimulus, judgment point)
    std::vector<double> sd_with, sd_without;
    {
        std::map<std::tuple<std::string, int, Mode>, std::vector<double>> groups;
        for (const JudgmentRecord& rec : individual) {
            const LoadedStimulus* ls = nullptr;
            for (const LoadedStimulus& s : stimuli)
                if (s.stim.id == rec.stimulus) ls = &s;
            groups[{rec.stimulus, rec.judgment_index, rec.condition}].push_back(
                metrics_for(rec, *ls).p_true);
        }
        for (const auto& [key, values] : groups) {
            if (values.size() < 2) continue;
            (std::get<2>(key) == Mode::with_instructions ? sd_with : sd_without)
                .push_back(sd_of(values));
        }
    }
    report.human_sd_with = mean_of(sd_with);
    report.human_sd_without = mean_of(sd_without);
    report.sd_t = welch_t(sd_with, sd_without);

    return report;
}

std::vector<double> default_temperature_grid() {
    return {0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
}

std::vector<SweepRow> temperature_sweep(const std::vector<LoadedStimulus>& stimuli,
                                        const std::vector<HumanResponseRow>& human_rows,
                                        const std::vector<double>& grid, const RunConfig& cfg,
                                        UtteranceScorer& scorer, bool parallel) {
    std::vector<JudgmentRecord> means = mean_by_judgment(human_judgments(human_rows, stimuli));

    std::vector<SweepRow> rows;
    const int n = static_cast<int>(stimuli.size());
    for (double temperature : grid) {
        RunConfig tcfg = cfg;
        tcfg.temperature = temperature;
        std::vector<GoalPosteriorTrace> with_traces(n), without_traces(n);
        std::exception_ptr failure;
        // One filter per stimulus: the with/without runs share Q caches,
        // which are temperature-independent.
#pragma omp parallel for schedule(dynamic) if (parallel)
        for (int i = 0; i < n; ++i) {
            try {
                Filter filter(stimuli[i].map, GoalSpace::uniform(stimuli[i].map), tcfg, scorer,
                              /*parallel_goals=*/false);
                const char* backend =
                    cfg.backend == ScorerBackend::template_backend ? "template" : "external-lm";
                with_traces[i] =
                    run_stimulus_with(filter, stimuli[i].stim, Mode::with_instructions, backend);
                without_traces[i] = run_stimulus_with(filter, stimuli[i].stim,
                                                      Mode::without_instructions, backend);
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);

        std::vector<JudgmentRecord> records = model_judgments(stimuli, with_traces);
        auto more = model_judgments(stimuli, without_traces);
        records.insert(records.end(), more.begin(), more.end());

        for (Mode condition : {Mode::with_instructions, Mode::without_instructions}) {
            CorrelationResult corr = correlate(records, means, stimuli, condition, condition,
                                               /*n_resamples=*/1, 0.95, cfg.seed);
            SweepRow row;
            row.temperature = temperature;
            row.condition = condition;
            row.r = corr.r;
            row.n_points = corr.n_points;
            rows.push_back(row);
        }
    }
    for (Mode condition : {Mode::with_instructions, Mode::without_instructions}) {
        int best = -1;
        for (size_t i = 0; i < rows.size(); ++i)
            if (rows[i].condition == condition && (best < 0 || rows[i].r > rows[best].r))
                best = static_cast<int>(i);
        if (best >= 0) rows[best].best = true;
    }
    return rows;
}

std::vector<HumanResponseRow> synthesize_human_rows(const std::vector<LoadedStimulus>& stimuli,
                                                    const std::vector<GoalPosteriorTrace>& traces,
                                                    int participants, double noise_sd,
                                                    uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sd);
    std::vector<HumanResponseRow> rows;
    for (const GoalPosteriorTrace& trace : traces) {
        const LoadedStimulus* ls = nullptr;
        for (const LoadedStimulus& s : stimuli)
            if (s.stim.id == trace.stimulus_id) ls = &s;
        if (!ls) continue;
        for (size_t idx = 0; idx < ls->stim.judgment_points.size(); ++idx) {
            int t = ls->stim.judgment_points[idx];
            const std::vector<double>& probs = trace.rows[t].probs;
            for (int p = 0; p < participants; ++p) {
                std::vector<double> perturbed(probs.size());
                double max_p = 0.0;
                for (size_t g = 0; g < probs.size(); ++g) {
                    perturbed[g] = probs[g] * std::exp(noise(rng));
                    max_p = std::max(max_p, perturbed[g]);
                }
                HumanResponseRow row;
                row.participant = "sim" + std::to_string(p);
                row.stimulus = trace.stimulus_id;
                row.judgment_index = static_cast<int>(idx);
                row.condition = trace.mode;
                for (size_t g = 0; g < perturbed.size(); ++g)
                    if (perturbed[g] >= 0.5 * max_p)
                        row.selected.push_back(trace.goal_ids[g]);
                if (row.selected.size() == trace.goal_ids.size()) {
                    row.selected.clear();
                    row.all_equally = true;
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

// --- report serialization ----------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[64];
    int n = std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf, buf + n);
}

} // namespace

std::string accuracy_csv(const EvalReport& report) {
    std::string out =
        "source,condition,p_true_first,p_true_first_sd,brier_first,brier_first_sd,"
        "p_true_median,p_true_median_sd,brier_median,brier_median_sd,"
        "p_true_last,p_true_last_sd,brier_last,brier_last_sd\n";
    for (const AccuracyRow& row : report.accuracy) {
        out += std::string(to_string(row.source)) + "," + to_string(row.condition);
        for (const AccuracyCell* cell : {&row.first, &row.median, &row.last})
            out += "," + fmt(cell->p_true_mean) + "," + fmt(cell->p_true_sd) + "," +
                   fmt(cell->brier_mean) + "," + fmt(cell->brier_sd);
        out += "\n";
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "temperature,condition,pearson_r,n_points,best\n";
    for (const SweepRow& row : rows)
        out += fmt(row.temperature) + "," + to_string(row.condition) + "," + fmt(row.r) + "," +
               std::to_string(row.n_points) + "," + (row.best ? "1" : "0") + "\n";
    return out;
}

std::string correlation_points_csv(const std::vector<JudgmentRecord>& model,
                                   const std::vector<JudgmentRecord>& human_individual,
                                   const std::vector<LoadedStimulus>& stimuli, uint64_t seed) {
    std::vector<JudgmentRecord> means = mean_by_judgment(human_individual);
    std::string out = "stimulus,judgment_index,timestep,goal,condition,model_p,human_p,"
                      "human_ci_low,human_ci_high\n";
    for (const JudgmentRecord& m : model) {
        if (m.source != Source::model) continue;
        for (const JudgmentRecord& h : means) {
            if (h.condition != m.condition || h.stimulus != m.stimulus ||
                h.judgment_index != m.judgment_index)
                continue;
            const LoadedStimulus* ls = nullptr;
            for (const LoadedStimulus& s : stimuli)
                if (s.stim.id == m.stimulus) ls = &s;
            if (!ls) continue;
            for (size_t g = 0; g < m.probs.size(); ++g) {
                // per-point 95% CI over participants
                std::vector<std::pair<double, double>> participant_probs;
                for (const JudgmentRecord& ind : human_individual)
                    if (ind.condition == m.condition && ind.stimulus == m.stimulus &&
                        ind.judgment_index == m.judgment_index)
                        participant_probs.emplace_back(ind.probs[g], 0.0);
                Interval ci{h.probs[g], h.probs[g]};
                if (participant_probs.size() >= 2) {
                    auto mean_stat = [](const std::vector<std::pair<double, double>>& ps) {
                        double s = 0;
                        for (const auto& [x, y] : ps) s += x;
                        return s / static_cast<double>(ps.size());
                    };
                    uint64_t point_seed =
                        seed ^ fnv1a64(m.stimulus.data(), m.stimulus.size(),
                                       0x9e3779b97f4a7c15ull + m.judgment_index * 131 + g);
                    ci = bootstrap_ci(participant_probs, mean_stat, 1000, 0.95, point_seed);
                }
                out += m.stimulus + "," + std::to_string(m.judgment_index) + "," +
                       std::to_string(m.timestep) + "," + ls->map.gem(static_cast<int>(g)).id +
                       "," + to_string(m.condition) + "," + fmt(m.probs[g]) + "," +
                       fmt(h.probs[g]) + "," + fmt(ci.lo) + "," + fmt(ci.hi) + "\n";
            }
        }
    }
    return out;
}

std::vector<HumanResponseRow> filter_outlier_participants(
    const std::vector<HumanResponseRow>& rows, const std::vector<LoadedStimulus>& stimuli,
    std::vector<std::string>* excluded) {
    // participant score = mean P(g_true) over their responses, per condition
    std::map<std::pair<std::string, Mode>, std::pair<double, int>> totals;
    for (const HumanResponseRow& row : rows) {
        const LoadedStimulus* ls = nullptr;
        for (const LoadedStimulus& s : stimuli)
            if (s.stim.id == row.stimulus) ls = &s;
        if (!ls) continue;
        std::vector<std::string> goal_ids;
        for (int slot = 0; slot < ls->map.num_gems(); ++slot)
            goal_ids.push_back(ls->map.gem(slot).id);
        auto dist = response_to_distribution(row, goal_ids);
        int true_slot = ls->map.find_gem_slot(ls->stim.true_goal);
        auto& [sum, count] = totals[{row.participant, row.condition}];
        sum += dist[true_slot];
        ++count;
    }

    std::map<Mode, std::vector<double>> scores_by_condition;
    std::map<std::pair<std::string, Mode>, double> score_of;
    for (const auto& [key, sc] : totals) {
        double score = sc.second > 0 ? sc.first / sc.second : 0.0;
        score_of[key] = score;
        scores_by_condition[key.second].push_back(score);
    }

    auto quantile = [](std::vector<double> xs, double q) {
        std::sort(xs.begin(), xs.end());
        double pos = q * static_cast<double>(xs.size() - 1);
        size_t lo = static_cast<size_t>(pos);
        size_t hi = std::min(lo + 1, xs.size() - 1);
        double frac = pos - static_cast<double>(lo);
        return xs[lo] * (1.0 - frac) + xs[hi] * frac;
    };
    std::map<Mode, double> cutoff;
    for (auto& [mode, xs] : scores_by_condition) {
        if (xs.size() < 4) {
            cutoff[mode] = -std::numeric_limits<double>::infinity();
            continue;
        }
        double q1 = quantile(xs, 0.25), q3 = quantile(xs, 0.75);
        cutoff[mode] = q1 - (q3 - q1);
    }

    std::vector<HumanResponseRow> kept;
    std::vector<std::string> dropped;
    for (const HumanResponseRow& row : rows) {
        auto it = score_of.find({row.participant, row.condition});
        if (it != score_of.end() && it->second < cutoff[row.condition]) {
            if (std::find(dropped.begin(), dropped.end(), row.participant) == dropped.end())
                dropped.push_back(row.participant);
            continue;
        }
        kept.push_back(row);
    }
    if (excluded) *excluded = dropped;
    return kept;
}

std::string report_to_json(const EvalReport& report) {
    json j;
    json acc = json::array();
    for (const AccuracyRow& row : report.accuracy) {
        json cells;
        auto cell_json = [](const AccuracyCell& c) {
            return json{{"p_true_mean", c.p_true_mean},
                        {"p_true_sd", c.p_true_sd},
                        {"brier_mean", c.brier_mean},
                        {"brier_sd", c.brier_sd}};
        };
        acc.push_back(json{{"source", to_string(row.source)},
                           {"condition", to_string(row.condition)},
                           {"first", cell_json(row.first)},
                           {"median", cell_json(row.median)},
                           {"last", cell_json(row.last)}});
    }
    j["accuracy"] = acc;
    auto corr_json = [](const CorrelationResult& c) {
        return json{{"r", c.r}, {"ci_low", c.ci.lo}, {"ci_high", c.ci.hi}, {"n", c.n_points}};
    };
    j["correlation"] = {{"with", corr_json(report.corr_with)},
                        {"without", corr_json(report.corr_without)},
                        {"cross", corr_json(report.corr_cross)}};
    auto t_json = [](const TTest& t) {
        return json{{"t", t.t}, {"df", t.df}, {"p", t.p}, {"n", t.n}};
    };
    j["paired_t"] = {{"with", t_json(report.paired_t_with)},
                     {"without", t_json(report.paired_t_without)}};
    j["human_sd"] = {{"with", report.human_sd_with},
                     {"without", report.human_sd_without},
                     {"t_test", t_json(report.sd_t)}};
    return j.dump(2) + "\n";
}

} // namespace goalinf
