#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "goalinf/analysis.hpp"
#include "goalinf/io.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace goalinf;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_file;
    double temperature = -1.0; // <0 = not set on the command line
    std::string backend;
    std::string fewshot_file;
    std::string cache_dir;
    int64_t seed = -1;
    int threads = -1;
    bool json_out = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "JSON run-config file");
    cmd->add_option("--temperature", opts.temperature, "Boltzmann policy temperature");
    cmd->add_option("--backend", opts.backend, "utterance backend: template | external-lm");
    cmd->add_option("--fewshot", opts.fewshot_file, "few-shot examples JSON (external-lm)");
    cmd->add_option("--cache-dir", opts.cache_dir, "LM score cache directory");
    cmd->add_option("--seed", opts.seed, "seed for bootstrap resampling");
    cmd->add_option("--threads", opts.threads, "parallelism limit (1 = serial)");
    cmd->add_flag("--json", opts.json_out, "machine-readable JSON on stdout");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_file.empty()) cfg = load_run_config(opts.config_file);
    if (opts.temperature >= 0) cfg.temperature = opts.temperature;
    if (!opts.backend.empty()) {
        if (opts.backend == "template")
            cfg.backend = ScorerBackend::template_backend;
        else if (opts.backend == "external-lm")
            cfg.backend = ScorerBackend::external_lm;
        else
            throw ValidationError("unknown backend '" + opts.backend + "'");
    }
    if (!opts.fewshot_file.empty()) cfg.fewshot_file = opts.fewshot_file;
    if (!opts.cache_dir.empty()) cfg.cache_dir = opts.cache_dir;
    if (opts.seed >= 0) cfg.seed = static_cast<uint64_t>(opts.seed);
    if (opts.threads >= 0) cfg.threads = opts.threads;
#ifdef _OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
    return cfg;
}

std::unique_ptr<UtteranceScorer> make_scorer(const RunConfig& cfg) {
    if (cfg.backend == ScorerBackend::template_backend)
        return std::make_unique<TemplateScorer>();
    if (cfg.fewshot_file.empty())
        throw ValidationError("external-lm backend needs --fewshot (or fewshot_file in config)");
    auto client = std::make_shared<LmClient>(cfg.lm, cfg.cache_dir);
    return std::make_unique<LmScorer>(client, load_fewshot(cfg.fewshot_file));
}

bool parallel_enabled(const RunConfig& cfg) { return cfg.threads != 1; }

void print_trace_summary(const GoalPosteriorTrace& trace, std::ostream& out) {
    out << "stimulus " << trace.stimulus_id << "  mode=" << to_string(trace.mode)
        << "  T=" << trace.temperature << "  backend=" << trace.backend << "\n";
    out << "  t     ";
    for (const std::string& g : trace.goal_ids) out << g << "      ";
    out << "\n";
    char buf[64];
    for (const TraceRow& row : trace.rows) {
        std::snprintf(buf, sizeof(buf), "  %-4d", row.t);
        out << buf;
        for (double p : row.probs) {
            std::snprintf(buf, sizeof(buf), " %-10.4f", p);
            out << buf;
        }
        if (row.judgment) out << " *";
        out << "\n";
    }
}

int cmd_infer(const std::string& input, const std::string& mode_str, const std::string& out_path,
              const std::string& csv_path, const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    Mode mode;
    if (!parse_mode(mode_str, mode)) throw ValidationError("bad --mode '" + mode_str + "'");
    auto scorer = make_scorer(cfg);

    std::vector<std::string> paths;
    if (fs::is_directory(input)) {
        for (const auto& entry : fs::directory_iterator(input))
            if (entry.path().extension() == ".json") paths.push_back(entry.path().string());
        std::sort(paths.begin(), paths.end());
    } else {
        paths.push_back(input);
    }
    if (paths.empty()) throw ValidationError("no stimulus files under " + input);

    const bool batch = paths.size() > 1;
    if (batch && out_path.empty())
        throw ValidationError("batch inference needs --out <dir>");

    json manifest = json::array();
    std::vector<GoalPosteriorTrace> all_traces;
    int failures = 0;
    for (const std::string& path : paths) {
        try {
            LoadedStimulus ls = load_stimulus(path);
            for (const std::string& w : ls.warnings) std::cerr << w << "\n";
            GoalPosteriorTrace trace =
                run_stimulus(ls.map, ls.stim, mode, cfg, *scorer, parallel_enabled(cfg));
            std::string trace_json = trace_to_json(trace);
            if (!out_path.empty()) {
                std::string file = batch || fs::is_directory(out_path)
                                       ? (fs::path(out_path) / (ls.stim.id + ".trace.json")).string()
                                       : out_path;
                write_file(file, trace_json);
                manifest.push_back({{"stimulus", ls.stim.id}, {"status", "ok"}, {"file", file}});
            }
            if (opts.json_out)
                std::cout << trace_json;
            else if (out_path.empty())
                print_trace_summary(trace, std::cout);
            if (!csv_path.empty()) all_traces.push_back(std::move(trace));
        } catch (const std::exception& e) {
            ++failures;
            manifest.push_back({{"stimulus", path}, {"status", "error"}, {"error", e.what()}});
            std::cerr << "error: " << path << ": " << e.what() << "\n";
        }
    }
    if (batch) {
        write_file((fs::path(out_path) / "manifest.json").string(), manifest.dump(2) + "\n");
    }
    if (!csv_path.empty()) write_file(csv_path, traces_to_csv(all_traces));
    return failures == 0 ? 0 : 1;
}

int cmd_rollout(const std::string& map_path, const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    std::vector<std::string> diags;
    GridMap map = load_environment(map_path, &diags);
    for (const std::string& d : diags) std::cerr << d << "\n";

    PlannerConfig pcfg = cfg.planner_config();
    pcfg.temperature = 0.0;

    json out = json::array();
    for (int slot = 0; slot < map.num_gems(); ++slot) {
        Goal goal{map.gem(slot).id, slot};
        QSource qs(map, goal);
        json entry{{"goal", goal.gem_id}, {"color", to_string(map.gem(slot).color)}};
        try {
            auto plan = qs.rollout_optimal(initial_state(map), pcfg);
            double cost = 0;
            json steps = json::array();
            for (const auto& [role, action] : plan) {
                steps.push_back(std::string(to_string(role)) + " " + to_string(map, action));
                cost += action_cost(action);
            }
            entry["plan"] = steps;
            entry["cost"] = cost;
            entry["salient"] = serialize_salient(extract_salient(map, plan));
        } catch (const UnreachableGoalError& e) {
            entry["error"] = e.what();
        }
        out.push_back(entry);
    }

    if (opts.json_out) {
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    for (const json& entry : out) {
        std::cout << entry.at("goal").get<std::string>() << " ("
                  << entry.at("color").get<std::string>() << ")\n";
        if (entry.contains("error")) {
            std::cout << "  unreachable: " << entry.at("error").get<std::string>() << "\n";
            continue;
        }
        std::cout << "  cost " << entry.at("cost").get<double>() << "\n  plan:";
        for (const json& s : entry.at("plan")) std::cout << " [" << s.get<std::string>() << "]";
        std::cout << "\n  salient: '" << entry.at("salient").get<std::string>() << "'\n";
    }
    return 0;
}

int cmd_sweep(const std::string& stim_dir, const std::string& human_csv, const std::string& grid_s,
              const std::string& out_path, bool filter_outliers, const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    auto scorer = make_scorer(cfg);
    auto stimuli = load_stimulus_dir(stim_dir);
    auto human = load_human_csv(human_csv);
    if (filter_outliers) {
        std::vector<std::string> excluded;
        human = filter_outlier_participants(human, stimuli, &excluded);
        for (const std::string& p : excluded) std::cerr << "excluded participant " << p << "\n";
    }

    std::vector<double> grid;
    if (grid_s.empty()) {
        grid = default_temperature_grid();
    } else {
        std::istringstream in(grid_s);
        std::string tok;
        while (std::getline(in, tok, ',')) grid.push_back(std::stod(tok));
    }

    auto rows = temperature_sweep(stimuli, human, grid, cfg, *scorer, parallel_enabled(cfg));
    std::string csv = sweep_csv(rows);
    if (!out_path.empty()) write_file(out_path, csv);
    if (opts.json_out) {
        json j = json::array();
        for (const SweepRow& r : rows)
            j.push_back({{"temperature", r.temperature},
                         {"condition", to_string(r.condition)},
                         {"r", r.r},
                         {"n_points", r.n_points},
                         {"best", r.best}});
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << csv;
    }
    return 0;
}

int cmd_eval(const std::string& stim_dir, const std::string& human_csv,
             const std::string& out_dir, bool filter_outliers, const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    auto scorer = make_scorer(cfg);
    auto stimuli = load_stimulus_dir(stim_dir);
    auto human = load_human_csv(human_csv);
    if (filter_outliers) {
        std::vector<std::string> excluded;
        human = filter_outlier_participants(human, stimuli, &excluded);
        for (const std::string& p : excluded) std::cerr << "excluded participant " << p << "\n";
    }

    EvalReport report = evaluate(stimuli, human, cfg, *scorer, parallel_enabled(cfg));

    if (!out_dir.empty()) {
        write_file((fs::path(out_dir) / "accuracy.csv").string(), accuracy_csv(report));
        write_file((fs::path(out_dir) / "report.json").string(), report_to_json(report));
        // long-format scatter data
        auto with_traces = run_all(stimuli, Mode::with_instructions, cfg, *scorer,
                                   parallel_enabled(cfg));
        auto without_traces = run_all(stimuli, Mode::without_instructions, cfg, *scorer,
                                      parallel_enabled(cfg));
        auto records = model_judgments(stimuli, with_traces);
        auto more = model_judgments(stimuli, without_traces);
        records.insert(records.end(), more.begin(), more.end());
        write_file((fs::path(out_dir) / "correlation_points.csv").string(),
                   correlation_points_csv(records, human_judgments(human, stimuli), stimuli,
                                          cfg.seed));
    }
    if (opts.json_out)
        std::cout << report_to_json(report);
    else
        std::cout << accuracy_csv(report) << "\ncorrelation (with): r=" << report.corr_with.r
                  << " CI [" << report.corr_with.ci.lo << ", " << report.corr_with.ci.hi
                  << "]\ncorrelation (without): r=" << report.corr_without.r << " CI ["
                  << report.corr_without.ci.lo << ", " << report.corr_without.ci.hi
                  << "]\ncorrelation (cross): r=" << report.corr_cross.r << " CI ["
                  << report.corr_cross.ci.lo << ", " << report.corr_cross.ci.hi << "]\n";
    return 0;
}

int cmd_validate(const std::vector<std::string>& paths, const CommonOpts& opts) {
    json results = json::array();
    int failures = 0;
    for (const std::string& path : paths) {
        json entry{{"path", path}};
        try {
            std::vector<std::string> warnings;
            std::string ext = fs::path(path).extension().string();
            if (ext == ".map") {
                load_environment(path, &warnings);
                entry["kind"] = "environment";
            } else if (ext == ".csv") {
                load_human_csv(path);
                entry["kind"] = "human-responses";
            } else if (ext == ".json") {
                try {
                    LoadedStimulus ls = load_stimulus(path);
                    warnings = ls.warnings;
                    entry["kind"] = "stimulus";
                } catch (const ParseError&) {
                    load_run_config(path);
                    entry["kind"] = "config";
                }
            } else {
                throw ValidationError("unknown file kind: " + path);
            }
            entry["status"] = "ok";
            entry["warnings"] = warnings;
            if (!opts.json_out) {
                std::cout << "ok: " << path << " (" << entry["kind"].get<std::string>() << ")\n";
                for (const std::string& w : warnings) std::cout << "  " << w << "\n";
            }
        } catch (const std::exception& e) {
            ++failures;
            entry["status"] = "error";
            entry["error"] = e.what();
            if (!opts.json_out) std::cout << "error: " << path << ": " << e.what() << "\n";
        }
        results.push_back(entry);
    }
    if (opts.json_out) std::cout << results.dump(2) << "\n";
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"goal inference for communicating principal-assistant teams"};
    app.require_subcommand(1);

    CommonOpts opts;

    std::string infer_input, infer_mode = "with", infer_out, infer_csv;
    CLI::App* infer = app.add_subcommand("infer", "run goal inference over stimuli");
    infer->add_option("input", infer_input, "stimulus JSON file or directory")->required();
    infer->add_option("--mode", infer_mode, "with | without | instructions-only");
    infer->add_option("--out", infer_out, "output trace file (or directory for batches)");
    infer->add_option("--csv", infer_csv, "also write a long-format posterior CSV here");
    add_common(infer, opts);

    std::string rollout_map;
    CLI::App* rollout = app.add_subcommand("rollout", "print the optimal joint plan per goal");
    rollout->add_option("map", rollout_map, "environment .map file")->required();
    add_common(rollout, opts);

    std::string sweep_dir, sweep_human, sweep_grid, sweep_out;
    bool sweep_filter = false;
    CLI::App* sweep = app.add_subcommand("sweep", "temperature sensitivity sweep");
    sweep->add_option("stimuli", sweep_dir, "stimulus directory")->required();
    sweep->add_option("--human", sweep_human, "human responses CSV")->required();
    sweep->add_option("--grid", sweep_grid, "comma-separated temperatures");
    sweep->add_option("--out", sweep_out, "write sweep CSV here");
    sweep->add_flag("--filter-outliers", sweep_filter,
                    "drop participants scoring below Q1 - IQR");
    add_common(sweep, opts);

    std::string eval_dir, eval_human, eval_out;
    bool eval_filter = false;
    CLI::App* eval = app.add_subcommand("eval", "accuracy table, correlation and bootstrap CIs");
    eval->add_option("stimuli", eval_dir, "stimulus directory")->required();
    eval->add_option("--human", eval_human, "human responses CSV")->required();
    eval->add_option("--out-dir", eval_out, "write report files here");
    eval->add_flag("--filter-outliers", eval_filter,
                   "drop participants scoring below Q1 - IQR");
    add_common(eval, opts);

    std::vector<std::string> validate_paths;
    CLI::App* validate = app.add_subcommand("validate", "check file formats only");
    validate->add_option("paths", validate_paths, "files to validate")->required();
    add_common(validate, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (infer->parsed()) return cmd_infer(infer_input, infer_mode, infer_out, infer_csv, opts);
        if (rollout->parsed()) return cmd_rollout(rollout_map, opts);
        if (sweep->parsed())
            return cmd_sweep(sweep_dir, sweep_human, sweep_grid, sweep_out, sweep_filter, opts);
        if (eval->parsed()) return cmd_eval(eval_dir, eval_human, eval_out, eval_filter, opts);
        if (validate->parsed()) return cmd_validate(validate_paths, opts);
    } catch (const std::exception& e) {
        if (opts.json_out)
            std::cout << json{{"status", "error"}, {"error", e.what()}}.dump(2) << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
