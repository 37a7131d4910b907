// Compares the serial reference inference path against the OpenMP-parallel
// one on the bundled stimulus set and checks that both produce bit-identical
// traces.
//
//   goalinf_bench data/stimuli [repeats]

#include <chrono>
#include <iostream>

#include "goalinf/analysis.hpp"
#include "goalinf/io.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace goalinf;
using Clock = std::chrono::steady_clock;

namespace {

double run_once(const std::vector<LoadedStimulus>& stimuli, const RunConfig& cfg,
                UtteranceScorer& scorer, bool parallel,
                std::vector<GoalPosteriorTrace>& traces_out) {
    auto start = Clock::now();
    traces_out = run_all(stimuli, Mode::with_instructions, cfg, scorer, parallel);
    auto more = run_all(stimuli, Mode::without_instructions, cfg, scorer, parallel);
    traces_out.insert(traces_out.end(), more.begin(), more.end());
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool identical(const std::vector<GoalPosteriorTrace>& a,
               const std::vector<GoalPosteriorTrace>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows.size() != b[i].rows.size()) return false;
        for (size_t t = 0; t < a[i].rows.size(); ++t) {
            if (a[i].rows[t].log_weights != b[i].rows[t].log_weights) return false;
            if (a[i].rows[t].probs != b[i].rows[t].probs) return false;
        }
    }
    return true;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2 || argc > 3) {
        std::cerr << "usage: goalinf_bench <stimulus dir> [repeats]\n";
        return 2;
    }
    const int repeats = argc == 3 ? std::atoi(argv[2]) : 3;

    std::vector<LoadedStimulus> stimuli;
    try {
        stimuli = load_stimulus_dir(argv[1]);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    if (stimuli.empty()) {
        std::cerr << "no stimuli under " << argv[1] << "\n";
        return 1;
    }

    RunConfig cfg;
    TemplateScorer scorer;

#ifdef _OPENMP
    std::cout << "OpenMP threads available: " << omp_get_max_threads() << "\n";
#else
    std::cout << "built without OpenMP; both paths run serially\n";
#endif
    std::cout << "stimuli: " << stimuli.size() << ", repeats: " << repeats << "\n\n";

    double serial_best = 1e300, parallel_best = 1e300;
    std::vector<GoalPosteriorTrace> serial_traces, parallel_traces;
    for (int r = 0; r < repeats; ++r) {
        std::vector<GoalPosteriorTrace> t;
        serial_best = std::min(serial_best, run_once(stimuli, cfg, scorer, false, t));
        if (r == 0) serial_traces = std::move(t);
    }
    for (int r = 0; r < repeats; ++r) {
        std::vector<GoalPosteriorTrace> t;
        parallel_best = std::min(parallel_best, run_once(stimuli, cfg, scorer, true, t));
        if (r == 0) parallel_traces = std::move(t);
    }

    std::printf("serial reference : %8.3f s\n", serial_best);
    std::printf("openmp parallel  : %8.3f s\n", parallel_best);
    std::printf("speedup          : %8.2fx\n", serial_best / parallel_best);

    if (!identical(serial_traces, parallel_traces)) {
        std::cerr << "FAIL: serial and parallel traces differ\n";
        return 1;
    }
    std::cout << "traces identical : yes\n";
    return 0;
}
