#pragma once

#include <string>

#include "goalinf/lm_client.hpp"
#include "goalinf/planner.hpp"
#include "goalinf/utterance.hpp"

namespace goalinf {

// Everything a run needs beyond the stimulus files themselves. Loaded from a
// JSON config file and/or CLI flags; all randomness (bootstrap only) flows
// from the one seed.
struct RunConfig {
    double temperature = 1.0;
    double p_communicate = 0.95;
    ScorerBackend backend = ScorerBackend::template_backend;
    uint64_t seed = 0;
    int threads = 0; // 0 = library default; 1 = serial
    std::string cache_dir = ".goalinf_cache";
    std::string fewshot_file; // empty = built-in default set
    int64_t search_budget = 100000;
    LmEndpointConfig lm;

    PlannerConfig planner_config() const {
        PlannerConfig p;
        p.temperature = temperature;
        p.search_budget = search_budget;
        return p;
    }
};

} // namespace goalinf
