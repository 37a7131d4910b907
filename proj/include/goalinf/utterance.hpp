#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goalinf/gridworld.hpp"

namespace goalinf {

// One assistant step worth communicating: a handover or an unlock, with the
// color bindings the instruction mentions (the key for handovers, the door
// for unlocks).
struct SalientAction {
    Verb verb = Verb::handover; // handover or unlock
    Role actor = Role::assistant;
    std::vector<std::string> args; // handover: {key id}; unlock: {key id, door id}
    std::vector<std::pair<std::string, Color>> color_bindings; // first-mention order
};

using SalientActionList = std::vector<SalientAction>;

struct UtteranceObservation {
    bool communicated = false;
    std::optional<std::string> text; // present iff communicated
};

struct FewShotExample {
    std::string input;  // serialized salient actions
    std::string output; // instruction text
};

enum class ScorerBackend { template_backend, external_lm };

struct UtteranceModelConfig {
    double p_communicate = 0.95;
    std::vector<FewShotExample> examples;
    ScorerBackend backend = ScorerBackend::template_backend;
};

// The assistant's handover and unlock steps of a joint plan, in plan order.
SalientActionList extract_salient(const GridMap& map,
                                  const std::vector<std::pair<Role, Action>>& plan);

// "(handover robot human key2) where (iscolor key2 blue)" and friends; the
// empty list serializes to the empty string.
std::string serialize_salient(const SalientActionList& sal);

// log P(u | serialized salient actions). Implementations must be correct up
// to a positive constant shared across inputs scored with the same u.
class UtteranceScorer {
  public:
    virtual ~UtteranceScorer() = default;
    virtual double score(const std::string& utterance, const std::string& serialized) = 0;
};

// Offline deterministic backend: scores the utterance by smoothed
// bag-of-content-words overlap with the best of a set of canonical phrase
// templates generated from the serialized salient actions.
class TemplateScorer final : public UtteranceScorer {
  public:
    double score(const std::string& utterance, const std::string& serialized) override;

    // Exposed for tests: the closed content vocabulary and tokenizer.
    static const std::vector<std::string>& vocabulary();
    static std::vector<std::string> content_words(const std::string& text);
    static constexpr double kSmoothing = 0.1;
};

// log P(u, c | salient actions): the communicate Bernoulli branch, plus the
// backend score of the text when an utterance is present.
double utterance_likelihood(const UtteranceObservation& obs, const SalientActionList& sal,
                            const UtteranceModelConfig& cfg, UtteranceScorer& scorer);

} // namespace goalinf
