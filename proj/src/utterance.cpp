#include "goalinf/utterance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

namespace goalinf {

SalientActionList extract_salient(const GridMap& map,
                                  const std::vector<std::pair<Role, Action>>& plan) {
    SalientActionList out;
    for (const auto& [actor, action] : plan) {
        if (actor != Role::assistant) continue;
        if (action.verb == Verb::handover) {
            const Item& key = map.items[action.arg0];
            SalientAction sa;
            sa.verb = Verb::handover;
            sa.actor = actor;
            sa.args = {key.id};
            sa.color_bindings = {{key.id, key.color}};
            out.push_back(std::move(sa));
        } else if (action.verb == Verb::unlock) {
            const Item& key = map.items[action.arg0];
            const Item& door = map.items[action.arg1];
            SalientAction sa;
            sa.verb = Verb::unlock;
            sa.actor = actor;
            sa.args = {key.id, door.id};
            // Instructions mention the door color; the key color is implied.
            sa.color_bindings = {{door.id, door.color}};
            out.push_back(std::move(sa));
        }
    }
    return out;
}

std::string serialize_salient(const SalientActionList& sal) {
    if (sal.empty()) return "";
    std::string preds;
    std::vector<std::pair<std::string, Color>> bindings; // first-mention order, deduped
    for (const SalientAction& sa : sal) {
        if (!preds.empty()) preds += " ";
        if (sa.verb == Verb::handover) {
            preds += "(handover robot human " + sa.args[0] + ")";
        } else {
            preds += "(unlockr robot " + sa.args[0] + " " + sa.args[1] + ")";
        }
        for (const auto& b : sa.color_bindings) {
            bool seen = false;
            for (const auto& prev : bindings)
                if (prev.first == b.first) seen = true;
            if (!seen) bindings.push_back(b);
        }
    }
    std::string clauses;
    for (const auto& [id, color] : bindings) {
        if (!clauses.empty()) clauses += " ";
        clauses += "(iscolor " + id + " " + to_string(color) + ")";
    }
    return preds + " where " + clauses;
}

namespace {

// Minimal reader for the serialized form, enough to recover (verb, color)
// per salient action for template generation.
struct ParsedSalient {
    Verb verb;
    std::string color_word;
};

std::vector<ParsedSalient> read_serialized(const std::string& serialized) {
    std::vector<ParsedSalient> out;
    if (serialized.empty()) return out;

    // Split into "(...)" groups.
    std::vector<std::vector<std::string>> groups;
    size_t pos = 0;
    while ((pos = serialized.find('(', pos)) != std::string::npos) {
        size_t close = serialized.find(')', pos);
        if (close == std::string::npos) break;
        std::istringstream in(serialized.substr(pos + 1, close - pos - 1));
        std::vector<std::string> toks;
        std::string t;
        while (in >> t) toks.push_back(t);
        groups.push_back(std::move(toks));
        pos = close + 1;
    }

    std::map<std::string, std::string> color_of; // item id -> color word
    for (const auto& g : groups)
        if (g.size() == 3 && g[0] == "iscolor") color_of[g[1]] = g[2];

    for (const auto& g : groups) {
        if (g.empty()) continue;
        if (g[0] == "handover" && g.size() == 4) {
            out.push_back({Verb::handover, color_of.count(g[3]) ? color_of[g[3]] : ""});
        } else if (g[0] == "unlockr" && g.size() == 4) {
            out.push_back({Verb::unlock, color_of.count(g[3]) ? color_of[g[3]] : ""});
        }
    }
    return out;
}

const std::vector<std::string>& handover_verbs() {
    static const std::vector<std::string> v = {"pass", "hand", "give", "bring"};
    return v;
}

const std::vector<std::string>& unlock_verbs() {
    static const std::vector<std::string> v = {"unlock", "open"};
    return v;
}

} // namespace

const std::vector<std::string>& TemplateScorer::vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        for (int c = 0; c < 8; ++c) v.push_back(to_string(static_cast<Color>(c)));
        for (const auto& w : unlock_verbs()) v.push_back(w);
        for (const auto& w : handover_verbs()) v.push_back(w);
        v.push_back("key");
        v.push_back("door");
        v.push_back("gem");
        return v;
    }();
    return vocab;
}

std::vector<std::string> TemplateScorer::content_words(const std::string& text) {
    const auto& vocab = vocabulary();
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        // light plural stripping for the item nouns
        if (word == "keys" || word == "doors" || word == "gems") word.pop_back();
        if (std::find(vocab.begin(), vocab.end(), word) != vocab.end()) out.push_back(word);
        word.clear();
    };
    for (char ch : text) {
        if (std::isalpha(static_cast<unsigned char>(ch)))
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        else
            flush();
    }
    flush();
    return out;
}

double TemplateScorer::score(const std::string& utterance, const std::string& serialized) {
    const auto& vocab = vocabulary();
    const double lambda = kSmoothing;
    const double vocab_mass = lambda * static_cast<double>(vocab.size());
    const std::vector<std::string> words = content_words(utterance);

    auto bag_score = [&](const std::map<std::string, int>& bag, int bag_size) {
        double lp = 0.0;
        for (const std::string& w : words) {
            auto it = bag.find(w);
            int cnt = it == bag.end() ? 0 : it->second;
            lp += std::log((cnt + lambda) / (bag_size + vocab_mass));
        }
        return lp;
    };

    const std::vector<ParsedSalient> actions = read_serialized(serialized);
    if (actions.empty()) return bag_score({}, 0);

    // Enumerate verb paraphrase choices per action (capped) and keep the best
    // template bag.
    size_t combos = 1;
    std::vector<size_t> radix;
    for (const auto& a : actions) {
        size_t n = a.verb == Verb::handover ? handover_verbs().size() : unlock_verbs().size();
        radix.push_back(n);
        combos *= n;
    }
    const size_t combo_cap = 1024;
    combos = std::min(combos, combo_cap);

    double best = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < combos; ++c) {
        std::map<std::string, int> bag;
        int bag_size = 0;
        size_t rem = c;
        for (size_t i = 0; i < actions.size(); ++i) {
            size_t choice = rem % radix[i];
            rem /= radix[i];
            const auto& verbs =
                actions[i].verb == Verb::handover ? handover_verbs() : unlock_verbs();
            bag[verbs[choice]]++;
            bag[actions[i].verb == Verb::handover ? "key" : "door"]++;
            bag_size += 2;
            if (!actions[i].color_word.empty()) {
                bag[actions[i].color_word]++;
                ++bag_size;
            }
        }
        best = std::max(best, bag_score(bag, bag_size));
    }
    return best;
}

double utterance_likelihood(const UtteranceObservation& obs, const SalientActionList& sal,
                            const UtteranceModelConfig& cfg, UtteranceScorer& scorer) {
    const bool has_salient = !sal.empty();
    const double p_true = has_salient ? cfg.p_communicate : 1.0 - cfg.p_communicate;
    if (!obs.communicated) return std::log(1.0 - p_true);
    double lp = std::log(p_true);
    if (obs.text) lp += scorer.score(*obs.text, serialize_salient(sal));
    return lp;
}

} // namespace goalinf
