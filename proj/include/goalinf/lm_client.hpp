#pragma once

#include <memory>
#include <string>
#include <vector>

#include "goalinf/utterance.hpp"

namespace goalinf {

// Wire contract for external language-model scoring. The "native" adapter
// POSTs {model, prompt, continuation} to <base_url><path> and expects
// {tokens, token_logprobs} back. The "openai" adapter speaks the classic
// completions API with echoed logprobs and sums the continuation tokens.
struct LmEndpointConfig {
    std::string base_url;            // http://host:port
    std::string model;
    std::string adapter = "native";  // native | openai
    std::string path;                // default depends on adapter
    std::string api_key_env = "LM_API_KEY";
    int timeout_seconds = 60;
    int max_in_flight = 4;
};

struct LmScore {
    double logprob = 0.0;
    std::vector<std::string> tokens;
    std::vector<double> token_logprobs;
    bool from_cache = false;
};

class LmClient {
  public:
    // cache_dir empty disables the disk cache.
    LmClient(LmEndpointConfig cfg, std::string cache_dir);
    ~LmClient();

    // Sum of the continuation's token log-probabilities under the prompt.
    // Throws BackendError on transport, auth or protocol failures.
    LmScore score(const std::string& prompt, const std::string& continuation);

    const LmEndpointConfig& config() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Builds the few-shot prompt: example Input/Output pairs followed by the
// query input and a bare "Output:"; the utterance is scored as the
// continuation " <utterance>".
std::string build_lm_prompt(const std::vector<FewShotExample>& examples,
                            const std::string& serialized);

// UtteranceScorer backed by an LmClient.
class LmScorer final : public UtteranceScorer {
  public:
    LmScorer(std::shared_ptr<LmClient> client, std::vector<FewShotExample> examples)
        : client_(std::move(client)), examples_(std::move(examples)) {}

    double score(const std::string& utterance, const std::string& serialized) override;

  private:
    std::shared_ptr<LmClient> client_;
    std::vector<FewShotExample> examples_;
};

std::string sha256_hex(const std::string& data);

} // namespace goalinf
