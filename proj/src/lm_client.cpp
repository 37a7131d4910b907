#include "goalinf/lm_client.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <semaphore>

#include "httplib.h"
#include "json.hpp"

namespace goalinf {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4), used for content-addressed cache filenames.

namespace {

struct Sha256 {
    uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                     0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    uint64_t length = 0;
    unsigned char buf[64];
    size_t buf_len = 0;

    static uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void block(const unsigned char* p) {
        static const uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (uint32_t(p[4 * i]) << 24) | (uint32_t(p[4 * i + 1]) << 16) |
                   (uint32_t(p[4 * i + 2]) << 8) | uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6], hh = h[7];
        for (int i = 0; i < 64; ++i) {
            uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            uint32_t ch = (e & f) ^ (~e & g);
            uint32_t t1 = hh + s1 + ch + k[i] + w[i];
            uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            uint32_t mj = (a & b) ^ (a & c) ^ (b & c);
            uint32_t t2 = s0 + mj;
            hh = g; g = f; f = e; e = d + t1;
            d = c; c = b; b = a; a = t1 + t2;
        }
        h[0] += a; h[1] += b; h[2] += c; h[3] += d;
        h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
    }

    void update(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        length += n;
        while (n > 0) {
            size_t take = std::min(n, sizeof(buf) - buf_len);
            std::copy(p, p + take, buf + buf_len);
            buf_len += take;
            p += take;
            n -= take;
            if (buf_len == 64) {
                block(buf);
                buf_len = 0;
            }
        }
    }

    std::string hex() {
        uint64_t bits = length * 8;
        unsigned char pad = 0x80;
        update(&pad, 1);
        unsigned char zero = 0;
        while (buf_len != 56) update(&zero, 1);
        unsigned char len_be[8];
        for (int i = 0; i < 8; ++i) len_be[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(len_be, 8);
        static const char* digits = "0123456789abcdef";
        std::string out;
        for (uint32_t v : h)
            for (int i = 28; i >= 0; i -= 4) out += digits[(v >> i) & 0xF];
        return out;
    }
};

} // namespace

std::string sha256_hex(const std::string& data) {
    Sha256 s;
    s.update(data.data(), data.size());
    return s.hex();
}

// ---------------------------------------------------------------------------

std::string build_lm_prompt(const std::vector<FewShotExample>& examples,
                            const std::string& serialized) {
    std::string prompt;
    for (const auto& ex : examples)
        prompt += "Input: " + ex.input + "\nOutput: " + ex.output + "\n";
    prompt += "Input: " + serialized + "\nOutput:";
    return prompt;
}

struct LmClient::Impl {
    LmEndpointConfig cfg;
    std::string cache_dir;
    std::counting_semaphore<64> in_flight;
    std::mutex cache_mutex;

    Impl(LmEndpointConfig c, std::string dir)
        : cfg(std::move(c)), cache_dir(std::move(dir)),
          in_flight(std::max(1, std::min(64, cfg.max_in_flight))) {}

    std::string cache_key(const std::string& prompt, const std::string& continuation) const {
        return sha256_hex(cfg.adapter + "\x1f" + cfg.model + "\x1f" + prompt + "\x1f" +
                          continuation);
    }

    fs::path cache_path(const std::string& key) const {
        return fs::path(cache_dir) / (key + ".json");
    }

    bool read_cache(const std::string& key, LmScore& out) {
        if (cache_dir.empty()) return false;
        std::ifstream in(cache_path(key));
        if (!in) return false;
        json j;
        try {
            in >> j;
            out.logprob = j.at("logprob").get<double>();
            out.tokens = j.value("tokens", std::vector<std::string>{});
            out.token_logprobs = j.value("token_logprobs", std::vector<double>{});
        } catch (const json::exception&) {
            return false; // treat a corrupt entry as a miss
        }
        out.from_cache = true;
        return true;
    }

    void write_cache(const std::string& key, const LmScore& score) {
        if (cache_dir.empty()) return;
        std::lock_guard<std::mutex> lock(cache_mutex);
        std::error_code ec;
        fs::create_directories(cache_dir, ec);
        json j{{"logprob", score.logprob},
               {"tokens", score.tokens},
               {"token_logprobs", score.token_logprobs}};
        fs::path final_path = cache_path(key);
        fs::path tmp = final_path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp);
            out << j.dump(2) << "\n";
        }
        fs::rename(tmp, final_path, ec);
    }

    static double parse_retry_after(const httplib::Response& res) {
        if (!res.has_header("Retry-After")) return -1.0;
        try {
            return std::stod(res.get_header_value("Retry-After"));
        } catch (...) {
            return -1.0;
        }
    }

    LmScore request(const std::string& prompt, const std::string& continuation) {
        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(cfg.timeout_seconds);
        client.set_read_timeout(cfg.timeout_seconds);

        httplib::Headers headers;
        if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

        std::string path = cfg.path;
        json body;
        if (cfg.adapter == "openai") {
            if (path.empty()) path = "/v1/completions";
            body = {{"model", cfg.model},
                    {"prompt", prompt + continuation},
                    {"max_tokens", 0},
                    {"echo", true},
                    {"logprobs", 0}};
        } else {
            if (path.empty()) path = "/v1/score";
            body = {{"model", cfg.model}, {"prompt", prompt}, {"continuation", continuation}};
        }

        in_flight.acquire();
        auto res = client.Post(path, headers, body.dump(), "application/json");
        in_flight.release();

        if (!res)
            throw BackendError("LM endpoint unreachable: " + cfg.base_url +
                               " (" + httplib::to_string(res.error()) + ")");
        if (res->status != 200)
            throw BackendError("LM endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200),
                               res->status, parse_retry_after(*res));

        json j;
        try {
            j = json::parse(res->body);
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed LM response: ") + e.what());
        }

        LmScore out;
        try {
            if (cfg.adapter == "openai") {
                const json& lp = j.at("choices").at(0).at("logprobs");
                const auto offsets = lp.at("text_offset").get<std::vector<int64_t>>();
                const auto tokens = lp.at("tokens").get<std::vector<std::string>>();
                const json& tlp = lp.at("token_logprobs");
                const auto prompt_len = static_cast<int64_t>(prompt.size());
                for (size_t i = 0; i < tokens.size(); ++i) {
                    if (offsets.at(i) < prompt_len) continue;
                    if (tlp.at(i).is_null())
                        throw BackendError("null logprob for continuation token");
                    out.tokens.push_back(tokens[i]);
                    out.token_logprobs.push_back(tlp.at(i).get<double>());
                }
            } else {
                out.tokens = j.value("tokens", std::vector<std::string>{});
                out.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
            }
        } catch (const json::exception& e) {
            throw BackendError(std::string("malformed LM response: ") + e.what());
        }
        out.logprob = 0.0;
        for (double v : out.token_logprobs) out.logprob += v;
        return out;
    }
};

LmClient::LmClient(LmEndpointConfig cfg, std::string cache_dir)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(cache_dir))) {}

LmClient::~LmClient() = default;

const LmEndpointConfig& LmClient::config() const { return impl_->cfg; }

LmScore LmClient::score(const std::string& prompt, const std::string& continuation) {
    const std::string key = impl_->cache_key(prompt, continuation);
    LmScore cached;
    if (impl_->read_cache(key, cached)) return cached;
    LmScore fresh = impl_->request(prompt, continuation);
    impl_->write_cache(key, fresh);
    return fresh;
}

double LmScorer::score(const std::string& utterance, const std::string& serialized) {
    const std::string prompt = build_lm_prompt(examples_, serialized);
    return client_->score(prompt, " " + utterance).logprob;
}

} // namespace goalinf
