#pragma once

#include "objsearch/likelihood.hpp"

#include <compare>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace objsearch {

/// A chat-completion style HTTP endpoint.
struct ModelEndpoint {
    std::string name;
    std::string base_url; ///< full URL the request is POSTed to
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 256;
    std::string api_key_env; ///< empty: send no Authorization header
    double usd_per_million_input = 0.0;
    double usd_per_million_output = 0.0;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    double backoff_seconds = 0.5; ///< first retry delay; doubles each retry
};

/// Transport failure that survived all retries, or a non-transient HTTP error.
class NetworkError : public Error {
public:
    using Error::Error;
};

struct CacheKey {
    std::string template_name;
    std::string model_name;
    std::string map_id;
    std::string target;
    std::string container_id;

    friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

struct CachedResponse {
    std::string response;
    long input_tokens = 0;
    long output_tokens = 0;
};

/// Raw LLM responses keyed by (template, model, map, target, container).
/// With a backing file, entries are appended as JSONL and reloaded on
/// construction. Concurrent misses on one key share a single fetch.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path backing_file);

    ResponseCache(const ResponseCache&) = delete;
    ResponseCache& operator=(const ResponseCache&) = delete;

    std::optional<CachedResponse> lookup(const CacheKey& key) const;
    void store(const CacheKey& key, CachedResponse value);
    CachedResponse get_or_fetch(const CacheKey& key, const std::function<CachedResponse()>& fetch);

    std::size_t size() const;
    const std::optional<std::filesystem::path>& backing_file() const noexcept { return file_; }

private:
    void append_locked(const CacheKey& key, const CachedResponse& value);

    mutable std::mutex mutex_;
    std::map<CacheKey, CachedResponse> entries_;
    std::map<CacheKey, std::shared_future<CachedResponse>> in_flight_;
    std::optional<std::filesystem::path> file_;
};

class TokenLedger {
public:
    struct Counters {
        long input_tokens = 0;
        long output_tokens = 0;
        long calls = 0;
        double usd = 0.0;
    };

    void record(const ModelEndpoint& endpoint, long input_tokens, long output_tokens);
    Counters counters(const std::string& endpoint_name) const;
    std::map<std::string, Counters> snapshot() const;
    std::string to_json() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, Counters> counters_;
};

struct ChatResult {
    std::string text;
    long input_tokens = 0;
    long output_tokens = 0;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResult complete(const ModelEndpoint& endpoint, const std::string& prompt) = 0;
};

/// POSTs {model, messages, temperature, max_tokens} to endpoint.base_url and
/// reads choices[0].message.content plus usage counts. Timeouts, 429 and 5xx
/// are retried up to endpoint.max_retries times with exponential backoff.
class HttpChatClient final : public ChatClient {
public:
    ChatResult complete(const ModelEndpoint& endpoint, const std::string& prompt) override;
};

/// One cached chat completion, recorded in the ledger on a miss.
CachedResponse cached_completion(const ModelEndpoint& endpoint, const CacheKey& key, const std::string& prompt,
                                 ResponseCache& cache, TokenLedger& ledger, ChatClient& client);

/// P_S from an LLM. Throws UnparsableResponseError or NetworkError.
double llm_likelihood(const ModelEndpoint& endpoint, const PromptTemplate& tmpl, const LikelihoodQuery& query,
                      ResponseCache& cache, TokenLedger& ledger, ChatClient& client);

/// ProbabilityProvider over llm_likelihood. Unparsable answers become
/// kFallbackProbability; network failures propagate.
class LlmProbabilityProvider final : public ProbabilityProvider {
public:
    LlmProbabilityProvider(ModelEndpoint endpoint, PromptTemplate tmpl, ResponseCache& cache, TokenLedger& ledger,
                           ChatClient& client);
    double probability(const LikelihoodQuery& query) override;

    const ModelEndpoint& endpoint() const noexcept { return endpoint_; }
    const PromptTemplate& prompt_template() const noexcept { return template_; }

private:
    ModelEndpoint endpoint_;
    PromptTemplate template_;
    ResponseCache& cache_;
    TokenLedger& ledger_;
    ChatClient& client_;
};

} // namespace objsearch
