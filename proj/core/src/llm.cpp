#include "objsearch/llm.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace objsearch {

using nlohmann::json;

namespace {

json key_json(const CacheKey& key)
{
    return {{"template", key.template_name},
            {"model", key.model_name},
            {"map_id", key.map_id},
            {"target", key.target},
            {"container_id", key.container_id}};
}

} // namespace

ResponseCache::ResponseCache(std::filesystem::path backing_file) : file_(std::move(backing_file))
{
    std::ifstream in(*file_);
    if (!in) {
        return; // created on first append
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const json rec = json::parse(line);
            CacheKey key{rec.at("template").get<std::string>(), rec.at("model").get<std::string>(),
                         rec.at("map_id").get<std::string>(), rec.at("target").get<std::string>(),
                         rec.at("container_id").get<std::string>()};
            CachedResponse value{rec.at("response").get<std::string>(), rec.value("input_tokens", 0L),
                                 rec.value("output_tokens", 0L)};
            entries_[std::move(key)] = std::move(value);
        } catch (const json::exception& e) {
            throw SchemaError(file_->string() + ":" + std::to_string(line_no), e.what());
        }
    }
}

std::optional<CachedResponse> ResponseCache::lookup(const CacheKey& key) const
{
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void ResponseCache::store(const CacheKey& key, CachedResponse value)
{
    std::lock_guard lock(mutex_);
    append_locked(key, value);
    entries_[key] = std::move(value);
}

void ResponseCache::append_locked(const CacheKey& key, const CachedResponse& value)
{
    if (!file_) {
        return;
    }
    std::ofstream out(*file_, std::ios::app | std::ios::binary);
    if (!out) {
        throw ConfigError("cannot append to cache file '" + file_->string() + "'");
    }
    json rec = key_json(key);
    rec["response"] = value.response;
    rec["input_tokens"] = value.input_tokens;
    rec["output_tokens"] = value.output_tokens;
    out << rec.dump() << '\n';
}

CachedResponse ResponseCache::get_or_fetch(const CacheKey& key, const std::function<CachedResponse()>& fetch)
{
    std::promise<CachedResponse> promise;
    {
        std::unique_lock lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            return it->second;
        }
        if (auto it = in_flight_.find(key); it != in_flight_.end()) {
            std::shared_future<CachedResponse> pending = it->second;
            lock.unlock();
            return pending.get();
        }
        in_flight_.emplace(key, promise.get_future().share());
    }

    CachedResponse value;
    try {
        value = fetch();
    } catch (...) {
        std::lock_guard lock(mutex_);
        in_flight_.erase(key);
        promise.set_exception(std::current_exception());
        throw;
    }

    std::lock_guard lock(mutex_);
    append_locked(key, value);
    entries_[key] = value;
    in_flight_.erase(key);
    promise.set_value(value);
    return value;
}

std::size_t ResponseCache::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void TokenLedger::record(const ModelEndpoint& endpoint, long input_tokens, long output_tokens)
{
    std::lock_guard lock(mutex_);
    Counters& c = counters_[endpoint.name];
    c.input_tokens += input_tokens;
    c.output_tokens += output_tokens;
    c.calls += 1;
    c.usd += (input_tokens * endpoint.usd_per_million_input + output_tokens * endpoint.usd_per_million_output) / 1e6;
}

TokenLedger::Counters TokenLedger::counters(const std::string& endpoint_name) const
{
    std::lock_guard lock(mutex_);
    auto it = counters_.find(endpoint_name);
    return it == counters_.end() ? Counters{} : it->second;
}

std::map<std::string, TokenLedger::Counters> TokenLedger::snapshot() const
{
    std::lock_guard lock(mutex_);
    return counters_;
}

std::string TokenLedger::to_json() const
{
    json doc = json::object();
    for (const auto& [name, c] : snapshot()) {
        doc[name] = {{"input_tokens", c.input_tokens},
                     {"output_tokens", c.output_tokens},
                     {"total_tokens", c.input_tokens + c.output_tokens},
                     {"calls", c.calls},
                     {"usd", c.usd}};
    }
    return doc.dump(1) + "\n";
}

// HTTP ------------------------------------------------------------------------

namespace {

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL '" + url + "' has no scheme");
    }
    const auto path_begin = url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_begin), url.substr(path_begin)};
}

bool transient_status(int status)
{
    return status == 429 || status >= 500;
}

} // namespace

ChatResult HttpChatClient::complete(const ModelEndpoint& endpoint, const std::string& prompt)
{
    const SplitUrl url = split_url(endpoint.base_url);
    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
        const char* key = std::getenv(endpoint.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigError("API key environment variable '" + endpoint.api_key_env + "' is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const json body = {{"model", endpoint.model_id},
                       {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                       {"temperature", endpoint.temperature},
                       {"max_tokens", endpoint.max_tokens}};
    const std::string payload = body.dump();

    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration<double>(endpoint.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    std::string last_failure;
    for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay = endpoint.backoff_seconds * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (transient_status(res->status)) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw NetworkError("endpoint '" + endpoint.name + "' returned HTTP " + std::to_string(res->status) +
                               ": " + res->body.substr(0, 200));
        }
        try {
            const json doc = json::parse(res->body);
            ChatResult out;
            out.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
            if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
                out.input_tokens = usage->value("prompt_tokens", 0L);
                out.output_tokens = usage->value("completion_tokens", 0L);
            }
            return out;
        } catch (const json::exception& e) {
            throw NetworkError("endpoint '" + endpoint.name + "' sent a malformed completion: " + e.what());
        }
    }
    throw NetworkError("endpoint '" + endpoint.name + "' failed after " + std::to_string(endpoint.max_retries + 1) +
                       " attempts (" + last_failure + ")");
}

CachedResponse cached_completion(const ModelEndpoint& endpoint, const CacheKey& key, const std::string& prompt,
                                 ResponseCache& cache, TokenLedger& ledger, ChatClient& client)
{
    return cache.get_or_fetch(key, [&] {
        const ChatResult result = client.complete(endpoint, prompt);
        ledger.record(endpoint, result.input_tokens, result.output_tokens);
        return CachedResponse{result.text, result.input_tokens, result.output_tokens};
    });
}

double llm_likelihood(const ModelEndpoint& endpoint, const PromptTemplate& tmpl, const LikelihoodQuery& query,
                      ResponseCache& cache, TokenLedger& ledger, ChatClient& client)
{
    if (tmpl.answer_mode != AnswerMode::Probability) {
        throw PreconditionError("template '" + tmpl.name + "' does not ask for a probability");
    }
    const CacheKey key{tmpl.name, endpoint.name, query.map_id, query.target, query.container_id};
    // Rendering only happens on a miss; a warm cache needs no prompt inputs.
    if (auto hit = cache.lookup(key)) {
        return parse_probability(hit->response);
    }
    const std::string prompt = render_prompt(tmpl, query);
    return parse_probability(cached_completion(endpoint, key, prompt, cache, ledger, client).response);
}

LlmProbabilityProvider::LlmProbabilityProvider(ModelEndpoint endpoint, PromptTemplate tmpl, ResponseCache& cache,
                                               TokenLedger& ledger, ChatClient& client)
    : endpoint_(std::move(endpoint)), template_(std::move(tmpl)), cache_(cache), ledger_(ledger), client_(client)
{
}

double LlmProbabilityProvider::probability(const LikelihoodQuery& query)
{
    try {
        return llm_likelihood(endpoint_, template_, query, cache_, ledger_, client_);
    } catch (const UnparsableResponseError&) {
        return kFallbackProbability;
    }
}

} // namespace objsearch
