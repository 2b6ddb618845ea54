#pragma once

#include "objsearch/llm.hpp"
#include "objsearch/planner.hpp"

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace objsearch {

enum class PolicyKind { LlmModel, LlmDirect, OptimisticGreedy };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view text);

/// Maps a belief state to the next container to search.
class SearchPolicy {
public:
    virtual ~SearchPolicy() = default;
    virtual SearchAction next_action(const BeliefState& belief, const std::string& target) = 0;
    virtual PolicyKind kind() const noexcept = 0;
};

/// P_S for every reachable unexplored container. Provider failures fall back
/// to kFallbackProbability and are appended to `failures` when given;
/// NetworkError and ConfigError propagate.
std::vector<ActionEstimate> estimate_actions(const BeliefState& belief, const std::string& target,
                                             ProbabilityProvider& provider, double search_cost = 0.0,
                                             std::vector<std::string>* failures = nullptr);

LikelihoodQuery make_query(const KnownWorld& world, std::size_t container, const std::string& target);

/// llm+model: candidates by select_candidates, then the first action of the
/// exact expected-cost plan.
SearchAction next_action_llm_model(const BeliefState& belief, const std::string& target,
                                   ProbabilityProvider& provider, std::size_t cap = 8, double search_cost = 0.0,
                                   std::vector<std::string>* failures = nullptr);

/// optimistic+greedy: nearest reachable unexplored container, id on ties.
SearchAction next_action_optimistic_greedy(const BeliefState& belief);

class ModelBasedPolicy final : public SearchPolicy {
public:
    explicit ModelBasedPolicy(ProbabilityProvider& provider, std::size_t cap = 8, double search_cost = 0.0)
        : provider_(provider), cap_(cap), search_cost_(search_cost)
    {
    }
    SearchAction next_action(const BeliefState& belief, const std::string& target) override;
    PolicyKind kind() const noexcept override { return PolicyKind::LlmModel; }

    /// Messages of provider failures replaced by the fallback probability.
    const std::vector<std::string>& failures() const noexcept { return failures_; }
    void clear_failures() { failures_.clear(); }

private:
    ProbabilityProvider& provider_;
    std::size_t cap_;
    double search_cost_;
    std::vector<std::string> failures_;
};

class OptimisticGreedyPolicy final : public SearchPolicy {
public:
    SearchAction next_action(const BeliefState& belief, const std::string&) override
    {
        return next_action_optimistic_greedy(belief);
    }
    PolicyKind kind() const noexcept override { return PolicyKind::OptimisticGreedy; }
};

// llm-direct -------------------------------------------------------------------

struct DirectCandidate {
    std::string id;
    std::string kind;
    std::string room_kind;
    double travel_cost = 0.0;
};

struct DirectRequest {
    std::string prompt;
    std::string target;
    std::string map_id;
    /// Identifies the belief state (pose and unexplored set).
    std::string state_key;
    int attempt = 0;
    std::vector<DirectCandidate> candidates;
};

/// Answers a container-choice prompt with free text.
class ContainerChooser {
public:
    virtual ~ContainerChooser() = default;
    virtual std::string respond(const DirectRequest& request) = 0;
};

/// Offline stand-in for a direct-answer LLM: names the candidate with the
/// highest (optionally noisy) prior probability, nearest first on ties.
class PriorChooser final : public ContainerChooser {
public:
    explicit PriorChooser(PriorTable prior, std::optional<PriorNoise> noise = std::nullopt)
        : prior_(std::move(prior)), noise_(noise)
    {
    }
    std::string respond(const DirectRequest& request) override;

private:
    PriorTable prior_;
    std::optional<PriorNoise> noise_;
};

/// Sends the prompt to an endpoint through the response cache.
class LlmChooser final : public ContainerChooser {
public:
    LlmChooser(ModelEndpoint endpoint, std::string template_name, ResponseCache& cache, TokenLedger& ledger,
               ChatClient& client)
        : endpoint_(std::move(endpoint)), template_name_(std::move(template_name)), cache_(cache), ledger_(ledger),
          client_(client)
    {
    }
    std::string respond(const DirectRequest& request) override;

private:
    ModelEndpoint endpoint_;
    std::string template_name_;
    ResponseCache& cache_;
    TokenLedger& ledger_;
    ChatClient& client_;
};

/// Text appended to the prompt when the first answer named no container.
inline constexpr std::string_view kDirectReprompt =
    "\n\nYour previous answer did not name any container from the list. Reply with exactly one container name "
    "from the list above.";

/// llm-direct: renders the container-choice template for the current
/// belief, asks the chooser, and parses its answer. One reprompt on a
/// non-matching answer, then the nearest container.
SearchAction next_action_llm_direct(const BeliefState& belief, const std::string& target, ContainerChooser& chooser,
                                    const PromptTemplate& tmpl);

/// The rendered direct prompt and request for a belief; exposed for tests.
DirectRequest make_direct_request(const BeliefState& belief, const std::string& target, const PromptTemplate& tmpl);

class DirectPolicy final : public SearchPolicy {
public:
    explicit DirectPolicy(ContainerChooser& chooser, PromptTemplate tmpl = builtin_template(kDirect))
        : chooser_(chooser), template_(std::move(tmpl))
    {
    }
    SearchAction next_action(const BeliefState& belief, const std::string& target) override
    {
        return next_action_llm_direct(belief, target, chooser_, template_);
    }
    PolicyKind kind() const noexcept override { return PolicyKind::LlmDirect; }

private:
    ContainerChooser& chooser_;
    PromptTemplate template_;
};

// Search loop -----------------------------------------------------------------

struct SearchStep {
    std::string container_id;
    std::set<std::string> contents;
    double step_cost = 0.0;
};

struct SearchTrace {
    bool found = false;
    std::string goal_container; ///< empty unless found
    double cost = 0.0;
    std::vector<SearchStep> steps;
};

/// Asks `policy` for actions and executes them against `truth` until the
/// target is found, or until no reachable container is left. The policy is
/// consulted afresh after every failed search. When `stop_at` is set the
/// loop also ends once that container has been searched.
SearchTrace run_search(std::shared_ptr<const KnownWorld> world, const MapInstance& truth, const std::string& target,
                       SearchPolicy& policy, double search_cost = 0.0,
                       const std::optional<std::string>& stop_at = std::nullopt);

} // namespace objsearch
