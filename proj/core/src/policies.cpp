#include "objsearch/policies.hpp"

#include <algorithm>
#include <sstream>

namespace objsearch {

std::string_view to_string(PolicyKind kind)
{
    switch (kind) {
    case PolicyKind::LlmModel:
        return "llm+model";
    case PolicyKind::LlmDirect:
        return "llm-direct";
    case PolicyKind::OptimisticGreedy:
        return "optimistic+greedy";
    }
    return "unknown";
}

PolicyKind policy_kind_from_string(std::string_view text)
{
    if (text == "llm+model") return PolicyKind::LlmModel;
    if (text == "llm-direct") return PolicyKind::LlmDirect;
    if (text == "optimistic+greedy") return PolicyKind::OptimisticGreedy;
    throw ConfigError("unknown policy kind '" + std::string(text) + "'");
}

LikelihoodQuery make_query(const KnownWorld& world, std::size_t container, const std::string& target)
{
    const ContainerInfo& c = world.containers().at(container);
    return {target, c.id, c.kind, c.room_kind, world.house(), world.map_id()};
}

std::vector<ActionEstimate> estimate_actions(const BeliefState& belief, const std::string& target,
                                             ProbabilityProvider& provider, double search_cost,
                                             std::vector<std::string>* failures)
{
    const KnownWorld& world = belief.world();
    std::vector<ActionEstimate> out;
    for (std::size_t i : belief.actions()) {
        const ContainerInfo& c = world.containers()[i];
        double p = kFallbackProbability;
        try {
            p = std::clamp(provider.probability(make_query(world, i, target)), 0.0, 1.0);
        } catch (const NetworkError&) {
            throw;
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            if (failures != nullptr) {
                failures->emplace_back(e.what());
            }
        }
        out.push_back({{c.id}, c.point, world.distances().at(belief.pose_point(), c.point), search_cost, p});
    }
    return out;
}

SearchAction next_action_llm_model(const BeliefState& belief, const std::string& target,
                                   ProbabilityProvider& provider, std::size_t cap, double search_cost,
                                   std::vector<std::string>* failures)
{
    const std::vector<ActionEstimate> estimates = estimate_actions(belief, target, provider, search_cost, failures);
    if (estimates.empty()) {
        throw EmptyActionSetError("no reachable unexplored containers");
    }
    const std::vector<ActionEstimate> candidates =
        select_candidates(estimates, cap, belief.world().grid().resolution());
    const Plan plan = plan_expected_cost(candidates, belief.world().distances(), belief.pose_point());
    return plan.ordering.front();
}

SearchAction ModelBasedPolicy::next_action(const BeliefState& belief, const std::string& target)
{
    return next_action_llm_model(belief, target, provider_, cap_, search_cost_, &failures_);
}

SearchAction next_action_optimistic_greedy(const BeliefState& belief)
{
    const KnownWorld& world = belief.world();
    const std::vector<std::size_t> actions = belief.actions();
    if (actions.empty()) {
        throw EmptyActionSetError("no reachable unexplored containers");
    }
    // actions() is in id order, so strict < keeps the smaller id on ties.
    std::size_t best = actions.front();
    double best_d = world.distances().at(belief.pose_point(), world.containers()[best].point);
    for (std::size_t i : actions) {
        const double d = world.distances().at(belief.pose_point(), world.containers()[i].point);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return {world.containers()[best].id};
}

DirectRequest make_direct_request(const BeliefState& belief, const std::string& target, const PromptTemplate& tmpl)
{
    const KnownWorld& world = belief.world();
    DirectRequest req;
    req.target = target;
    req.map_id = world.map_id();

    std::ostringstream list;
    std::ostringstream key;
    key << (belief.pose_point() == KnownWorld::kStartPoint
                ? std::string("start")
                : world.containers()[belief.pose_point() - 1].id)
        << '|';
    bool first = true;
    for (std::size_t i : belief.actions()) {
        const ContainerInfo& c = world.containers()[i];
        req.candidates.push_back({c.id, c.kind, c.room_kind, world.distances().at(belief.pose_point(), c.point)});
        list << (first ? "" : "\n") << "- " << c.id << " (" << c.kind << " in the " << c.room_kind << ")";
        key << (first ? "" : ",") << c.id;
        first = false;
    }
    req.state_key = key.str();

    LikelihoodQuery query;
    query.target = target;
    query.room_kind = world.room_kind_at(belief.pose());
    query.house = world.house();
    query.map_id = world.map_id();
    DirectPromptExtras extras{list.str(), world.room_distance_table()};
    req.prompt = render_prompt(tmpl, query, extras);
    return req;
}

SearchAction next_action_llm_direct(const BeliefState& belief, const std::string& target, ContainerChooser& chooser,
                                    const PromptTemplate& tmpl)
{
    const std::vector<std::size_t> actions = belief.actions();
    if (actions.empty()) {
        throw EmptyActionSetError("no reachable unexplored containers");
    }
    if (actions.size() == 1) {
        return {belief.world().containers()[actions.front()].id};
    }

    DirectRequest req = make_direct_request(belief, target, tmpl);
    std::vector<ChoiceCandidate> candidates;
    for (const DirectCandidate& c : req.candidates) {
        candidates.push_back({c.id, c.kind});
    }
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.attempt = attempt;
        if (attempt == 1) {
            req.prompt += kDirectReprompt;
        }
        try {
            return {parse_container_choice(chooser.respond(req), candidates)};
        } catch (const NoMatchError&) {
        }
    }
    return next_action_optimistic_greedy(belief);
}

std::string PriorChooser::respond(const DirectRequest& request)
{
    const DirectCandidate* best = nullptr;
    double best_p = -1.0;
    for (const DirectCandidate& c : request.candidates) {
        const LikelihoodQuery q{request.target, c.id, c.kind, c.room_kind, {}, request.map_id};
        const double p = prior_likelihood(prior_, q, noise_);
        if (best == nullptr || p > best_p || (p == best_p && c.travel_cost < best->travel_cost)) {
            best = &c;
            best_p = p;
        }
    }
    if (best == nullptr) {
        return "There is nothing left to search.";
    }
    return "The robot should search " + best->id + " next.";
}

std::string LlmChooser::respond(const DirectRequest& request)
{
    const CacheKey key{template_name_, endpoint_.name, request.map_id, request.target,
                       "direct:" + request.state_key + "#" + std::to_string(request.attempt)};
    return cached_completion(endpoint_, key, request.prompt, cache_, ledger_, client_).response;
}

SearchTrace run_search(std::shared_ptr<const KnownWorld> world, const MapInstance& truth, const std::string& target,
                       SearchPolicy& policy, double search_cost, const std::optional<std::string>& stop_at)
{
    SearchTrace trace;
    BeliefState belief(std::move(world));
    std::set<std::string> issued;
    while (!belief.actions().empty()) {
        const SearchAction action = policy.next_action(belief, target);
        if (!issued.insert(action.container_id).second) {
            throw PreconditionError("policy chose container '" + action.container_id + "' twice");
        }
        SearchOutcome outcome = execute_search(belief, action, truth, target, search_cost);
        trace.cost += outcome.step_cost;
        trace.steps.push_back(
            {action.container_id, outcome.belief.observed_contents().at(action.container_id), outcome.step_cost});
        belief = std::move(outcome.belief);
        if (outcome.found) {
            trace.found = true;
            trace.goal_container = action.container_id;
            break;
        }
        if (stop_at && action.container_id == *stop_at) {
            break;
        }
    }
    return trace;
}

} // namespace objsearch
