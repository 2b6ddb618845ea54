#include "objsearch/selection.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace objsearch {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void validate_arm(const StrategyArm& arm, std::optional<AnswerMode> template_mode)
{
    if (arm.arm_id.empty()) {
        throw ConfigError("arm id must not be empty");
    }
    switch (arm.policy_kind) {
    case PolicyKind::OptimisticGreedy:
        if (arm.template_name || arm.endpoint) {
            throw ConfigError("arm '" + arm.arm_id + "': optimistic+greedy takes no template or endpoint");
        }
        break;
    case PolicyKind::LlmModel:
        if (!arm.template_name || !arm.endpoint) {
            throw ConfigError("arm '" + arm.arm_id + "': llm+model needs a template and an endpoint");
        }
        if (!template_mode) {
            template_mode = builtin_template(*arm.template_name).answer_mode;
        }
        if (*template_mode != AnswerMode::Probability) {
            throw ConfigError("arm '" + arm.arm_id + "': llm+model needs a probability template");
        }
        break;
    case PolicyKind::LlmDirect:
        if (!arm.endpoint) {
            throw ConfigError("arm '" + arm.arm_id + "': llm-direct needs an endpoint");
        }
        if (arm.template_name) {
            if (!template_mode) {
                template_mode = builtin_template(*arm.template_name).answer_mode;
            }
            if (*template_mode != AnswerMode::ContainerChoice) {
                throw ConfigError("arm '" + arm.arm_id + "': llm-direct needs a container-choice template");
            }
        }
        break;
    }
}

std::optional<double> ArmStats::mean() const
{
    if (pulls == 0) {
        return std::nullopt;
    }
    return cost_sum / static_cast<double>(pulls);
}

std::optional<double> ArmStats::replay_mean() const
{
    if (replays == 0) {
        return std::nullopt;
    }
    return replay_sum / static_cast<double>(replays);
}

SelectionState::SelectionState(std::vector<std::string> arm_ids, ExplorationConstant c)
    : arm_ids_(std::move(arm_ids)), stats_(arm_ids_.size()), c_(c)
{
    if (arm_ids_.empty()) {
        throw ConfigError("selection needs at least one arm");
    }
    if (c_.fixed && !(*c_.fixed > 0.0)) {
        throw ConfigError("exploration constant must be positive");
    }
    if (!(c_.auto_scale > 0.0)) {
        throw ConfigError("exploration scale must be positive");
    }
}

SelectionState::SelectionState(std::vector<std::string> arm_ids, std::vector<ArmStats> stats, std::size_t trials,
                               ExplorationConstant c)
    : SelectionState(std::move(arm_ids), c)
{
    if (stats.size() != arm_ids_.size()) {
        throw PreconditionError("one ArmStats per arm is required");
    }
    std::size_t pulls = 0;
    for (const ArmStats& s : stats) {
        pulls += s.pulls;
    }
    if (pulls != trials) {
        throw PreconditionError("arm pulls must sum to the trial count");
    }
    stats_ = std::move(stats);
    trials_ = trials;
}

double SelectionState::exploration_constant() const
{
    if (c_.fixed) {
        return *c_.fixed;
    }
    if (trials_ == 0) {
        return c_.auto_scale;
    }
    double total = 0.0;
    for (const ArmStats& s : stats_) {
        total += s.cost_sum;
    }
    const double mean = total / static_cast<double>(trials_);
    return std::max(c_.auto_scale * mean, 1e-9);
}

void SelectionState::record(std::size_t deployed_arm, double deployed_cost, std::span<const double> replay_costs)
{
    if (deployed_arm >= arm_ids_.size()) {
        throw PreconditionError("deployed arm index out of range");
    }
    if (replay_costs.size() != arm_ids_.size()) {
        throw PreconditionError("a replay cost is required for every arm");
    }
    ++trials_;
    stats_[deployed_arm].pulls += 1;
    stats_[deployed_arm].cost_sum += deployed_cost;
    for (std::size_t i = 0; i < arm_ids_.size(); ++i) {
        stats_[i].replays += 1;
        stats_[i].replay_sum += replay_costs[i];
    }
}

SelectionState update_after_trial(SelectionState state, std::size_t deployed_arm, double deployed_cost,
                                  std::span<const double> replay_costs)
{
    state.record(deployed_arm, deployed_cost, replay_costs);
    return state;
}

double ucb_term(const SelectionState& state, std::size_t arm)
{
    const ArmStats& s = state.stats(arm);
    if (s.pulls == 0) {
        return kNegInf;
    }
    const double k = static_cast<double>(state.trials());
    return *s.mean() - state.exploration_constant() * std::sqrt(std::log(k) / static_cast<double>(s.pulls));
}

double replay_score(std::optional<double> replay_mean, double ucb)
{
    return std::max(replay_mean.value_or(kNegInf), ucb);
}

double replay_score(const SelectionState& state, std::size_t arm)
{
    return replay_score(state.stats(arm).replay_mean(), ucb_term(state, arm));
}

std::size_t ucb_pick(const SelectionState& state)
{
    for (std::size_t i = 0; i < state.arm_count(); ++i) {
        if (state.stats(i).pulls == 0) {
            return i;
        }
    }
    std::size_t best = 0;
    double best_score = ucb_term(state, 0);
    for (std::size_t i = 1; i < state.arm_count(); ++i) {
        const double score = ucb_term(state, i);
        if (score < best_score) {
            best = i;
            best_score = score;
        }
    }
    return best;
}

std::size_t replay_pick(const SelectionState& state)
{
    for (std::size_t i = 0; i < state.arm_count(); ++i) {
        if (state.stats(i).pulls == 0 && !state.stats(i).replay_mean()) {
            return i;
        }
    }
    std::size_t best = 0;
    double best_score = replay_score(state, 0);
    for (std::size_t i = 1; i < state.arm_count(); ++i) {
        const double score = replay_score(state, i);
        if (score < best_score) {
            best = i;
            best_score = score;
        }
    }
    return best;
}

// Hindsight ----------------------------------------------------------------------

HindsightLog make_hindsight_log(const MapInstance& instance, const std::string& target, const SearchTrace& trace,
                                const std::string& arm_id)
{
    HindsightLog log;
    log.map_id = instance.map_id;
    log.start_pose = instance.start_pose;
    log.target = target;
    log.goal_container = trace.goal_container;
    log.searched = trace.steps;
    log.deployed_arm = arm_id;
    log.deployed_cost = trace.cost;
    return log;
}

std::string hindsight_to_json(const HindsightLog& log)
{
    using nlohmann::json;
    json searched = json::array();
    for (const SearchStep& s : log.searched) {
        searched.push_back({{"container_id", s.container_id},
                            {"contents", std::vector<std::string>(s.contents.begin(), s.contents.end())},
                            {"step_cost", s.step_cost}});
    }
    const json doc = {{"deployment_id", log.deployment_id},
                      {"k", log.trial},
                      {"map_id", log.map_id},
                      {"start", {log.start_pose.row, log.start_pose.col}},
                      {"target", log.target},
                      {"goal_container", log.goal_container},
                      {"searched", std::move(searched)},
                      {"deployed_arm", log.deployed_arm},
                      {"deployed_cost", log.deployed_cost}};
    return doc.dump();
}

HindsightLog hindsight_from_json(const std::string& line)
{
    using nlohmann::json;
    try {
        const json doc = json::parse(line);
        HindsightLog log;
        log.deployment_id = doc.value("deployment_id", std::string());
        log.trial = doc.value("k", std::size_t{0});
        log.map_id = doc.at("map_id").get<std::string>();
        log.start_pose = {doc.at("start").at(0).get<int>(), doc.at("start").at(1).get<int>()};
        log.target = doc.at("target").get<std::string>();
        log.goal_container = doc.at("goal_container").get<std::string>();
        for (const json& s : doc.at("searched")) {
            const auto contents = s.at("contents").get<std::vector<std::string>>();
            log.searched.push_back({s.at("container_id").get<std::string>(), {contents.begin(), contents.end()},
                                    s.at("step_cost").get<double>()});
        }
        log.deployed_arm = doc.at("deployed_arm").get<std::string>();
        log.deployed_cost = doc.at("deployed_cost").get<double>();
        return log;
    } catch (const json::exception& e) {
        throw SchemaError("hindsight", e.what());
    }
}

MapInstance counterfactual_world(const HindsightLog& log, const MapInstance& instance)
{
    if (instance.find_container(log.goal_container) == nullptr) {
        throw PreconditionError("goal container '" + log.goal_container + "' is not in map '" + instance.map_id + "'");
    }
    MapInstance world = instance;
    world.start_pose = log.start_pose;
    for (Container& c : world.containers) {
        c.contents.clear();
    }
    for (const SearchStep& s : log.searched) {
        if (Container* c = const_cast<Container*>(world.find_container(s.container_id))) {
            c->contents = s.contents;
            if (s.container_id != log.goal_container) {
                c->contents.erase(log.target);
            }
        }
    }
    const_cast<Container*>(world.find_container(log.goal_container))->contents.insert(log.target);
    world.object_catalog.clear();
    for (const Container& c : world.containers) {
        world.object_catalog.insert(c.contents.begin(), c.contents.end());
    }
    return world;
}

double offline_replay(const HindsightLog& log, SearchPolicy& policy, const MapInstance& instance,
                      std::shared_ptr<const KnownWorld> world)
{
    const MapInstance truth = counterfactual_world(log, instance);
    if (!world || world->start() != log.start_pose || world->map_id() != instance.map_id) {
        world = KnownWorld::from_map(truth, log.start_pose);
    }
    const auto goal = world->container_index(log.goal_container);
    if (!world->distances().reachable(KnownWorld::kStartPoint, world->containers()[*goal].point)) {
        throw UnreachableError("goal container '" + log.goal_container + "' is unreachable from the start");
    }
    const SearchTrace trace = run_search(world, truth, log.target, policy, 0.0, log.goal_container);
    if (!trace.found) {
        throw Error("replay of map '" + log.map_id + "' ended without searching the goal container");
    }
    return trace.cost;
}

} // namespace objsearch
