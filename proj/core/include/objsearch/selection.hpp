#pragma once

#include "objsearch/policies.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace objsearch {

/// A (policy, prompt template, model endpoint) combination.
struct StrategyArm {
    std::string arm_id;
    PolicyKind policy_kind = PolicyKind::OptimisticGreedy;
    std::optional<std::string> template_name;
    std::optional<std::string> endpoint;
};

/// Throws ConfigError if the arm's template/endpoint do not fit its policy.
/// `template_mode` is the answer mode of the arm's template; when absent the
/// template is looked up among the built-in ones.
void validate_arm(const StrategyArm& arm, std::optional<AnswerMode> template_mode = std::nullopt);

struct ArmStats {
    std::size_t pulls = 0;
    double cost_sum = 0.0;
    std::size_t replays = 0;
    double replay_sum = 0.0;

    std::optional<double> mean() const;
    std::optional<double> replay_mean() const;
};

/// Exploration constant c: either fixed, or `auto_scale` times the running
/// mean of all deployed costs.
struct ExplorationConstant {
    std::optional<double> fixed;
    double auto_scale = 0.2;
};

class SelectionState {
public:
    explicit SelectionState(std::vector<std::string> arm_ids, ExplorationConstant c = {});
    /// Restores a state from per-arm statistics; checks sum(pulls) == trials.
    SelectionState(std::vector<std::string> arm_ids, std::vector<ArmStats> stats, std::size_t trials,
                   ExplorationConstant c);

    std::size_t arm_count() const noexcept { return arm_ids_.size(); }
    const std::string& arm_id(std::size_t arm) const { return arm_ids_.at(arm); }
    const ArmStats& stats(std::size_t arm) const { return stats_.at(arm); }
    /// Trial counter k.
    std::size_t trials() const noexcept { return trials_; }
    /// Resolved c > 0.
    double exploration_constant() const;

    void record(std::size_t deployed_arm, double deployed_cost, std::span<const double> replay_costs);

private:
    std::vector<std::string> arm_ids_;
    std::vector<ArmStats> stats_;
    std::size_t trials_ = 0;
    ExplorationConstant c_;
};

SelectionState update_after_trial(SelectionState state, std::size_t deployed_arm, double deployed_cost,
                                  std::span<const double> replay_costs);

/// C_bar - c * sqrt(ln k / n); -inf for an arm never deployed.
double ucb_term(const SelectionState& state, std::size_t arm);
/// max(replay mean, ucb_term); either side missing counts as -inf.
double replay_score(const SelectionState& state, std::size_t arm);
double replay_score(std::optional<double> replay_mean, double ucb);

/// Untried arms first in registration order, then argmin ucb_term.
std::size_t ucb_pick(const SelectionState& state);
/// Untried arms without replay data first, then argmin replay_score.
std::size_t replay_pick(const SelectionState& state);

/// What a trial revealed, enough to replay any other arm on it.
struct HindsightLog {
    std::string map_id;
    Cell start_pose;
    std::string target;
    std::string goal_container; ///< empty when the target was never found
    std::vector<SearchStep> searched;
    std::string deployed_arm;
    double deployed_cost = 0.0;
    std::string deployment_id;
    std::size_t trial = 0;
};

HindsightLog make_hindsight_log(const MapInstance& instance, const std::string& target, const SearchTrace& trace,
                                const std::string& arm_id);
std::string hindsight_to_json(const HindsightLog& log);
HindsightLog hindsight_from_json(const std::string& line);

/// Counterfactual world for a log: the target sits only in the goal
/// container; containers the trial never opened are empty.
MapInstance counterfactual_world(const HindsightLog& log, const MapInstance& instance);

/// Cost `policy` would have paid on the logged trial: replan and search in
/// the counterfactual world until the goal container has been searched.
/// `world` is reused when its start matches the log.
double offline_replay(const HindsightLog& log, SearchPolicy& policy, const MapInstance& instance,
                      std::shared_ptr<const KnownWorld> world = nullptr);

} // namespace objsearch
