#pragma once

#include "objsearch/selection.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace objsearch {

enum class SelectionMode { Fixed, Ucb, Replay };

std::string_view to_string(SelectionMode mode);
SelectionMode selection_mode_from_string(std::string_view text);

/// Where an arm's likelihoods come from. `prior` endpoints answer from the
/// prior table (optionally noisy) without any network traffic.
struct EndpointConfig {
    enum class Kind { Prior, Http };
    std::string name;
    Kind kind = Kind::Prior;
    std::optional<PriorNoise> noise;
    ModelEndpoint http;
};

/// Arms whose per-trial cost is mean + sigma * N(0, 1), for exercising the
/// selectors without maps.
struct SyntheticArms {
    std::vector<double> means;
    double sigma = 10.0;
    std::uint64_t seed = 0;
};

struct MapSuite {
    struct Generate {
        std::uint64_t seed = 0;
        std::size_t count = 0;
        GenerationConfig config;
    };
    std::optional<Generate> generate;
    std::vector<std::filesystem::path> files;
};

struct DeploymentConfig {
    std::string name = "deployment";
    MapSuite maps;
    std::size_t trials = 100;
    std::size_t deployments = 1;
    std::uint64_t permutation_seed = 0;
    std::uint64_t target_seed = 0;
    std::vector<StrategyArm> arms;
    std::vector<EndpointConfig> endpoints;
    std::map<std::string, std::filesystem::path> templates; ///< extra templates by name
    SelectionMode mode = SelectionMode::Fixed;
    std::optional<std::string> fixed_arm; ///< defaults to the first arm
    ExplorationConstant c;
    std::optional<std::string> oracle_arm; ///< absent: best mean arm
    std::optional<std::filesystem::path> prior_file;
    std::optional<std::filesystem::path> cache_file;
    std::size_t candidate_cap = 8;
    double search_cost = 0.0;
    std::optional<SyntheticArms> synthetic;
};

/// Relative paths in the document resolve against `base_dir`.
DeploymentConfig deployment_config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
/// ConfigError naming the file if it cannot be read.
DeploymentConfig load_deployment_config(const std::filesystem::path& path);
/// One seed for both streams: permutation = seed, targets = mix_seed(seed, 1).
void apply_seed(DeploymentConfig& config, std::uint64_t seed);
void validate_config(const DeploymentConfig& config);

/// Maps for a suite; generated maps use generate_map(mix_seed(seed, i)).
std::vector<MapInstance> load_map_suite(const MapSuite& suite, const PriorTable& prior);
std::vector<MapInstance> generate_map_suite(std::uint64_t seed, std::size_t count, const GenerationConfig& config,
                                            const PriorTable& prior);

struct TrialResult {
    std::string deployment_id;
    std::size_t k = 0; ///< 1-based
    std::string map_id;
    std::string target;
    std::string arm_id;
    double cost = 0.0; ///< meters
    std::size_t searches = 0;
    bool found = false;
    std::vector<double> replay_costs; ///< per arm, registration order
    std::vector<double> arm_costs;    ///< per arm, deployed on the same (map, target)
    double wall_seconds = 0.0;
};

struct TrialRun {
    TrialResult result;
    HindsightLog log;
};

/// Shared state for a run: response cache, token ledger and HTTP client.
struct RunContext {
    ResponseCache& cache;
    TokenLedger& ledger;
    ChatClient& client;
};

/// The policy objects behind every arm of a config.
class ArmBank {
public:
    ArmBank(const DeploymentConfig& config, const PriorTable& prior, RunContext context);
    ~ArmBank();
    ArmBank(const ArmBank&) = delete;
    ArmBank& operator=(const ArmBank&) = delete;

    std::size_t size() const noexcept { return arms_.size(); }
    const StrategyArm& arm(std::size_t i) const { return arms_.at(i); }
    std::size_t index_of(const std::string& arm_id) const;
    std::vector<std::string> arm_ids() const;
    SearchPolicy& policy(std::size_t i);

private:
    struct Slot;
    std::vector<StrategyArm> arms_;
    std::vector<std::unique_ptr<Slot>> slots_;
};

/// Searches `instance` for `target` with one arm until found or out of
/// reachable containers.
TrialRun run_trial(const MapInstance& instance, const std::shared_ptr<const KnownWorld>& world,
                   const std::string& target, std::size_t arm, ArmBank& bank, double search_cost = 0.0);

/// Per-trial callbacks for the selection loop.
class TrialEvaluator {
public:
    virtual ~TrialEvaluator() = default;
    virtual std::size_t arm_count() const = 0;
    /// Deploys `arm` on trial k (1-based). Fills everything but the per-arm vectors.
    virtual TrialRun deploy(std::size_t k, std::size_t arm) = 0;
    /// Offline-replay cost of every arm on the deployed trial.
    virtual std::vector<double> replay(const TrialRun& run) = 0;
    /// Cost of every arm actually deployed on the same trial.
    virtual std::vector<double> evaluate_all(const TrialRun& run) = 0;
};

struct SelectionRecord {
    std::size_t k = 0;
    std::size_t chosen = 0;
    double deployed_cost = 0.0;
    std::vector<double> replay_costs;
    std::vector<std::optional<double>> means;
    std::vector<std::optional<double>> replay_means;
    std::vector<std::size_t> pulls;
    double c = 0.0;
};

struct DeploymentRun {
    std::string deployment_id;
    std::vector<std::string> arm_ids;
    std::vector<TrialRun> trials;
    std::vector<SelectionRecord> trace;
};

/// Picks an arm per `mode`, deploys it, replays and evaluates every arm, and
/// updates the selection state, for `trials` trials.
DeploymentRun run_selection(const std::string& deployment_id, SelectionMode mode, std::vector<std::string> arm_ids,
                            std::size_t fixed_arm, ExplorationConstant c, std::size_t trials,
                            TrialEvaluator& evaluator);

/// Evaluator over a map suite: map order is a seeded permutation of the
/// suite, targets are seeded draws from each map's catalog.
class MapTrialEvaluator final : public TrialEvaluator {
public:
    MapTrialEvaluator(const std::vector<MapInstance>& maps, const std::vector<std::shared_ptr<const KnownWorld>>& worlds,
                      ArmBank& bank, std::vector<std::size_t> map_order, std::uint64_t target_seed,
                      double search_cost, std::string deployment_id);
    std::size_t arm_count() const override { return bank_.size(); }
    TrialRun deploy(std::size_t k, std::size_t arm) override;
    std::vector<double> replay(const TrialRun& run) override;
    std::vector<double> evaluate_all(const TrialRun& run) override;

private:
    std::size_t map_index(std::size_t k) const;

    const std::vector<MapInstance>& maps_;
    const std::vector<std::shared_ptr<const KnownWorld>>& worlds_;
    ArmBank& bank_;
    std::vector<std::size_t> order_;
    std::uint64_t target_seed_;
    double search_cost_;
    std::string deployment_id_;
};

class SyntheticTrialEvaluator final : public TrialEvaluator {
public:
    SyntheticTrialEvaluator(SyntheticArms arms, std::uint64_t deployment_seed, std::string deployment_id);
    std::size_t arm_count() const override { return arms_.means.size(); }
    TrialRun deploy(std::size_t k, std::size_t arm) override;
    std::vector<double> replay(const TrialRun& run) override;
    std::vector<double> evaluate_all(const TrialRun& run) override;
    double cost(std::size_t k, std::size_t arm) const;

private:
    SyntheticArms arms_;
    std::uint64_t seed_;
    std::string deployment_id_;
};

/// Fisher-Yates permutation of 0..n-1 from `seed`.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct Metrics {
    std::vector<double> avg_cost_at;
    std::vector<double> regret_increment;
    std::vector<double> cumulative_regret_at;
};

/// Running mean of `selected` and running sum of (selected - oracle).
Metrics compute_metrics(std::span<const double> selected, std::span<const double> oracle);

/// Arm with the lowest mean of arm_costs over all trials of all runs; ties
/// by registration order. PreconditionError if any trial lacks arm costs.
std::size_t best_mean_arm(std::span<const DeploymentRun> runs);

struct ExperimentResult {
    std::vector<DeploymentRun> runs;
    std::size_t oracle_arm = 0;
    std::vector<Metrics> metrics; ///< one per run
};

/// Runs all deployments of `config`. Map configs need `context`.
ExperimentResult run_experiment(const DeploymentConfig& config, const PriorTable& prior, RunContext context);
ExperimentResult run_experiment(const DeploymentConfig& config);

/// Fills the oracle arm and per-run metrics.
void finalize_metrics(ExperimentResult& result, const std::optional<std::string>& oracle_arm);

/// results.csv, arm_costs.csv, trials.jsonl, hindsight.jsonl and
/// selection_trace.jsonl under `out_dir`.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir);

std::string format_double(double value);
std::string results_csv(const ExperimentResult& result);
std::string arm_costs_csv(const ExperimentResult& result);
std::string trials_jsonl(const ExperimentResult& result);
std::string hindsight_jsonl(const ExperimentResult& result);
std::string selection_trace_jsonl(const ExperimentResult& result);

/// Logs read back from hindsight.jsonl.
std::vector<HindsightLog> read_hindsight_file(const std::filesystem::path& path);

/// Rows of a results table.
struct ResultRow {
    std::string deployment_id;
    std::size_t k = 0;
    std::string map_id;
    std::string target;
    std::string arm_id;
    double cost = 0.0;
    double regret_increment = 0.0;
    double avg_cost_so_far = 0.0;
    double cumulative_regret = 0.0;
};

std::vector<ResultRow> parse_results_csv(const std::string& text);

/// Per-k means across deployments, plus per-arm pull counts and mean cost:
/// `curves.csv` and `arm_summary.csv`.
struct Report {
    std::string curves_csv;
    std::string arm_summary_csv;
};
Report build_report(std::span<const ResultRow> rows);

} // namespace objsearch
