#include "objsearch/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace objsearch {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(SelectionMode mode)
{
    switch (mode) {
    case SelectionMode::Fixed:
        return "fixed";
    case SelectionMode::Ucb:
        return "ucb";
    case SelectionMode::Replay:
        return "replay";
    }
    return "unknown";
}

SelectionMode selection_mode_from_string(std::string_view text)
{
    if (text == "fixed") return SelectionMode::Fixed;
    if (text == "ucb") return SelectionMode::Ucb;
    if (text == "replay") return SelectionMode::Replay;
    throw ConfigError("unknown selection mode '" + std::string(text) + "' (expected fixed, ucb or replay)");
}

// Config ---------------------------------------------------------------------------

namespace {

void reject_unknown_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> known)
{
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw SchemaError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
        }
    }
}

const json& require(const json& obj, const std::string& key, const std::string& path)
{
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(path, "missing required field '" + key + "'");
    }
    return *it;
}

std::string as_string(const json& v, const std::string& path)
{
    if (!v.is_string()) {
        throw SchemaError(path, "expected a string");
    }
    return v.get<std::string>();
}

double as_double(const json& v, const std::string& path)
{
    if (!v.is_number()) {
        throw SchemaError(path, "expected a number");
    }
    return v.get<double>();
}

std::uint64_t as_u64(const json& v, const std::string& path)
{
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw SchemaError(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::size_t as_count(const json& v, const std::string& path)
{
    return static_cast<std::size_t>(as_u64(v, path));
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

MapSuite parse_map_suite(const json& doc, const fs::path& base)
{
    if (!doc.is_object()) {
        throw SchemaError("maps", "expected an object");
    }
    reject_unknown_keys(doc, "maps", {"generate", "files", "directory"});
    MapSuite suite;
    if (auto it = doc.find("generate"); it != doc.end()) {
        reject_unknown_keys(*it, "maps.generate", {"seed", "count", "config"});
        MapSuite::Generate gen;
        gen.seed = as_u64(require(*it, "seed", "maps.generate"), "maps.generate.seed");
        gen.count = as_count(require(*it, "count", "maps.generate"), "maps.generate.count");
        if (auto c = it->find("config"); c != it->end()) {
            gen.config = generation_config_from_json(c->dump());
        }
        suite.generate = gen;
    }
    if (auto it = doc.find("files"); it != doc.end()) {
        if (!it->is_array()) {
            throw SchemaError("maps.files", "expected an array of paths");
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
            suite.files.push_back(resolve(base, as_string((*it)[i], "maps.files[" + std::to_string(i) + "]")));
        }
    }
    if (auto it = doc.find("directory"); it != doc.end()) {
        const fs::path dir = resolve(base, as_string(*it, "maps.directory"));
        std::error_code ec;
        if (!fs::is_directory(dir, ec)) {
            throw ConfigError("map directory '" + dir.string() + "' does not exist");
        }
        std::vector<fs::path> found;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                found.push_back(entry.path());
            }
        }
        std::sort(found.begin(), found.end());
        suite.files.insert(suite.files.end(), found.begin(), found.end());
    }
    return suite;
}

EndpointConfig parse_endpoint(const json& doc, const std::string& path)
{
    if (!doc.is_object()) {
        throw SchemaError(path, "expected an object");
    }
    EndpointConfig ep;
    ep.name = as_string(require(doc, "name", path), path + ".name");
    const std::string kind = doc.contains("kind") ? as_string(doc["kind"], path + ".kind") : "prior";
    if (kind == "prior") {
        reject_unknown_keys(doc, path, {"name", "kind", "sigma", "seed"});
        ep.kind = EndpointConfig::Kind::Prior;
        PriorNoise noise;
        if (doc.contains("sigma")) {
            noise.sigma = as_double(doc["sigma"], path + ".sigma");
        }
        if (doc.contains("seed")) {
            noise.seed = as_u64(doc["seed"], path + ".seed");
        }
        if (noise.sigma < 0.0) {
            throw SchemaError(path + ".sigma", "must be non-negative");
        }
        if (noise.sigma > 0.0) {
            ep.noise = noise;
        }
    } else if (kind == "http") {
        reject_unknown_keys(doc, path,
                            {"name", "kind", "base_url", "model", "temperature", "max_tokens", "api_key_env",
                             "usd_per_million_input", "usd_per_million_output", "timeout_seconds", "max_retries",
                             "backoff_seconds"});
        ep.kind = EndpointConfig::Kind::Http;
        ModelEndpoint& m = ep.http;
        m.name = ep.name;
        m.base_url = as_string(require(doc, "base_url", path), path + ".base_url");
        m.model_id = as_string(require(doc, "model", path), path + ".model");
        if (doc.contains("temperature")) m.temperature = as_double(doc["temperature"], path + ".temperature");
        if (doc.contains("max_tokens")) m.max_tokens = static_cast<int>(as_u64(doc["max_tokens"], path + ".max_tokens"));
        if (doc.contains("api_key_env")) m.api_key_env = as_string(doc["api_key_env"], path + ".api_key_env");
        if (doc.contains("usd_per_million_input")) {
            m.usd_per_million_input = as_double(doc["usd_per_million_input"], path + ".usd_per_million_input");
        }
        if (doc.contains("usd_per_million_output")) {
            m.usd_per_million_output = as_double(doc["usd_per_million_output"], path + ".usd_per_million_output");
        }
        if (doc.contains("timeout_seconds")) {
            m.timeout_seconds = as_double(doc["timeout_seconds"], path + ".timeout_seconds");
        }
        if (doc.contains("max_retries")) {
            m.max_retries = static_cast<int>(as_u64(doc["max_retries"], path + ".max_retries"));
        }
        if (doc.contains("backoff_seconds")) {
            m.backoff_seconds = as_double(doc["backoff_seconds"], path + ".backoff_seconds");
        }
    } else {
        throw SchemaError(path + ".kind", "expected 'prior' or 'http'");
    }
    return ep;
}

StrategyArm parse_arm(const json& doc, const std::string& path)
{
    if (!doc.is_object()) {
        throw SchemaError(path, "expected an object");
    }
    reject_unknown_keys(doc, path, {"id", "policy", "template", "endpoint"});
    StrategyArm arm;
    arm.arm_id = as_string(require(doc, "id", path), path + ".id");
    arm.policy_kind = policy_kind_from_string(as_string(require(doc, "policy", path), path + ".policy"));
    if (doc.contains("template") && !doc["template"].is_null()) {
        arm.template_name = as_string(doc["template"], path + ".template");
    }
    if (doc.contains("endpoint") && !doc["endpoint"].is_null()) {
        arm.endpoint = as_string(doc["endpoint"], path + ".endpoint");
    }
    if (arm.policy_kind == PolicyKind::LlmDirect && !arm.template_name) {
        arm.template_name = std::string(kDirect);
    }
    return arm;
}

} // namespace

DeploymentConfig deployment_config_from_json(const std::string& text, const fs::path& base_dir)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("$", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw SchemaError("$", "config must be an object");
    }
    reject_unknown_keys(doc, "",
                        {"name", "maps", "trials", "deployments", "seed", "permutation_seed", "target_seed", "arms",
                         "endpoints", "templates", "selection", "oracle_arm", "prior", "cache_file", "candidate_cap",
                         "search_cost", "synthetic"});
    DeploymentConfig config;
    if (doc.contains("name")) config.name = as_string(doc["name"], "name");
    if (doc.contains("trials")) config.trials = as_count(doc["trials"], "trials");
    if (doc.contains("deployments")) config.deployments = as_count(doc["deployments"], "deployments");
    if (doc.contains("seed")) apply_seed(config, as_u64(doc["seed"], "seed"));
    if (doc.contains("permutation_seed")) config.permutation_seed = as_u64(doc["permutation_seed"], "permutation_seed");
    if (doc.contains("target_seed")) config.target_seed = as_u64(doc["target_seed"], "target_seed");
    if (doc.contains("maps")) config.maps = parse_map_suite(doc["maps"], base_dir);
    if (doc.contains("endpoints")) {
        const json& eps = doc["endpoints"];
        if (!eps.is_array()) throw SchemaError("endpoints", "expected an array");
        for (std::size_t i = 0; i < eps.size(); ++i) {
            config.endpoints.push_back(parse_endpoint(eps[i], "endpoints[" + std::to_string(i) + "]"));
        }
    }
    if (doc.contains("templates")) {
        const json& t = doc["templates"];
        if (!t.is_object()) throw SchemaError("templates", "expected an object of name: path");
        for (auto it = t.begin(); it != t.end(); ++it) {
            config.templates[it.key()] = resolve(base_dir, as_string(it.value(), "templates." + it.key()));
        }
    }
    if (doc.contains("arms")) {
        const json& arms = doc["arms"];
        if (!arms.is_array()) throw SchemaError("arms", "expected an array");
        for (std::size_t i = 0; i < arms.size(); ++i) {
            config.arms.push_back(parse_arm(arms[i], "arms[" + std::to_string(i) + "]"));
        }
    }
    if (doc.contains("selection")) {
        const json& sel = doc["selection"];
        if (sel.is_string()) {
            config.mode = selection_mode_from_string(sel.get<std::string>());
        } else if (sel.is_object()) {
            reject_unknown_keys(sel, "selection", {"mode", "fixed_arm", "c", "c_scale"});
            config.mode = selection_mode_from_string(as_string(require(sel, "mode", "selection"), "selection.mode"));
            if (sel.contains("fixed_arm")) config.fixed_arm = as_string(sel["fixed_arm"], "selection.fixed_arm");
            if (sel.contains("c") && !(sel["c"].is_string() && sel["c"].get<std::string>() == "auto")) {
                config.c.fixed = as_double(sel["c"], "selection.c");
            }
            if (sel.contains("c_scale")) config.c.auto_scale = as_double(sel["c_scale"], "selection.c_scale");
        } else {
            throw SchemaError("selection", "expected a mode string or an object");
        }
    }
    if (doc.contains("oracle_arm")) {
        const std::string o = as_string(doc["oracle_arm"], "oracle_arm");
        if (o != "auto") config.oracle_arm = o;
    }
    if (doc.contains("prior")) config.prior_file = resolve(base_dir, as_string(doc["prior"], "prior"));
    if (doc.contains("cache_file")) config.cache_file = fs::path(as_string(doc["cache_file"], "cache_file"));
    if (doc.contains("candidate_cap")) config.candidate_cap = as_count(doc["candidate_cap"], "candidate_cap");
    if (doc.contains("search_cost")) config.search_cost = as_double(doc["search_cost"], "search_cost");
    if (doc.contains("synthetic")) {
        const json& s = doc["synthetic"];
        if (!s.is_object()) throw SchemaError("synthetic", "expected an object");
        reject_unknown_keys(s, "synthetic", {"means", "sigma", "seed"});
        SyntheticArms syn;
        const json& means = require(s, "means", "synthetic");
        if (!means.is_array()) throw SchemaError("synthetic.means", "expected an array of numbers");
        for (std::size_t i = 0; i < means.size(); ++i) {
            syn.means.push_back(as_double(means[i], "synthetic.means[" + std::to_string(i) + "]"));
        }
        if (s.contains("sigma")) syn.sigma = as_double(s["sigma"], "synthetic.sigma");
        syn.seed = s.contains("seed") ? as_u64(s["seed"], "synthetic.seed") : config.permutation_seed;
        config.synthetic = std::move(syn);
    }
    validate_config(config);
    return config;
}

DeploymentConfig load_deployment_config(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return deployment_config_from_json(text.str(), path.parent_path());
    } catch (const SchemaError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_seed(DeploymentConfig& config, std::uint64_t seed)
{
    config.permutation_seed = seed;
    config.target_seed = mix_seed(seed, 1);
    if (config.synthetic) {
        config.synthetic->seed = seed;
    }
}

void validate_config(const DeploymentConfig& config)
{
    if (config.trials == 0) throw ConfigError("trials must be at least 1");
    if (config.deployments == 0) throw ConfigError("deployments must be at least 1");
    if (config.candidate_cap == 0) throw ConfigError("candidate_cap must be at least 1");
    if (config.candidate_cap > 16) throw ConfigError("candidate_cap must be at most 16");
    if (config.search_cost < 0.0) throw ConfigError("search_cost must be non-negative");

    std::vector<std::string> ids;
    if (config.synthetic) {
        if (!config.arms.empty()) throw ConfigError("a synthetic config takes no arms");
        if (config.synthetic->means.empty()) throw ConfigError("synthetic.means must not be empty");
        if (config.synthetic->sigma < 0.0) throw ConfigError("synthetic.sigma must be non-negative");
        for (std::size_t i = 0; i < config.synthetic->means.size(); ++i) {
            ids.push_back("arm" + std::to_string(i + 1));
        }
    } else {
        if (config.arms.empty()) throw ConfigError("config needs at least one arm");
        std::set<std::string> endpoints;
        for (const EndpointConfig& ep : config.endpoints) {
            if (!endpoints.insert(ep.name).second) throw ConfigError("duplicate endpoint '" + ep.name + "'");
        }
        std::set<std::string> seen;
        for (const StrategyArm& arm : config.arms) {
            if (!seen.insert(arm.arm_id).second) throw ConfigError("duplicate arm id '" + arm.arm_id + "'");
            std::optional<AnswerMode> mode;
            if (arm.template_name) {
                if (auto it = config.templates.find(*arm.template_name); it != config.templates.end()) {
                    mode = load_template(it->second).answer_mode;
                }
            }
            validate_arm(arm, mode);
            if (arm.endpoint && !endpoints.contains(*arm.endpoint)) {
                throw ConfigError("arm '" + arm.arm_id + "' names unknown endpoint '" + *arm.endpoint + "'");
            }
            ids.push_back(arm.arm_id);
        }
        const std::size_t map_count =
            (config.maps.generate ? config.maps.generate->count : 0) + config.maps.files.size();
        if (map_count == 0) throw ConfigError("config needs a map suite");
        if (config.trials > map_count) {
            throw ConfigError("trials (" + std::to_string(config.trials) + ") exceed the " +
                              std::to_string(map_count) + " available maps");
        }
    }
    auto known = [&](const std::string& id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); };
    if (config.fixed_arm && !known(*config.fixed_arm)) {
        throw ConfigError("fixed_arm '" + *config.fixed_arm + "' is not a configured arm");
    }
    if (config.oracle_arm && !known(*config.oracle_arm)) {
        throw ConfigError("oracle_arm '" + *config.oracle_arm + "' is not a configured arm");
    }
    if (config.c.fixed && !(*config.c.fixed > 0.0)) throw ConfigError("selection.c must be positive");
    if (!(config.c.auto_scale > 0.0)) throw ConfigError("selection.c_scale must be positive");
}

std::vector<MapInstance> generate_map_suite(std::uint64_t seed, std::size_t count, const GenerationConfig& config,
                                            const PriorTable& prior)
{
    std::vector<MapInstance> maps;
    maps.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        maps.push_back(generate_map(mix_seed(seed, i), config, prior));
    }
    return maps;
}

std::vector<MapInstance> load_map_suite(const MapSuite& suite, const PriorTable& prior)
{
    std::vector<MapInstance> maps;
    if (suite.generate) {
        maps = generate_map_suite(suite.generate->seed, suite.generate->count, suite.generate->config, prior);
    }
    for (const fs::path& file : suite.files) {
        maps.push_back(load_map(file));
    }
    std::set<std::string> ids;
    for (const MapInstance& m : maps) {
        if (!ids.insert(m.map_id).second) {
            throw ConfigError("map id '" + m.map_id + "' appears twice in the suite");
        }
    }
    return maps;
}

// Arms -------------------------------------------------------------------------------

struct ArmBank::Slot {
    std::unique_ptr<ProbabilityProvider> provider;
    std::unique_ptr<ContainerChooser> chooser;
    std::unique_ptr<SearchPolicy> policy;
};

ArmBank::ArmBank(const DeploymentConfig& config, const PriorTable& prior, RunContext context)
    : arms_(config.arms)
{
    auto find_endpoint = [&](const std::string& name) -> const EndpointConfig& {
        for (const EndpointConfig& ep : config.endpoints) {
            if (ep.name == name) return ep;
        }
        throw ConfigError("unknown endpoint '" + name + "'");
    };
    auto find_template = [&](const std::string& name) {
        if (auto it = config.templates.find(name); it != config.templates.end()) {
            return load_template(it->second);
        }
        return builtin_template(name);
    };
    for (const StrategyArm& arm : arms_) {
        auto slot = std::make_unique<Slot>();
        switch (arm.policy_kind) {
        case PolicyKind::OptimisticGreedy:
            slot->policy = std::make_unique<OptimisticGreedyPolicy>();
            break;
        case PolicyKind::LlmModel: {
            const EndpointConfig& ep = find_endpoint(*arm.endpoint);
            if (ep.kind == EndpointConfig::Kind::Prior) {
                slot->provider = std::make_unique<PriorProvider>(prior, ep.noise);
            } else {
                slot->provider = std::make_unique<LlmProbabilityProvider>(
                    ep.http, find_template(*arm.template_name), context.cache, context.ledger, context.client);
            }
            slot->policy = std::make_unique<ModelBasedPolicy>(*slot->provider, config.candidate_cap,
                                                              config.search_cost);
            break;
        }
        case PolicyKind::LlmDirect: {
            const EndpointConfig& ep = find_endpoint(*arm.endpoint);
            const std::string tmpl_name = arm.template_name.value_or(std::string(kDirect));
            if (ep.kind == EndpointConfig::Kind::Prior) {
                slot->chooser = std::make_unique<PriorChooser>(prior, ep.noise);
            } else {
                slot->chooser = std::make_unique<LlmChooser>(ep.http, tmpl_name, context.cache, context.ledger,
                                                             context.client);
            }
            slot->policy = std::make_unique<DirectPolicy>(*slot->chooser, find_template(tmpl_name));
            break;
        }
        }
        slots_.push_back(std::move(slot));
    }
}

ArmBank::~ArmBank() = default;

std::size_t ArmBank::index_of(const std::string& arm_id) const
{
    for (std::size_t i = 0; i < arms_.size(); ++i) {
        if (arms_[i].arm_id == arm_id) return i;
    }
    throw ConfigError("unknown arm '" + arm_id + "'");
}

std::vector<std::string> ArmBank::arm_ids() const
{
    std::vector<std::string> ids;
    for (const StrategyArm& a : arms_) ids.push_back(a.arm_id);
    return ids;
}

SearchPolicy& ArmBank::policy(std::size_t i)
{
    return *slots_.at(i)->policy;
}

// Trials -----------------------------------------------------------------------------

TrialRun run_trial(const MapInstance& instance, const std::shared_ptr<const KnownWorld>& world,
                   const std::string& target, std::size_t arm, ArmBank& bank, double search_cost)
{
    if (!instance.object_catalog.contains(target)) {
        throw PreconditionError("target '" + target + "' is not in the catalog of map '" + instance.map_id + "'");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const SearchTrace trace = run_search(world, instance, target, bank.policy(arm), search_cost);
    const auto t1 = std::chrono::steady_clock::now();

    TrialRun run;
    run.result.map_id = instance.map_id;
    run.result.target = target;
    run.result.arm_id = bank.arm(arm).arm_id;
    run.result.cost = trace.cost;
    run.result.searches = trace.steps.size();
    run.result.found = trace.found;
    run.result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    run.log = make_hindsight_log(instance, target, trace, run.result.arm_id);
    return run;
}

DeploymentRun run_selection(const std::string& deployment_id, SelectionMode mode, std::vector<std::string> arm_ids,
                            std::size_t fixed_arm, ExplorationConstant c, std::size_t trials,
                            TrialEvaluator& evaluator)
{
    if (arm_ids.size() != evaluator.arm_count()) {
        throw PreconditionError("arm ids and evaluator disagree on the arm count");
    }
    if (fixed_arm >= arm_ids.size()) {
        throw PreconditionError("fixed arm index out of range");
    }
    DeploymentRun run;
    run.deployment_id = deployment_id;
    run.arm_ids = arm_ids;
    SelectionState state(std::move(arm_ids), c);
    for (std::size_t k = 1; k <= trials; ++k) {
        std::size_t chosen = fixed_arm;
        if (mode == SelectionMode::Ucb) {
            chosen = ucb_pick(state);
        } else if (mode == SelectionMode::Replay) {
            chosen = replay_pick(state);
        }
        TrialRun trial = evaluator.deploy(k, chosen);
        trial.result.k = k;
        trial.result.deployment_id = deployment_id;
        trial.log.trial = k;
        trial.log.deployment_id = deployment_id;
        trial.result.replay_costs = evaluator.replay(trial);
        trial.result.arm_costs = evaluator.evaluate_all(trial);

        state.record(chosen, trial.result.cost, trial.result.replay_costs);

        SelectionRecord rec;
        rec.k = k;
        rec.chosen = chosen;
        rec.deployed_cost = trial.result.cost;
        rec.replay_costs = trial.result.replay_costs;
        for (std::size_t a = 0; a < state.arm_count(); ++a) {
            rec.means.push_back(state.stats(a).mean());
            rec.replay_means.push_back(state.stats(a).replay_mean());
            rec.pulls.push_back(state.stats(a).pulls);
        }
        rec.c = state.exploration_constant();
        run.trace.push_back(std::move(rec));
        run.trials.push_back(std::move(trial));
    }
    return run;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

MapTrialEvaluator::MapTrialEvaluator(const std::vector<MapInstance>& maps,
                                     const std::vector<std::shared_ptr<const KnownWorld>>& worlds, ArmBank& bank,
                                     std::vector<std::size_t> map_order, std::uint64_t target_seed,
                                     double search_cost, std::string deployment_id)
    : maps_(maps), worlds_(worlds), bank_(bank), order_(std::move(map_order)), target_seed_(target_seed),
      search_cost_(search_cost), deployment_id_(std::move(deployment_id))
{
    if (maps_.size() != worlds_.size()) {
        throw PreconditionError("one known world per map is required");
    }
}

std::size_t MapTrialEvaluator::map_index(std::size_t k) const
{
    if (k == 0 || k > order_.size()) {
        throw PreconditionError("trial " + std::to_string(k) + " has no map in the permutation");
    }
    return order_[k - 1];
}

TrialRun MapTrialEvaluator::deploy(std::size_t k, std::size_t arm)
{
    const std::size_t m = map_index(k);
    const std::string target = sample_task(maps_[m], mix_seed(target_seed_, k));
    try {
        return run_trial(maps_[m], worlds_[m], target, arm, bank_, search_cost_);
    } catch (const Error& e) {
        throw Error(deployment_id_ + " trial " + std::to_string(k) + " (map " + maps_[m].map_id + ", arm " +
                    bank_.arm(arm).arm_id + "): " + e.what());
    }
}

std::vector<double> MapTrialEvaluator::evaluate_all(const TrialRun& run)
{
    const std::size_t m = map_index(run.result.k);
    std::vector<double> costs;
    for (std::size_t a = 0; a < bank_.size(); ++a) {
        if (bank_.arm(a).arm_id == run.result.arm_id) {
            costs.push_back(run.result.cost);
            continue;
        }
        try {
            costs.push_back(run_trial(maps_[m], worlds_[m], run.result.target, a, bank_, search_cost_).result.cost);
        } catch (const Error& e) {
            throw Error(deployment_id_ + " trial " + std::to_string(run.result.k) + " evaluating arm " +
                        bank_.arm(a).arm_id + ": " + e.what());
        }
    }
    return costs;
}

std::vector<double> MapTrialEvaluator::replay(const TrialRun& run)
{
    const std::size_t m = map_index(run.result.k);
    if (!run.result.found) {
        // No goal container to replay towards; each arm's own exhaustive run stands in.
        return evaluate_all(run);
    }
    std::vector<double> costs;
    for (std::size_t a = 0; a < bank_.size(); ++a) {
        try {
            costs.push_back(offline_replay(run.log, bank_.policy(a), maps_[m], worlds_[m]));
        } catch (const Error& e) {
            throw Error(deployment_id_ + " trial " + std::to_string(run.result.k) + " replaying arm " +
                        bank_.arm(a).arm_id + ": " + e.what());
        }
    }
    return costs;
}

SyntheticTrialEvaluator::SyntheticTrialEvaluator(SyntheticArms arms, std::uint64_t deployment_seed,
                                                 std::string deployment_id)
    : arms_(std::move(arms)), seed_(deployment_seed), deployment_id_(std::move(deployment_id))
{
}

double SyntheticTrialEvaluator::cost(std::size_t k, std::size_t arm) const
{
    Rng rng(mix_seed(mix_seed(seed_, k), arm));
    return std::max(0.0, rng.normal(arms_.means.at(arm), arms_.sigma));
}

TrialRun SyntheticTrialEvaluator::deploy(std::size_t k, std::size_t arm)
{
    TrialRun run;
    run.result.k = k;
    run.result.map_id = "synthetic-" + std::to_string(k);
    run.result.target = "none";
    run.result.arm_id = "arm" + std::to_string(arm + 1);
    run.result.cost = cost(k, arm);
    run.result.searches = 1;
    run.result.found = true;
    run.log.map_id = run.result.map_id;
    run.log.target = run.result.target;
    run.log.deployed_arm = run.result.arm_id;
    run.log.deployed_cost = run.result.cost;
    return run;
}

std::vector<double> SyntheticTrialEvaluator::replay(const TrialRun& run)
{
    return evaluate_all(run);
}

std::vector<double> SyntheticTrialEvaluator::evaluate_all(const TrialRun& run)
{
    std::vector<double> costs;
    for (std::size_t a = 0; a < arms_.means.size(); ++a) {
        costs.push_back(cost(run.result.k, a));
    }
    return costs;
}

// Metrics ----------------------------------------------------------------------------

Metrics compute_metrics(std::span<const double> selected, std::span<const double> oracle)
{
    if (selected.size() != oracle.size()) {
        throw PreconditionError("oracle costs are missing for some trials");
    }
    Metrics m;
    double sum = 0.0;
    double regret = 0.0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        sum += selected[i];
        const double inc = selected[i] - oracle[i];
        regret += inc;
        m.avg_cost_at.push_back(sum / static_cast<double>(i + 1));
        m.regret_increment.push_back(inc);
        m.cumulative_regret_at.push_back(regret);
    }
    return m;
}

std::size_t best_mean_arm(std::span<const DeploymentRun> runs)
{
    if (runs.empty()) {
        throw PreconditionError("no runs to pick an oracle arm from");
    }
    const std::size_t arms = runs.front().arm_ids.size();
    std::vector<double> sums(arms, 0.0);
    std::size_t count = 0;
    for (const DeploymentRun& run : runs) {
        for (const TrialRun& t : run.trials) {
            if (t.result.arm_costs.size() != arms) {
                throw PreconditionError("trial " + std::to_string(t.result.k) + " of " + run.deployment_id +
                                        " lacks per-arm costs for the oracle");
            }
            for (std::size_t a = 0; a < arms; ++a) sums[a] += t.result.arm_costs[a];
            ++count;
        }
    }
    if (count == 0) {
        throw PreconditionError("no trials to pick an oracle arm from");
    }
    std::size_t best = 0;
    for (std::size_t a = 1; a < arms; ++a) {
        if (sums[a] < sums[best]) best = a;
    }
    return best;
}

void finalize_metrics(ExperimentResult& result, const std::optional<std::string>& oracle_arm)
{
    if (oracle_arm) {
        const auto& ids = result.runs.front().arm_ids;
        const auto it = std::find(ids.begin(), ids.end(), *oracle_arm);
        if (it == ids.end()) throw ConfigError("oracle arm '" + *oracle_arm + "' is not a configured arm");
        result.oracle_arm = static_cast<std::size_t>(it - ids.begin());
    } else {
        result.oracle_arm = best_mean_arm(result.runs);
    }
    result.metrics.clear();
    for (const DeploymentRun& run : result.runs) {
        std::vector<double> selected;
        std::vector<double> oracle;
        for (const TrialRun& t : run.trials) {
            if (t.result.arm_costs.size() <= result.oracle_arm) {
                throw PreconditionError("trial " + std::to_string(t.result.k) + " lacks the oracle arm's cost");
            }
            selected.push_back(t.result.cost);
            oracle.push_back(t.result.arm_costs[result.oracle_arm]);
        }
        result.metrics.push_back(compute_metrics(selected, oracle));
    }
}

namespace {

std::string deployment_id_for(const DeploymentConfig& config, std::size_t d)
{
    std::ostringstream id;
    id << config.name << "-d";
    id.width(3);
    id.fill('0');
    id << d;
    return id.str();
}

std::size_t fixed_index(const DeploymentConfig& config, const std::vector<std::string>& ids)
{
    if (!config.fixed_arm) return 0;
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), *config.fixed_arm) - ids.begin());
}

} // namespace

ExperimentResult run_experiment(const DeploymentConfig& config, const PriorTable& prior, RunContext context)
{
    validate_config(config);
    ExperimentResult result;
    if (config.synthetic) {
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < config.synthetic->means.size(); ++i) ids.push_back("arm" + std::to_string(i + 1));
        for (std::size_t d = 0; d < config.deployments; ++d) {
            SyntheticTrialEvaluator eval(*config.synthetic, mix_seed(config.synthetic->seed, d),
                                         deployment_id_for(config, d));
            result.runs.push_back(run_selection(deployment_id_for(config, d), config.mode, ids,
                                                fixed_index(config, ids), config.c, config.trials, eval));
        }
        finalize_metrics(result, config.oracle_arm);
        return result;
    }

    const std::vector<MapInstance> maps = load_map_suite(config.maps, prior);
    std::vector<std::shared_ptr<const KnownWorld>> worlds;
    worlds.reserve(maps.size());
    for (const MapInstance& m : maps) {
        check_invariants(m);
        worlds.push_back(KnownWorld::from_map(m));
    }
    ArmBank bank(config, prior, context);
    const std::vector<std::string> ids = bank.arm_ids();
    for (std::size_t d = 0; d < config.deployments; ++d) {
        const std::string id = deployment_id_for(config, d);
        std::vector<std::size_t> order = seeded_permutation(maps.size(), mix_seed(config.permutation_seed, d));
        order.resize(config.trials);
        MapTrialEvaluator eval(maps, worlds, bank, std::move(order), mix_seed(config.target_seed, d),
                               config.search_cost, id);
        result.runs.push_back(
            run_selection(id, config.mode, ids, fixed_index(config, ids), config.c, config.trials, eval));
    }
    finalize_metrics(result, config.oracle_arm);
    return result;
}

ExperimentResult run_experiment(const DeploymentConfig& config)
{
    const PriorTable prior = config.prior_file ? load_prior(*config.prior_file) : builtin_prior();
    ResponseCache cache;
    TokenLedger ledger;
    HttpChatClient client;
    return run_experiment(config, prior, {cache, ledger, client});
}

// Output -----------------------------------------------------------------------------

std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

json optional_number(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

double parse_double_field(const std::string& s, const std::string& what)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw SchemaError(what, "expected a number, got '" + s + "'");
    }
    return v;
}

} // namespace

std::string results_csv(const ExperimentResult& result)
{
    std::ostringstream out;
    out << "deployment_id,k,map_id,target,arm_id,cost,regret_increment,avg_cost_so_far,cumulative_regret\n";
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
        const DeploymentRun& run = result.runs[r];
        const Metrics& m = result.metrics.at(r);
        for (std::size_t i = 0; i < run.trials.size(); ++i) {
            const TrialResult& t = run.trials[i].result;
            out << csv_field(t.deployment_id) << ',' << t.k << ',' << csv_field(t.map_id) << ','
                << csv_field(t.target) << ',' << csv_field(t.arm_id) << ',' << format_double(t.cost) << ','
                << format_double(m.regret_increment[i]) << ',' << format_double(m.avg_cost_at[i]) << ','
                << format_double(m.cumulative_regret_at[i]) << '\n';
        }
    }
    return out.str();
}

std::string arm_costs_csv(const ExperimentResult& result)
{
    std::ostringstream out;
    out << "deployment_id,k,arm_id,cost,replay_cost\n";
    for (const DeploymentRun& run : result.runs) {
        for (const TrialRun& t : run.trials) {
            for (std::size_t a = 0; a < run.arm_ids.size(); ++a) {
                out << csv_field(t.result.deployment_id) << ',' << t.result.k << ',' << csv_field(run.arm_ids[a])
                    << ',' << format_double(t.result.arm_costs.at(a)) << ','
                    << format_double(t.result.replay_costs.at(a)) << '\n';
            }
        }
    }
    return out.str();
}

std::string trials_jsonl(const ExperimentResult& result)
{
    std::string out;
    for (const DeploymentRun& run : result.runs) {
        for (const TrialRun& t : run.trials) {
            const TrialResult& r = t.result;
            json replay = json::object();
            json costs = json::object();
            for (std::size_t a = 0; a < run.arm_ids.size(); ++a) {
                replay[run.arm_ids[a]] = r.replay_costs.at(a);
                costs[run.arm_ids[a]] = r.arm_costs.at(a);
            }
            const json doc = {{"deployment_id", r.deployment_id}, {"k", r.k},
                              {"map_id", r.map_id},               {"target", r.target},
                              {"arm_id", r.arm_id},               {"cost", r.cost},
                              {"searches", r.searches},           {"found", r.found},
                              {"flagged", !r.found},              {"replay_costs", std::move(replay)},
                              {"arm_costs", std::move(costs)},    {"wall_seconds", r.wall_seconds}};
            out += doc.dump();
            out += '\n';
        }
    }
    return out;
}

std::string hindsight_jsonl(const ExperimentResult& result)
{
    std::string out;
    for (const DeploymentRun& run : result.runs) {
        for (const TrialRun& t : run.trials) {
            out += hindsight_to_json(t.log);
            out += '\n';
        }
    }
    return out;
}

std::string selection_trace_jsonl(const ExperimentResult& result)
{
    std::string out;
    for (const DeploymentRun& run : result.runs) {
        for (const SelectionRecord& rec : run.trace) {
            json replay = json::object();
            json means = json::object();
            json replay_means = json::object();
            json pulls = json::object();
            for (std::size_t a = 0; a < run.arm_ids.size(); ++a) {
                const std::string& id = run.arm_ids[a];
                replay[id] = rec.replay_costs.at(a);
                means[id] = optional_number(rec.means.at(a));
                replay_means[id] = optional_number(rec.replay_means.at(a));
                pulls[id] = rec.pulls.at(a);
            }
            const json doc = {{"deployment_id", run.deployment_id},
                              {"k", rec.k},
                              {"chosen_arm", run.arm_ids.at(rec.chosen)},
                              {"deployed_cost", rec.deployed_cost},
                              {"replay_cost", std::move(replay)},
                              {"mean_cost", std::move(means)},
                              {"replay_mean_cost", std::move(replay_means)},
                              {"pulls", std::move(pulls)},
                              {"c", rec.c}};
            out += doc.dump();
            out += '\n';
        }
    }
    return out;
}

void write_outputs(const ExperimentResult& result, const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    write_file(out_dir / "results.csv", results_csv(result));
    write_file(out_dir / "arm_costs.csv", arm_costs_csv(result));
    write_file(out_dir / "trials.jsonl", trials_jsonl(result));
    write_file(out_dir / "hindsight.jsonl", hindsight_jsonl(result));
    write_file(out_dir / "selection_trace.jsonl", selection_trace_jsonl(result));
}

std::vector<HindsightLog> read_hindsight_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read hindsight log '" + path.string() + "'");
    std::vector<HindsightLog> logs;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            logs.push_back(hindsight_from_json(line));
        } catch (const SchemaError& e) {
            throw SchemaError(path.string() + ":" + std::to_string(n), e.what());
        }
    }
    return logs;
}

std::vector<ResultRow> parse_results_csv(const std::string& text)
{
    static const std::vector<std::string> kColumns = {"deployment_id", "k",       "map_id",
                                                      "target",        "arm_id",  "cost",
                                                      "regret_increment", "avg_cost_so_far", "cumulative_regret"};
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("results.csv", "empty file");
    const std::vector<std::string> header = split_csv_line(line);
    std::vector<std::size_t> col;
    for (const std::string& name : kColumns) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError(name, "missing column");
        col.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<ResultRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != header.size()) {
            throw SchemaError("line " + std::to_string(lineno), "expected " + std::to_string(header.size()) + " fields");
        }
        ResultRow r;
        r.deployment_id = f[col[0]];
        r.k = static_cast<std::size_t>(parse_double_field(f[col[1]], "k"));
        r.map_id = f[col[2]];
        r.target = f[col[3]];
        r.arm_id = f[col[4]];
        r.cost = parse_double_field(f[col[5]], "cost");
        r.regret_increment = parse_double_field(f[col[6]], "regret_increment");
        r.avg_cost_so_far = parse_double_field(f[col[7]], "avg_cost_so_far");
        r.cumulative_regret = parse_double_field(f[col[8]], "cumulative_regret");
        rows.push_back(std::move(r));
    }
    return rows;
}

Report build_report(std::span<const ResultRow> rows)
{
    struct Acc {
        double avg = 0.0;
        double regret = 0.0;
        std::size_t n = 0;
    };
    std::map<std::size_t, Acc> by_k;
    struct ArmAcc {
        double cost = 0.0;
        std::size_t pulls = 0;
    };
    std::map<std::string, ArmAcc> by_arm;
    for (const ResultRow& r : rows) {
        Acc& a = by_k[r.k];
        a.avg += r.avg_cost_so_far;
        a.regret += r.cumulative_regret;
        ++a.n;
        ArmAcc& b = by_arm[r.arm_id];
        b.cost += r.cost;
        ++b.pulls;
    }
    Report rep;
    std::ostringstream curves;
    curves << "k,deployments,mean_avg_cost,mean_cumulative_regret\n";
    for (const auto& [k, a] : by_k) {
        const double n = static_cast<double>(a.n);
        curves << k << ',' << a.n << ',' << format_double(a.avg / n) << ',' << format_double(a.regret / n) << '\n';
    }
    rep.curves_csv = curves.str();
    std::ostringstream arms;
    arms << "arm_id,pulls,mean_cost\n";
    for (const auto& [id, b] : by_arm) {
        arms << csv_field(id) << ',' << b.pulls << ',' << format_double(b.cost / static_cast<double>(b.pulls)) << '\n';
    }
    rep.arm_summary_csv = arms.str();
    return rep;
}

} // namespace objsearch
