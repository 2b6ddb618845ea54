#include "objsearch/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace objsearch;

namespace {

struct CommonFlags {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required, bool out_required)
{
    cmd->add_option("--seed", flags.seed, "Seed; overrides the config's seeds");
    auto* config = cmd->add_option("--config", flags.config, "Config JSON file");
    auto* out = cmd->add_option("--out", flags.out, "Output directory");
    if (config_required) config->required();
    if (out_required) out->required();
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

std::string map_file_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "map_%03zu.json", i);
    return buf;
}

PriorTable prior_for(const std::optional<fs::path>& path)
{
    return path ? load_prior(*path) : builtin_prior();
}

int cmd_gen_maps(const CommonFlags& flags, std::size_t count, const std::string& prior_path)
{
    GenerationConfig config;
    if (!flags.config.empty()) {
        config = generation_config_from_json(read_text_file(flags.config));
    }
    const PriorTable prior = prior_for(prior_path.empty() ? std::nullopt : std::optional<fs::path>(prior_path));
    const auto maps = generate_map_suite(flags.seed.value_or(0), count, config, prior);
    fs::create_directories(flags.out);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        check_connectivity(maps[i]);
        save_map(maps[i], fs::path(flags.out) / map_file_name(i));
    }
    std::cout << "wrote " << maps.size() << " maps to " << flags.out << '\n';
    return 0;
}

int cmd_run(const CommonFlags& flags)
{
    DeploymentConfig config = load_deployment_config(flags.config);
    if (flags.seed) apply_seed(config, *flags.seed);
    const fs::path out = flags.out;
    fs::create_directories(out);

    const PriorTable prior = prior_for(config.prior_file);
    std::optional<ResponseCache> file_cache;
    ResponseCache memory_cache;
    if (config.cache_file) {
        const fs::path p = config.cache_file->is_absolute() ? *config.cache_file : out / *config.cache_file;
        file_cache.emplace(p);
    }
    ResponseCache& cache = file_cache ? *file_cache : memory_cache;
    TokenLedger ledger;
    HttpChatClient client;

    ExperimentResult result = run_experiment(config, prior, {cache, ledger, client});
    write_outputs(result, out);
    write_text(out / "tokens.json", ledger.to_json());

    const auto ids = result.runs.front().arm_ids;
    double avg = 0.0;
    double regret = 0.0;
    for (const Metrics& m : result.metrics) {
        avg += m.avg_cost_at.back();
        regret += m.cumulative_regret_at.back();
    }
    const double n = static_cast<double>(result.metrics.size());
    std::cout << config.name << ": " << result.runs.size() << " deployment(s) x " << config.trials << " trials, mode "
              << to_string(config.mode) << ", oracle arm " << ids[result.oracle_arm] << '\n'
              << "mean final avg cost " << format_double(avg / n) << " m, mean final cumulative regret "
              << format_double(regret / n) << " m\n";
    return 0;
}

int cmd_replay(const CommonFlags& flags, const std::string& logs_path)
{
    DeploymentConfig config = load_deployment_config(flags.config);
    if (flags.seed) apply_seed(config, *flags.seed);
    if (config.synthetic) throw ConfigError("replay needs a map-based config");
    const PriorTable prior = prior_for(config.prior_file);
    const fs::path out = flags.out;
    const fs::path logs_file = logs_path.empty() ? out / "hindsight.jsonl" : fs::path(logs_path);
    const std::vector<HindsightLog> logs = read_hindsight_file(logs_file);

    std::optional<ResponseCache> file_cache;
    ResponseCache memory_cache;
    if (config.cache_file) {
        const fs::path p = config.cache_file->is_absolute() ? *config.cache_file : out / *config.cache_file;
        file_cache.emplace(p);
    }
    ResponseCache& cache = file_cache ? *file_cache : memory_cache;
    TokenLedger ledger;
    HttpChatClient client;
    ArmBank bank(config, prior, {cache, ledger, client});

    const std::vector<MapInstance> maps = load_map_suite(config.maps, prior);
    std::map<std::string, std::size_t> by_id;
    std::vector<std::shared_ptr<const KnownWorld>> worlds;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        by_id[maps[i].map_id] = i;
        worlds.push_back(KnownWorld::from_map(maps[i]));
    }

    std::ostringstream csv;
    csv << "deployment_id,k,map_id,target,arm_id,replay_cost\n";
    std::size_t replayed = 0;
    for (const HindsightLog& log : logs) {
        if (log.goal_container.empty()) continue;
        const auto it = by_id.find(log.map_id);
        if (it == by_id.end()) {
            throw ConfigError("hindsight log names map '" + log.map_id + "' which is not in the config's suite");
        }
        for (std::size_t a = 0; a < bank.size(); ++a) {
            const double cost = offline_replay(log, bank.policy(a), maps[it->second], worlds[it->second]);
            csv << log.deployment_id << ',' << log.trial << ',' << log.map_id << ',' << log.target << ','
                << bank.arm(a).arm_id << ',' << format_double(cost) << '\n';
        }
        ++replayed;
    }
    fs::create_directories(out);
    write_text(out / "replay.csv", csv.str());
    write_text(out / "replay_tokens.json", ledger.to_json());
    std::cout << "replayed " << replayed << " trial(s) x " << bank.size() << " arm(s) into "
              << (out / "replay.csv").string() << '\n';
    return 0;
}

int cmd_report(const CommonFlags& flags, const std::vector<std::string>& inputs)
{
    std::vector<ResultRow> rows;
    for (const std::string& in : inputs) {
        try {
            auto part = parse_results_csv(read_text_file(in));
            rows.insert(rows.end(), part.begin(), part.end());
        } catch (const SchemaError& e) {
            throw SchemaError(in + ": " + e.field_path(), e.what());
        }
    }
    const Report rep = build_report(rows);
    fs::create_directories(flags.out);
    write_text(fs::path(flags.out) / "curves.csv", rep.curves_csv);
    write_text(fs::path(flags.out) / "arm_summary.csv", rep.arm_summary_csv);
    std::cout << "aggregated " << rows.size() << " rows from " << inputs.size() << " file(s)\n";
    return 0;
}

int cmd_validate(const std::vector<std::string>& files)
{
    int bad = 0;
    for (const std::string& file : files) {
        try {
            const MapInstance m = load_map(file);
            check_invariants(m);
            check_connectivity(m);
            std::cout << file << ": ok (" << m.rooms.size() << " rooms, " << m.containers.size() << " containers, "
                      << m.object_catalog.size() << " objects)\n";
        } catch (const Error& e) {
            std::cerr << file << ": " << e.what() << '\n';
            ++bad;
        }
    }
    return bad == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Object search planning and strategy selection experiments"};
    app.require_subcommand(1);

    CommonFlags gen_flags;
    std::size_t count = 1;
    std::string gen_prior;
    auto* gen = app.add_subcommand("gen-maps", "Generate a seeded suite of household maps");
    add_common(gen, gen_flags, false, true);
    gen->add_option("--count", count, "Number of maps")->check(CLI::PositiveNumber);
    gen->add_option("--prior", gen_prior, "Prior table JSON for object placement")->check(CLI::ExistingFile);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "Run the deployments described by a config");
    add_common(run, run_flags, true, true);

    CommonFlags replay_flags;
    std::string logs;
    auto* replay = app.add_subcommand("replay", "Offline-replay every arm on stored hindsight logs");
    add_common(replay, replay_flags, true, true);
    replay->add_option("--logs", logs, "Hindsight JSONL (default: <out>/hindsight.jsonl)");

    CommonFlags report_flags;
    std::vector<std::string> inputs;
    auto* report = app.add_subcommand("report", "Aggregate results CSVs into per-trial curves");
    add_common(report, report_flags, false, true);
    report->add_option("--in", inputs, "results.csv files")->required()->check(CLI::ExistingFile);

    CommonFlags validate_flags;
    std::vector<std::string> map_files;
    auto* validate = app.add_subcommand("validate-map", "Check map files against the schema and invariants");
    add_common(validate, validate_flags, false, false);
    validate->add_option("files", map_files, "Map JSON files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) return cmd_gen_maps(gen_flags, count, gen_prior);
        if (*run) return cmd_run(run_flags);
        if (*replay) return cmd_replay(replay_flags, logs);
        if (*report) return cmd_report(report_flags, inputs);
        if (*validate) return cmd_validate(map_files);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
