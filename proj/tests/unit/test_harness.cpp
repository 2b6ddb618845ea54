#include "objsearch/harness.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace objsearch;
using namespace objsearch::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("objsearch_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const char* kBaseConfig = R"({
  "name": "t",
  "maps": {"generate": {"seed": 3, "count": 12}},
  "trials": 10,
  "seed": 5,
  "endpoints": [{"name": "table", "kind": "prior"}, {"name": "noisy", "kind": "prior", "sigma": 0.5, "seed": 2}],
  "arms": [
    {"id": "greedy", "policy": "optimistic+greedy"},
    {"id": "model", "policy": "llm+model", "template": "P-CONTEXT-A", "endpoint": "table"},
    {"id": "direct", "policy": "llm-direct", "endpoint": "noisy"}
  ],
  "selection": "replay"
})";

DeploymentConfig base_config()
{
    return deployment_config_from_json(kBaseConfig);
}

struct Context {
    ResponseCache cache;
    TokenLedger ledger;
    ScriptedClient client{{}};
    RunContext get() { return {cache, ledger, client}; }
};

} // namespace

TEST_CASE("config parsing")
{
    const DeploymentConfig c = base_config();
    CHECK(c.name == "t");
    CHECK(c.trials == 10);
    CHECK(c.mode == SelectionMode::Replay);
    CHECK(c.arms.size() == 3);
    CHECK(c.arms[2].template_name == std::optional<std::string>("P-DIRECT"));
    CHECK(c.permutation_seed == 5);
    CHECK(c.target_seed == mix_seed(5, 1));
    REQUIRE(c.endpoints.size() == 2);
    CHECK_FALSE(c.endpoints[0].noise);
    CHECK(c.endpoints[1].noise->sigma == 0.5);

    const auto c2 = deployment_config_from_json(R"({"synthetic": {"means": [1, 2]}, "trials": 5,
        "selection": {"mode": "ucb", "c": 3}})");
    CHECK(c2.synthetic->means.size() == 2);
    CHECK(*c2.c.fixed == 3.0);

    CHECK_THROWS_AS(deployment_config_from_json("{ not json"), SchemaError);
    CHECK_THROWS_AS(deployment_config_from_json(R"({"bogus": 1, "synthetic": {"means": [1]}})"), SchemaError);
    CHECK_THROWS_AS(deployment_config_from_json(R"({"synthetic": {"means": [1]}, "trials": -2})"), SchemaError);
    CHECK_THROWS_AS(deployment_config_from_json(R"({"synthetic": {"means": [1]}, "selection": "best"})"), ConfigError);
    CHECK_THROWS_AS(deployment_config_from_json(R"({"synthetic": {"means": [1]}, "candidate_cap": 40})"), ConfigError);

    std::string trials = kBaseConfig;
    trials.replace(trials.find("\"trials\": 10"), 12, "\"trials\": 13");
    CHECK_THROWS_WITH_AS(deployment_config_from_json(trials), doctest::Contains("exceed"), ConfigError);

    std::string unknown_ep = kBaseConfig;
    unknown_ep.replace(unknown_ep.find("\"endpoint\": \"table\""), 19, "\"endpoint\": \"gone\"");
    CHECK_THROWS_AS(deployment_config_from_json(unknown_ep), ConfigError);

    std::string dup = kBaseConfig;
    dup.replace(dup.find("\"id\": \"model\""), 13, "\"id\": \"greedy\"");
    CHECK_THROWS_AS(deployment_config_from_json(dup), ConfigError);
}

TEST_CASE("missing config file names the path")
{
    const fs::path missing = fs::temp_directory_path() / "objsearch_no_such_config.json";
    CHECK_THROWS_WITH_AS(load_deployment_config(missing), doctest::Contains(missing.string().c_str()), ConfigError);
}

TEST_CASE("single container trial costs the straight distance")
{
    const MapInstance m = make_instance({"....", "....", "...."}, {0, 0}, {{"box_0", "shelf", {2, 3}, {"cup"}}});
    DeploymentConfig c = base_config();
    Context ctx;
    ArmBank bank(c, builtin_prior(), ctx.get());
    const auto world = KnownWorld::from_map(m);
    const double d = *dijkstra_length(m.grid, {0, 0}, {2, 3});
    for (std::size_t a = 0; a < bank.size(); ++a) {
        const TrialRun run = run_trial(m, world, "cup", a, bank);
        CHECK(run.result.found);
        CHECK(run.result.searches == 1);
        CHECK(run.result.cost == d);
    }
    CHECK_THROWS_AS(run_trial(m, world, "plate", 0, bank), PreconditionError);
}

TEST_CASE("metrics")
{
    const std::vector<double> sel{10, 20};
    const std::vector<double> ora{10, 15};
    const Metrics m = compute_metrics(sel, ora);
    CHECK(m.regret_increment == std::vector<double>{0, 5});
    CHECK(m.cumulative_regret_at == std::vector<double>{0, 5});
    CHECK(m.avg_cost_at == std::vector<double>{10, 15});

    Rng rng(2);
    std::vector<double> a(50), b(50);
    for (std::size_t i = 0; i < 50; ++i) {
        a[i] = 100 * rng.uniform01();
        b[i] = 100 * rng.uniform01();
    }
    const Metrics r = compute_metrics(a, b);
    double sum = 0, reg = 0;
    for (std::size_t i = 0; i < 50; ++i) {
        sum += a[i];
        reg += a[i] - b[i];
        CHECK(r.avg_cost_at[i] * static_cast<double>(i + 1) == doctest::Approx(sum));
        CHECK(r.cumulative_regret_at[i] == doctest::Approx(reg));
    }
    CHECK_THROWS(compute_metrics(a, std::vector<double>{1.0}));
}

TEST_CASE("seeded permutations")
{
    const auto p = seeded_permutation(30, 9);
    auto sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 30; ++i) CHECK(sorted[i] == i);
    CHECK(seeded_permutation(30, 9) == p);
    CHECK(seeded_permutation(30, 10) != p);
}

TEST_CASE("experiments")
{
    DeploymentConfig c = base_config();
    Context ctx;
    const ExperimentResult r = run_experiment(c, builtin_prior(), ctx.get());
    REQUIRE(r.runs.size() == 1);
    const DeploymentRun& run = r.runs[0];
    CHECK(run.deployment_id == "t-d000");
    REQUIRE(run.trials.size() == 10);
    CHECK(ctx.client.calls == 0);

    SUBCASE("deterministic")
    {
        Context again;
        const ExperimentResult r2 = run_experiment(c, builtin_prior(), again.get());
        CHECK(results_csv(r2) == results_csv(r));
        CHECK(arm_costs_csv(r2) == arm_costs_csv(r));
        CHECK(hindsight_jsonl(r2) == hindsight_jsonl(r));
    }
    SUBCASE("cold start tries each arm once")
    {
        for (std::size_t k = 0; k < 3; ++k) CHECK(run.trace[k].chosen == k);
    }
    SUBCASE("cost accounting matches the recorded path")
    {
        const auto maps = load_map_suite(c.maps, builtin_prior());
        for (const TrialRun& t : run.trials) {
            const MapInstance* m = nullptr;
            for (const auto& x : maps) {
                if (x.map_id == t.result.map_id) m = &x;
            }
            REQUIRE(m != nullptr);
            double total = 0;
            Cell at = m->start_pose;
            for (const SearchStep& s : t.log.searched) {
                const Cell next = m->find_container(s.container_id)->access_cell;
                total += *dijkstra_length(m->grid, at, next);
                at = next;
            }
            CHECK(total == doctest::Approx(t.result.cost).epsilon(1e-12));
            CHECK(t.result.found);
            CHECK(t.result.arm_costs.size() == 3);
            CHECK(t.result.replay_costs[run.trace[t.result.k - 1].chosen] ==
                  doctest::Approx(t.result.cost).epsilon(1e-12));
            CHECK(t.log.searched.back().container_id == t.log.goal_container);
        }
    }
    SUBCASE("outputs round trip through the csv parser")
    {
        const fs::path dir = scratch_dir("outputs");
        write_outputs(r, dir);
        for (const char* f : {"results.csv", "arm_costs.csv", "trials.jsonl", "hindsight.jsonl",
                              "selection_trace.jsonl"}) {
            CHECK(fs::exists(dir / f));
        }
        const auto rows = parse_results_csv(slurp(dir / "results.csv"));
        REQUIRE(rows.size() == 10);
        CHECK(rows[0].k == 1);
        CHECK(rows[9].cumulative_regret == doctest::Approx(r.metrics[0].cumulative_regret_at.back()));
        const auto logs = read_hindsight_file(dir / "hindsight.jsonl");
        CHECK(logs.size() == 10);
        CHECK(logs[4].deployed_cost == run.trials[4].result.cost);

        const Report rep = build_report(rows);
        CHECK(rep.curves_csv.starts_with("k,deployments,mean_avg_cost,mean_cumulative_regret\n"));
        CHECK(rep.arm_summary_csv.starts_with("arm_id,pulls,mean_cost\n"));
        CHECK_THROWS_AS(parse_results_csv("k,cost\n1,2\n"), SchemaError);
    }
}

TEST_CASE("fixed mode")
{
    DeploymentConfig c = base_config();
    c.mode = SelectionMode::Fixed;
    c.fixed_arm = "model";
    c.trials = 5;
    c.deployments = 2;
    Context ctx;
    const ExperimentResult r = run_experiment(c, builtin_prior(), ctx.get());
    REQUIRE(r.runs.size() == 2);
    for (const DeploymentRun& run : r.runs) {
        CHECK(run.trials.size() == 5);
        for (const TrialRun& t : run.trials) CHECK(t.result.arm_id == "model");
    }
    CHECK(r.runs[1].deployment_id == "t-d001");
}

TEST_CASE("synthetic selection")
{
    DeploymentConfig c = deployment_config_from_json(R"({"synthetic": {"means": [100, 120, 140], "seed": 1},
        "trials": 60, "selection": "ucb"})");
    const ExperimentResult r = run_experiment(c);
    const DeploymentRun& run = r.runs[0];
    CHECK(run.trace[0].chosen == 0);
    CHECK(run.trace[1].chosen == 1);
    CHECK(run.trace[2].chosen == 2);
    CHECK(r.oracle_arm == 0);
    SyntheticTrialEvaluator eval(*c.synthetic, mix_seed(1, 0), "x");
    CHECK(eval.cost(4, 1) == eval.cost(4, 1));
    CHECK(eval.cost(4, 1) >= 0.0);
}
