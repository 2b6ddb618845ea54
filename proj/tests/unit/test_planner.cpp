#include "objsearch/policies.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace objsearch;
using namespace objsearch::testing;

namespace {

// Start plus the A/B pair: d(start, A) = 5, d(start, B) = 10, d(A, B) = 7.
DistanceMatrix ab_matrix()
{
    return DistanceMatrix({{0, 0}, {0, 1}, {0, 2}}, {0, 5, 10, 5, 0, 7, 10, 7, 0});
}

std::vector<ActionEstimate> ab_estimates()
{
    return {{{"A"}, 1, 5.0, 0.0, 0.5}, {{"B"}, 2, 10.0, 0.0, 0.5}};
}

ActionEstimate est(const std::string& id, double d, double p)
{
    return {{id}, 0, d, 0.0, p};
}

// Direct evaluation of the candidate rule.
std::set<std::string> rule_oracle(std::vector<ActionEstimate> all, std::size_t cap, double res)
{
    if (all.size() <= cap) {
        std::set<std::string> ids;
        for (const auto& e : all) ids.insert(e.action.container_id);
        return ids;
    }
    const std::size_t half = (cap + 1) / 2;
    auto id = [](const ActionEstimate& e) { return e.action.container_id; };
    std::vector<ActionEstimate> byp = all;
    std::sort(byp.begin(), byp.end(), [&](const auto& a, const auto& b) {
        return a.p_success != b.p_success ? a.p_success > b.p_success : id(a) < id(b);
    });
    std::vector<ActionEstimate> byd = all;
    std::sort(byd.begin(), byd.end(), [&](const auto& a, const auto& b) {
        return a.travel_cost != b.travel_cost ? a.travel_cost < b.travel_cost : id(a) < id(b);
    });
    std::vector<ActionEstimate> u;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < half; ++i) {
        if (seen.insert(id(byp[i])).second) u.push_back(byp[i]);
    }
    for (std::size_t i = 0; i < half; ++i) {
        if (seen.insert(id(byd[i])).second) u.push_back(byd[i]);
    }
    std::sort(u.begin(), u.end(), [&](const auto& a, const auto& b) {
        const double sa = a.p_success / (a.travel_cost + res);
        const double sb = b.p_success / (b.travel_cost + res);
        return sa != sb ? sa > sb : id(a) < id(b);
    });
    if (u.size() > cap) u.resize(cap);
    std::set<std::string> ids;
    for (const auto& e : u) ids.insert(id(e));
    return ids;
}

// A 1 x 16 corridor: near cabinet at col 0, start at col 5, far fridge at col 15.
MapInstance corridor()
{
    return make_instance({"................"}, {0, 5},
                         {{"cabinet_0", "cabinet", {0, 0}, {}}, {"fridge_1", "fridge", {0, 15}, {"milk"}}});
}

class FixedChooser final : public ContainerChooser {
public:
    explicit FixedChooser(std::string reply) : reply_(std::move(reply)) {}
    std::string respond(const DirectRequest& req) override
    {
        requests.push_back(req);
        return reply_;
    }
    std::vector<DirectRequest> requests;

private:
    std::string reply_;
};

class ThrowingProvider final : public ProbabilityProvider {
public:
    double probability(const LikelihoodQuery&) override { throw UnparsableResponseError("nope"); }
};

class ConstantProvider final : public ProbabilityProvider {
public:
    explicit ConstantProvider(double p) : p_(p) {}
    double probability(const LikelihoodQuery&) override { return p_; }

private:
    double p_;
};

} // namespace

TEST_CASE("A/B hand case")
{
    const Plan plan = plan_expected_cost(ab_estimates(), ab_matrix(), 0);
    REQUIRE(plan.ordering.size() == 2);
    CHECK(plan.ordering[0].container_id == "A");
    CHECK(plan.ordering[1].container_id == "B");
    CHECK(plan.expected_cost == 8.5);

    const auto est = ab_estimates();
    const std::vector<SearchAction> ab{{"A"}, {"B"}};
    const std::vector<SearchAction> ba{{"B"}, {"A"}};
    CHECK(evaluate_ordering(ab, est, ab_matrix(), 0) == 8.5);
    CHECK(evaluate_ordering(ba, est, ab_matrix(), 0) == 13.5);
}

TEST_CASE("evaluate_ordering degenerate cases")
{
    const DistanceMatrix m({{0, 0}, {0, 3}, {0, 5}}, {0, 3, 5, 3, 0, 2, 5, 2, 0});
    const std::vector<ActionEstimate> single{{{"X"}, 1, 3.0, 0.0, 0.4}};
    CHECK(evaluate_ordering(std::vector<SearchAction>{{"X"}}, single, m, 0) == 3.0);

    const std::vector<ActionEstimate> zeros{{{"X"}, 1, 3.0, 0.0, 0.0}, {{"Y"}, 2, 5.0, 0.0, 0.0}};
    CHECK(evaluate_ordering(std::vector<SearchAction>{{"X"}, {"Y"}}, zeros, m, 0) == 3.0 + 2.0);

    const Plan one = plan_expected_cost(std::vector<ActionEstimate>{{{"X"}, 1, 3.0, 0.0, 1.0}}, m, 0);
    CHECK(one.expected_cost == 3.0);

    // Search cost is carried through.
    const std::vector<ActionEstimate> costly{{{"X"}, 1, 3.0, 1.5, 0.5}, {{"Y"}, 2, 5.0, 1.0, 0.5}};
    CHECK(evaluate_ordering(std::vector<SearchAction>{{"X"}, {"Y"}}, costly, m, 0) == 4.5 + 0.5 * 3.0);
}

TEST_CASE("DP matches brute force")
{
    Rng rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(8);
        const OrderingProblem p = random_ordering_problem(rng, n);
        const OrderingSolution dp = solve_ordering(p);
        const BruteForceResult bf = brute_force_ordering(p);
        CHECK(dp.expected_cost == doctest::Approx(bf.cost).epsilon(1e-12));
        CHECK(std::abs(dp.expected_cost - bf.cost) <= 1e-9);
        REQUIRE(dp.order.size() == n);
        CHECK(dp.order.front() == bf.order.front());
        CHECK(std::abs(evaluate_ordering(p, dp.order) - dp.expected_cost) <= 1e-9);
    }
}

TEST_CASE("scaling distances scales cost and keeps the argmin")
{
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        OrderingProblem p = random_ordering_problem(rng, 6);
        for (double& s : p.search_cost) s = 0.0;
        const OrderingSolution base = solve_ordering(p);
        const double lambda = 0.1 + rng.uniform01() * 10.0;
        for (double& d : p.start_cost) d *= lambda;
        for (double& d : p.pair_cost) d *= lambda;
        const OrderingSolution scaled = solve_ordering(p);
        CHECK(scaled.order.front() == base.order.front());
        CHECK(scaled.expected_cost == doctest::Approx(base.expected_cost * lambda).epsilon(1e-9));
    }
}

TEST_CASE("ties in the DP go to the smaller id")
{
    OrderingProblem p;
    p.ids = {"a", "b"};
    p.start_cost = {4, 4};
    p.pair_cost = {0, 2, 2, 0};
    p.search_cost = {0, 0};
    p.p_success = {0.5, 0.5};
    CHECK(solve_ordering(p).order == std::vector<std::size_t>{0, 1});
}

TEST_CASE("select_candidates")
{
    SUBCASE("under the cap returns everything")
    {
        std::vector<ActionEstimate> e;
        for (int i = 0; i < 5; ++i) e.push_back(est("c" + std::to_string(i), i + 1.0, 0.1));
        CHECK(select_candidates(e, 8, 0.25).size() == 5);
    }
    SUBCASE("disjoint tops give exactly those eight")
    {
        std::vector<ActionEstimate> e;
        // c00..c03 likely but far, c04..c07 near but unlikely, the rest neither.
        for (int i = 0; i < 4; ++i) e.push_back(est("c0" + std::to_string(i), 50.0 + i, 0.9 - 0.01 * i));
        for (int i = 4; i < 8; ++i) e.push_back(est("c0" + std::to_string(i), 1.0 + i, 0.01));
        for (int i = 10; i < 14; ++i) e.push_back(est("c" + std::to_string(i), 30.0 + i, 0.02));
        const auto got = select_candidates(e, 8, 0.25);
        std::set<std::string> ids;
        for (const auto& g : got) ids.insert(g.action.container_id);
        CHECK(ids == std::set<std::string>{"c00", "c01", "c02", "c03", "c04", "c05", "c06", "c07"});
    }
    SUBCASE("random sets agree with the rule and keep the extremes")
    {
        Rng rng(99);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<ActionEstimate> e;
            const std::size_t n = 9 + rng.uniform_index(8);
            for (std::size_t i = 0; i < n; ++i) {
                char id[32];
                std::snprintf(id, sizeof id, "k%02zu", i);
                // Coarse values so ties actually occur.
                e.push_back(est(id, 1.0 + static_cast<double>(rng.uniform_index(6)),
                                static_cast<double>(rng.uniform_index(5)) / 4.0));
            }
            const std::size_t cap = 1 + rng.uniform_index(9);
            const auto got = select_candidates(e, cap, 0.25);
            std::set<std::string> ids;
            for (const auto& g : got) ids.insert(g.action.container_id);
            CHECK(ids == rule_oracle(e, cap, 0.25));
            CHECK(got.size() <= cap);
            CHECK(std::is_sorted(got.begin(), got.end(), [](const auto& a, const auto& b) {
                return a.action.container_id < b.action.container_id;
            }));
            if (cap == 8) {
                const auto best_p = *std::min_element(e.begin(), e.end(), [](const auto& a, const auto& b) {
                    return a.p_success != b.p_success ? a.p_success > b.p_success
                                                      : a.action.container_id < b.action.container_id;
                });
                const auto best_d = *std::min_element(e.begin(), e.end(), [](const auto& a, const auto& b) {
                    return a.travel_cost != b.travel_cost ? a.travel_cost < b.travel_cost
                                                          : a.action.container_id < b.action.container_id;
                });
                CHECK(ids.contains(best_p.action.container_id));
                CHECK(ids.contains(best_d.action.container_id));
            }
        }
    }
    SUBCASE("empty input")
    {
        CHECK_THROWS_AS(select_candidates(std::vector<ActionEstimate>{}, 8, 0.25), EmptyActionSetError);
    }
}

TEST_CASE("unreachable candidates are dropped")
{
    const double inf = std::numeric_limits<double>::infinity();
    const DistanceMatrix m({{0, 0}, {0, 1}, {0, 2}}, {0, 5, inf, 5, 0, inf, inf, inf, 0});
    const std::vector<ActionEstimate> e{{{"A"}, 1, 5.0, 0.0, 0.1}, {{"B"}, 2, inf, 0.0, 0.9}};
    const Plan plan = plan_expected_cost(e, m, 0);
    REQUIRE(plan.ordering.size() == 1);
    CHECK(plan.ordering[0].container_id == "A");
    const std::vector<ActionEstimate> only_b{{{"B"}, 2, inf, 0.0, 0.9}};
    CHECK_THROWS_AS(plan_expected_cost(only_b, m, 0), EmptyActionSetError);
}

TEST_CASE("known world and belief state")
{
    const MapInstance m = generate_map(12, {}, builtin_prior());
    const auto world = KnownWorld::from_map(m);
    CHECK(world->start() == m.start_pose);
    CHECK(world->containers().size() == m.containers.size());
    CHECK(std::is_sorted(world->containers().begin(), world->containers().end(),
                         [](const auto& a, const auto& b) { return a.id < b.id; }));
    for (std::size_t i = 0; i < world->containers().size(); ++i) {
        CHECK(world->containers()[i].point == i + 1);
        CHECK(world->distances().points()[i + 1] == world->containers()[i].access_cell);
    }
    CHECK(world->room_distance_table().find(" to ") != std::string::npos);

    BeliefState b(world);
    CHECK(b.pose_point() == KnownWorld::kStartPoint);
    CHECK(b.unexplored().size() == m.containers.size());
    CHECK(b.observed_contents().empty());
    b.record_search(0, {"x"});
    CHECK(b.is_explored(0));
    CHECK(b.pose_point() == 1);
    CHECK(b.unexplored().size() == m.containers.size() - 1);
    CHECK(b.observed_contents().size() == 1);
    CHECK_THROWS_AS(b.record_search(0, {}), PreconditionError);
}

TEST_CASE("execute_search")
{
    const MapInstance m = corridor();
    const auto world = KnownWorld::from_map(m);
    const BeliefState b(world);

    const SearchOutcome miss = execute_search(b, {"cabinet_0"}, m, "milk");
    CHECK_FALSE(miss.found);
    CHECK(miss.step_cost == 5.0);
    CHECK(miss.belief.observed_contents().at("cabinet_0").empty());
    CHECK(miss.belief.unexplored().size() == 1);
    CHECK(miss.belief.pose() == Cell{0, 0});

    const SearchOutcome hit = execute_search(miss.belief, {"fridge_1"}, m, "milk", 0.5);
    CHECK(hit.found);
    CHECK(hit.step_cost == 15.5);
    CHECK(hit.belief.unexplored().empty());

    CHECK_THROWS_AS(execute_search(miss.belief, {"cabinet_0"}, m, "milk"), PreconditionError);
    CHECK_THROWS_AS(execute_search(b, {"nope"}, m, "milk"), PreconditionError);
}

TEST_CASE("unreachable containers leave the action set")
{
    const MapInstance m = make_instance({"..#.."}, {0, 0},
                                        {{"a_0", "cabinet", {0, 1}, {}}, {"b_1", "shelf", {0, 4}, {"mug"}}});
    const auto world = KnownWorld::from_map(m);
    BeliefState b(world);
    CHECK(b.actions() == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(execute_search(b, {"b_1"}, m, "mug"), UnreachableError);

    OptimisticGreedyPolicy greedy;
    const SearchTrace t = run_search(world, m, "mug", greedy);
    CHECK_FALSE(t.found);
    CHECK(t.steps.size() == 1);
}

TEST_CASE("llm+model prefers the far likely container")
{
    // Near unlikely first: 5 + 0.95 * 15 = 19.25. Far likely first: 10 + 0.1 * 15 = 11.5.
    PriorTable prior(0.0);
    prior.set("milk", "cabinet", "kitchen", 0.05);
    prior.set("milk", "fridge", "kitchen", 0.9);
    PriorProvider provider(prior);
    const auto world = KnownWorld::from_map(corridor());
    const BeliefState b(world);
    CHECK(next_action_llm_model(b, "milk", provider).container_id == "fridge_1");
    CHECK(next_action_optimistic_greedy(b).container_id == "cabinet_0");
}

TEST_CASE("llm+model edge cases")
{
    const MapInstance m = corridor();
    const auto world = KnownWorld::from_map(m);
    BeliefState b(world);

    SUBCASE("provider failures fall back")
    {
        ThrowingProvider bad;
        ModelBasedPolicy policy(bad);
        const SearchAction a = policy.next_action(b, "milk");
        CHECK(a.container_id == "cabinet_0");
        CHECK(policy.failures().size() == 2);
    }
    SUBCASE("one container left")
    {
        b.record_search(0, {});
        ConstantProvider p(0.3);
        CHECK(next_action_llm_model(b, "milk", p).container_id == "fridge_1");
    }
    SUBCASE("nothing left")
    {
        b.record_search(0, {});
        b.record_search(1, {"milk"});
        ConstantProvider p(0.3);
        CHECK_THROWS_AS(next_action_llm_model(b, "milk", p), EmptyActionSetError);
        CHECK_THROWS_AS(next_action_optimistic_greedy(b), EmptyActionSetError);
    }
}

TEST_CASE("with certain success everywhere llm+model acts greedily")
{
    ConstantProvider certain(1.0);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const MapInstance m = generate_map(seed, {}, builtin_prior());
        const BeliefState b(KnownWorld::from_map(m));
        CHECK(next_action_llm_model(b, "mug", certain).container_id ==
              next_action_optimistic_greedy(b).container_id);
    }
}

TEST_CASE("optimistic+greedy")
{
    SUBCASE("nearest wins")
    {
        const MapInstance m = make_instance({"..........", }, {0, 0},
                                            {{"A", "cabinet", {0, 4}, {}}, {"B", "shelf", {0, 9}, {"x"}}});
        CHECK(next_action_optimistic_greedy(BeliefState(KnownWorld::from_map(m))).container_id == "A");
    }
    SUBCASE("ties go to the smaller id")
    {
        const MapInstance m = make_instance({"........."}, {0, 4},
                                            {{"B", "shelf", {0, 8}, {}}, {"A", "cabinet", {0, 0}, {"x"}}});
        CHECK(next_action_optimistic_greedy(BeliefState(KnownWorld::from_map(m))).container_id == "A");
    }
    SUBCASE("single container")
    {
        const MapInstance m = make_instance({"...."}, {0, 0}, {{"only", "shelf", {0, 3}, {"x"}}});
        CHECK(next_action_optimistic_greedy(BeliefState(KnownWorld::from_map(m))).container_id == "only");
    }
}

TEST_CASE("llm-direct")
{
    const MapInstance m = make_instance({"..........."}, {0, 5},
                                        {{"bed_0", "bed", {0, 0}, {}},
                                         {"fridge_1", "fridge", {0, 10}, {"milk"}},
                                         {"sink_2", "sink", {0, 7}, {}}});
    const auto world = KnownWorld::from_map(m);
    const BeliefState b(world);
    const PromptTemplate& tmpl = builtin_template(kDirect);

    SUBCASE("named container is taken")
    {
        FixedChooser chooser("Go to the fridge.");
        CHECK(next_action_llm_direct(b, "milk", chooser, tmpl).container_id == "fridge_1");
        REQUIRE(chooser.requests.size() == 1);
        const std::string& prompt = chooser.requests[0].prompt;
        CHECK(prompt.find("bed_0") != std::string::npos);
        CHECK(prompt.find("sink_2") != std::string::npos);
        CHECK(prompt.find("milk") != std::string::npos);
        CHECK(prompt.find('{') == std::string::npos);
    }
    SUBCASE("garbage twice falls back to the nearest")
    {
        FixedChooser chooser("qwerty");
        CHECK(next_action_llm_direct(b, "milk", chooser, tmpl).container_id == "sink_2");
        REQUIRE(chooser.requests.size() == 2);
        CHECK(chooser.requests[1].attempt == 1);
        CHECK(chooser.requests[1].prompt.find(kDirectReprompt) != std::string::npos);
    }
    SUBCASE("single container needs no answer")
    {
        BeliefState late(world);
        late.record_search(0, {});
        late.record_search(2, {});
        FixedChooser chooser("qwerty");
        CHECK(next_action_llm_direct(late, "milk", chooser, tmpl).container_id == "fridge_1");
        CHECK(chooser.requests.empty());
    }
    SUBCASE("prior chooser names the likeliest")
    {
        PriorTable prior(0.01);
        prior.set("milk", "fridge", "kitchen", 0.9);
        PriorChooser chooser(prior);
        DirectPolicy policy(chooser);
        CHECK(policy.next_action(b, "milk").container_id == "fridge_1");
    }
    SUBCASE("llm chooser goes through the cache")
    {
        ScriptedClient client({"sink_2"});
        ResponseCache cache;
        TokenLedger ledger;
        ModelEndpoint ep;
        ep.name = "scripted";
        LlmChooser chooser(ep, std::string(kDirect), cache, ledger, client);
        DirectPolicy policy(chooser);
        CHECK(policy.next_action(b, "milk").container_id == "sink_2");
        CHECK(policy.next_action(b, "milk").container_id == "sink_2");
        CHECK(client.calls == 1);
        CHECK(ledger.counters("scripted").calls == 1);
    }
}

TEST_CASE("search loop terminates, never repeats, finds the target")
{
    PriorProvider provider(builtin_prior());
    ModelBasedPolicy model(provider);
    OptimisticGreedyPolicy greedy;
    PriorChooser chooser(builtin_prior(), PriorNoise{0.5, 3});
    DirectPolicy direct(chooser);
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const MapInstance m = generate_map(seed, {}, builtin_prior());
        const auto world = KnownWorld::from_map(m);
        const std::string target = sample_task(m, seed);
        for (SearchPolicy* p : std::initializer_list<SearchPolicy*>{&model, &greedy, &direct}) {
            const SearchTrace t = run_search(world, m, target, *p);
            CHECK(t.found);
            CHECK(t.steps.size() <= m.containers.size());
            std::set<std::string> ids;
            double sum = 0.0;
            for (const SearchStep& s : t.steps) {
                CHECK(ids.insert(s.container_id).second);
                sum += s.step_cost;
            }
            CHECK(sum == t.cost);
            CHECK(t.steps.back().contents.contains(target));
        }
    }
}
