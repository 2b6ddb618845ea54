#include "objsearch/nav.hpp"
#include "objsearch/worldgen.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <map>

using namespace objsearch;
using objsearch::testing::make_instance;
using objsearch::testing::placement_probability;

namespace {

GenerationConfig tiny_config()
{
    GenerationConfig c;
    c.min_rooms = c.max_rooms = 1;
    c.min_containers_per_room = c.max_containers_per_room = 1;
    c.min_objects = c.max_objects = 1;
    c.width = c.height = 20;
    return c;
}

} // namespace

TEST_CASE("single room, container and object")
{
    const MapInstance m = generate_map(7, tiny_config(), builtin_prior());
    REQUIRE(m.rooms.size() == 1);
    REQUIRE(m.containers.size() == 1);
    REQUIRE(m.object_catalog.size() == 1);
    CHECK(m.containers[0].contents == m.object_catalog);
    CHECK(m.generator_seed == 7u);
}

TEST_CASE("generation is deterministic")
{
    const GenerationConfig config;
    CHECK(map_to_json(generate_map(42, config, builtin_prior())) ==
          map_to_json(generate_map(42, config, builtin_prior())));
    CHECK(map_to_json(generate_map(42, config, builtin_prior())) !=
          map_to_json(generate_map(43, config, builtin_prior())));
}

TEST_CASE("generated maps satisfy invariants and are connected")
{
    const GenerationConfig config;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const MapInstance m = generate_map(seed, config, builtin_prior());
        CHECK_NOTHROW(check_invariants(m));
        CHECK(unreachable_containers(m).empty());
        CHECK(static_cast<int>(m.rooms.size()) >= config.min_rooms);
        CHECK(static_cast<int>(m.rooms.size()) <= config.max_rooms);
        std::map<std::string, int> per_room;
        for (const Container& c : m.containers) ++per_room[c.room_id];
        for (const auto& [room, n] : per_room) {
            CHECK(n >= config.min_containers_per_room);
            CHECK(n <= config.max_containers_per_room);
        }
        for (const Container& c : m.containers) {
            // Containers stand against a wall.
            bool wall = false;
            for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
                wall = wall || !m.grid.is_free({c.access_cell.row + dr, c.access_cell.col + dc});
            }
            CHECK(wall);
        }
    }
}

TEST_CASE("infeasible and invalid generation configs")
{
    GenerationConfig many;
    many.width = many.height = 20;
    many.min_rooms = many.max_rooms = 40;
    CHECK_THROWS_AS(generate_map(1, many, builtin_prior()), InfeasibleConfigError);

    GenerationConfig small;
    small.width = 12;
    CHECK_THROWS_AS(generate_map(1, small, builtin_prior()), InfeasibleConfigError);

    GenerationConfig empty_range;
    empty_range.min_rooms = 4;
    empty_range.max_rooms = 3;
    CHECK_THROWS_AS(generate_map(1, empty_range, builtin_prior()), ConfigError);
}

TEST_CASE("save and load round-trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "objsearch_worldgen_test";
    std::filesystem::create_directories(dir);
    for (std::uint64_t seed : {1u, 2u, 99u}) {
        const MapInstance m = generate_map(seed, {}, builtin_prior());
        save_map(m, dir / "m.json");
        const MapInstance back = load_map(dir / "m.json");
        CHECK(back == m);
    }
    const MapInstance imported = make_instance({"....", "...."}, {0, 0}, {{"box_0", "cabinet", {1, 3}, {"mug"}}});
    CHECK(map_from_json(map_to_json(imported)) == imported);
    CHECK_FALSE(map_from_json(map_to_json(imported)).generator_seed.has_value());
}

TEST_CASE("load rejects schema and invariant violations")
{
    const MapInstance base = make_instance({"....", ".#.."}, {0, 0}, {{"box_0", "cabinet", {0, 3}, {"mug"}}});
    const std::string good = map_to_json(base);

    SUBCASE("missing rooms")
    {
        std::string bad = good;
        const auto at = bad.find("\"rooms\"");
        bad.replace(at, 7, "\"roomz\"");
        try {
            map_from_json(bad);
            FAIL("expected SchemaError");
        } catch (const SchemaError& e) {
            CHECK(e.field_path() == "rooms");
        }
    }
    SUBCASE("access cell on an obstacle")
    {
        MapInstance m = base;
        m.containers[0].access_cell = {1, 1};
        CHECK_THROWS_AS(map_from_json(map_to_json(m)), InvariantError);
    }
    SUBCASE("catalog object in no container")
    {
        MapInstance m = base;
        m.object_catalog.insert("ghost");
        CHECK_THROWS_AS(check_invariants(m), InvariantError);
    }
    SUBCASE("start on an obstacle")
    {
        MapInstance m = base;
        m.start_pose = {1, 1};
        CHECK_THROWS_AS(check_invariants(m), InvariantError);
    }
    SUBCASE("malformed JSON")
    {
        CHECK_THROWS_AS(map_from_json("{not json"), SchemaError);
    }
}

TEST_CASE("sample_task")
{
    SUBCASE("singleton catalog")
    {
        const MapInstance m = make_instance({"..."}, {0, 0}, {{"b_0", "cabinet", {0, 2}, {"apple"}}});
        for (std::uint64_t s = 0; s < 20; ++s) CHECK(sample_task(m, s) == "apple");
    }
    SUBCASE("uniform over four objects")
    {
        const MapInstance m = make_instance(
            {"....."}, {0, 0},
            {{"a_0", "cabinet", {0, 1}, {"apple", "mug"}}, {"b_1", "shelf", {0, 4}, {"book", "towel"}}});
        std::map<std::string, int> freq;
        for (std::uint64_t s = 0; s < 10000; ++s) ++freq[sample_task(m, s)];
        REQUIRE(freq.size() == 4);
        for (const auto& [obj, n] : freq) {
            CHECK(n / 10000.0 >= 0.22);
            CHECK(n / 10000.0 <= 0.28);
        }
    }
    SUBCASE("deterministic")
    {
        const MapInstance m = generate_map(3, {}, builtin_prior());
        CHECK(sample_task(m, 11) == sample_task(m, 11));
        CHECK(m.object_catalog.contains(sample_task(m, 11)));
    }
    SUBCASE("empty catalog")
    {
        const MapInstance m = make_instance({"..."}, {0, 0}, {{"b_0", "cabinet", {0, 2}, {}}});
        CHECK_THROWS_AS(sample_task(m, 0), PreconditionError);
    }
}

TEST_CASE("placement follows the normalised prior")
{
    // Empirical share of mug placements in a kitchen countertop against the
    // mean exact per-instance probability.
    const PriorTable& prior = builtin_prior();
    int placed = 0;
    int hits = 0;
    double expected = 0.0;
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
        const MapInstance m = generate_map(seed, {}, prior);
        if (!m.object_catalog.contains("mug")) continue;
        ++placed;
        expected += placement_probability(m, prior, "mug", "countertop", "kitchen");
        for (const Container& c : m.containers) {
            if (c.contents.contains("mug") && c.kind == "countertop" && m.find_room(c.room_id)->kind == "kitchen") {
                ++hits;
            }
        }
    }
    REQUIRE(placed > 300);
    const double empirical = static_cast<double>(hits) / placed;
    CHECK(std::abs(empirical - expected / placed) <= 0.05);
}

TEST_CASE("prior table")
{
    PriorTable p(0.05);
    p.set("mug", "countertop", "kitchen", 0.6);
    CHECK(p.lookup("mug", "countertop", "kitchen") == 0.6);
    CHECK(p.lookup("mug", "bed", "bedroom") == 0.05);
    CHECK_THROWS_AS(p.set("mug", "sink", "kitchen", 1.5), InvariantError);
    CHECK(prior_from_json(prior_to_json(p)) == p);

    const PriorTable bare = prior_from_json(R"([{"object":"mug","container_kind":"sink","room_kind":"kitchen","p":0.2}])");
    CHECK(bare.lookup("mug", "sink", "kitchen") == 0.2);
    CHECK(bare.default_probability() == 0.0);

    CHECK(builtin_prior().lookup("mug", "countertop", "kitchen") == 0.6);
    CHECK(builtin_prior().objects().size() >= 10);
}
