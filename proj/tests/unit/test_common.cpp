#include "objsearch/common.hpp"

#include <doctest.h>

#include <set>

using namespace objsearch;

TEST_CASE("stable_hash is FNV-1a")
{
    CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
    CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(stable_hash("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("mix_seed separates streams")
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 50; ++s) {
        for (std::uint64_t k = 0; k < 50; ++k) seen.insert(mix_seed(s, k));
    }
    CHECK(seen.size() == 2500);
    CHECK(mix_seed(3, 4) == mix_seed(3, 4));
}

TEST_CASE("Rng is reproducible and in range")
{
    Rng a(99);
    Rng b(99);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(5);
    std::size_t counts[7] = {};
    for (int i = 0; i < 7000; ++i) {
        const auto v = r.uniform_index(7);
        REQUIRE(v < 7);
        ++counts[v];
    }
    for (std::size_t c : counts) CHECK(c > 800);
    for (int i = 0; i < 1000; ++i) {
        const int v = r.uniform_int(-2, 2);
        CHECK(v >= -2);
        CHECK(v <= 2);
        const double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws have the requested moments")
{
    Rng r(17);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal(3.0, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(3.0).epsilon(0.02));
    CHECK(var == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("Cell ordering and formatting")
{
    CHECK(Cell{1, 2} < Cell{1, 3});
    CHECK(Cell{0, 9} < Cell{1, 0});
    CHECK(to_string(Cell{4, 5}) == "(4, 5)");
}

TEST_CASE("SchemaError carries its field path")
{
    const SchemaError e("containers[0].access_cell", "bad");
    CHECK(e.field_path() == "containers[0].access_cell");
    CHECK(std::string(e.what()).find("containers[0].access_cell") != std::string::npos);
}
