#include "objsearch/common.hpp"

#include <cmath>
#include <numbers>

namespace objsearch {

std::string to_string(const Cell& cell)
{
    return "(" + std::to_string(cell.row) + ", " + std::to_string(cell.col) + ")";
}

SchemaError::SchemaError(std::string field_path, const std::string& what)
    : Error("schema violation at '" + field_path + "': " + what),
      field_path_(std::move(field_path))
{
}

std::uint64_t stable_hash(std::string_view text, std::uint64_t basis) noexcept
{
    std::uint64_t h = basis;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : engine_(mix_seed(seed, 0)) {}

std::uint64_t Rng::uniform_index(std::uint64_t n)
{
    if (n == 0) {
        throw PreconditionError("uniform_index: empty range");
    }
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return x % n;
}

int Rng::uniform_int(int lo, int hi)
{
    if (hi < lo) {
        throw PreconditionError("uniform_int: empty range");
    }
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
    return static_cast<int>(lo + static_cast<std::int64_t>(uniform_index(span)));
}

double Rng::uniform01()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double stddev)
{
    // Box-Muller; u1 is shifted into (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
}

} // namespace objsearch
