#pragma once

#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace objsearch {

/// Grid cell addressed as (row, col). Orders lexicographically.
struct Cell {
    int row = 0;
    int col = 0;

    friend auto operator<=>(const Cell&, const Cell&) = default;
};

std::string to_string(const Cell& cell);

// ---------------------------------------------------------------------------
// Errors. Every failure the library reports derives from objsearch::Error.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A JSON document does not match the expected schema.
class SchemaError : public Error {
public:
    SchemaError(std::string field_path, const std::string& what);
    const std::string& field_path() const noexcept { return field_path_; }

private:
    std::string field_path_;
};

/// A structurally valid document violates a domain invariant.
class InvariantError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class EmptyActionSetError : public Error {
public:
    using Error::Error;
};

class UnreachableError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic randomness. The engine is std::mt19937_64; the distribution
// helpers are written out so streams are identical across standard libraries.

/// 64-bit FNV-1a over the bytes of `text`, chained from `basis`.
std::uint64_t stable_hash(std::string_view text,
                          std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n);
    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi);
    /// Uniform in [0, 1).
    double uniform01();
    double normal(double mean, double stddev);

private:
    std::mt19937_64 engine_;
};

} // namespace objsearch
