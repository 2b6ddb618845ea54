#pragma once

#include "objsearch/common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace objsearch {

enum class Occupancy : std::uint8_t { Free = 0, Obstacle = 1 };

/// Row-major occupancy grid with a metric resolution.
class GridMap {
public:
    GridMap() = default;
    GridMap(int width, int height, double resolution, Occupancy fill = Occupancy::Obstacle);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double resolution() const noexcept { return resolution_; }

    bool in_bounds(Cell c) const noexcept
    {
        return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_;
    }
    /// False for out-of-bounds cells.
    bool is_free(Cell c) const noexcept
    {
        return in_bounds(c) && cells_[index(c)] == Occupancy::Free;
    }
    void set(Cell c, Occupancy value);
    std::size_t index(Cell c) const noexcept
    {
        return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(c.col);
    }
    std::size_t cell_count() const noexcept { return cells_.size(); }

    friend bool operator==(const GridMap&, const GridMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    double resolution_ = 1.0;
    std::vector<Occupancy> cells_;
};

struct Room {
    std::string id;
    std::string kind;
    std::vector<Cell> cells;

    friend bool operator==(const Room&, const Room&) = default;
};

struct Container {
    std::string id;
    std::string kind;
    std::string room_id;
    Cell access_cell;
    /// Ground truth. Policies never read this directly.
    std::set<std::string> contents;

    friend bool operator==(const Container&, const Container&) = default;
};

struct MapInstance {
    std::string map_id;
    GridMap grid;
    std::vector<Room> rooms;
    std::vector<Container> containers;
    Cell start_pose;
    std::set<std::string> object_catalog;
    std::optional<std::uint64_t> generator_seed;

    const Room* find_room(const std::string& id) const;
    const Container* find_container(const std::string& id) const;

    friend bool operator==(const MapInstance&, const MapInstance&) = default;
};

/// Marginal placement probabilities keyed by (object, container kind, room kind).
/// Values are not normalized across containers.
class PriorTable {
public:
    PriorTable() = default;
    explicit PriorTable(double default_probability);

    void set(const std::string& object, const std::string& container_kind,
             const std::string& room_kind, double p);
    double lookup(const std::string& object, const std::string& container_kind,
                  const std::string& room_kind) const;
    double default_probability() const noexcept { return default_; }
    /// Distinct object labels with at least one listed entry.
    std::vector<std::string> objects() const;

    using Key = std::tuple<std::string, std::string, std::string>;
    const std::map<Key, double>& entries() const noexcept { return entries_; }

    friend bool operator==(const PriorTable&, const PriorTable&) = default;

private:
    std::map<Key, double> entries_;
    double default_ = 0.0;
};

struct GenerationConfig {
    int min_rooms = 3;
    int max_rooms = 6;
    int min_containers_per_room = 2;
    int max_containers_per_room = 4;
    int width = 40;
    int height = 40;
    double resolution = 0.25;
    int min_objects = 6;
    int max_objects = 10;
};

/// Thrown when the requested rooms cannot be partitioned out of the grid.
class InfeasibleConfigError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Builds a household layout by recursive rectangular partitioning with one
/// door per partition wall, then scatters objects over containers in
/// proportion to `prior`. Deterministic in (seed, config, prior).
MapInstance generate_map(std::uint64_t seed, const GenerationConfig& config,
                         const PriorTable& prior);

/// Uniform draw from the instance's object catalog.
std::string sample_task(const MapInstance& instance, std::uint64_t seed);

/// Checks every MapInstance invariant that does not need path planning.
/// Throws InvariantError naming the first violation.
void check_invariants(const MapInstance& instance);

/// Room kinds and the container kinds generated for each.
const std::map<std::string, std::vector<std::string>>& room_palettes();

/// The packaged household prior.
const PriorTable& builtin_prior();

// JSON I/O -----------------------------------------------------------------

std::string map_to_json(const MapInstance& instance);
MapInstance map_from_json(const std::string& text);
void save_map(const MapInstance& instance, const std::filesystem::path& path);
MapInstance load_map(const std::filesystem::path& path);

std::string prior_to_json(const PriorTable& prior);
PriorTable prior_from_json(const std::string& text);
PriorTable load_prior(const std::filesystem::path& path);

GenerationConfig generation_config_from_json(const std::string& text);

/// Reads a whole file; throws ConfigError naming the path on failure.
std::string read_text_file(const std::filesystem::path& path);

} // namespace objsearch
