#pragma once

#include "objsearch/worldgen.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace objsearch {

inline constexpr double kSqrt2 = 1.41421356237309504880;

/// Path cost as a count of straight and diagonal moves. Lengths derived from
/// the same counts are bit-identical whichever search produced them.
struct StepCount {
    int straight = 0;
    int diagonal = 0;

    double units() const noexcept { return straight + diagonal * kSqrt2; }
    double meters(double resolution) const noexcept { return units() * resolution; }

    friend bool operator==(const StepCount&, const StepCount&) = default;
};

struct PathResult {
    double length = 0.0; ///< meters
    StepCount steps;
    std::vector<Cell> path;
};

/// Octile lower bound on the 8-connected path length, in meters.
double octile_distance(const GridMap& grid, Cell a, Cell b);

/// 8-connected A* with sqrt(2) diagonals. Diagonal moves need both adjacent
/// orthogonal cells free. Equal f-scores expand the lower (row, col) first.
/// Returns nullopt when `to` is unreachable; throws PreconditionError for
/// out-of-bounds or blocked endpoints.
std::optional<PathResult> grid_astar(const GridMap& grid, Cell from, Cell to);

/// Single-source shortest path lengths (meters) to every cell; +inf where
/// unreachable or blocked. Same motion model as grid_astar.
std::vector<double> distance_field(const GridMap& grid, Cell source);

class DistanceMatrix {
public:
    DistanceMatrix() = default;
    DistanceMatrix(std::vector<Cell> points, std::vector<double> dist);

    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<Cell>& points() const noexcept { return points_; }
    /// Meters, or +inf if unreachable.
    double at(std::size_t i, std::size_t j) const { return dist_[i * points_.size() + j]; }
    bool reachable(std::size_t i, std::size_t j) const
    {
        return at(i, j) != std::numeric_limits<double>::infinity();
    }
    std::optional<std::size_t> index_of(Cell c) const;

private:
    std::vector<Cell> points_;
    std::vector<double> dist_;
};

/// Pairwise path lengths between `points`. Entries equal grid_astar lengths;
/// mutually unreachable pairs are +inf rather than an error.
DistanceMatrix distance_matrix(const GridMap& grid, std::span<const Cell> points);

/// Ids of containers whose access cell cannot be reached from the start pose.
std::vector<std::string> unreachable_containers(const MapInstance& instance);
/// InvariantError listing the unreachable containers, if any.
void check_connectivity(const MapInstance& instance);

} // namespace objsearch
