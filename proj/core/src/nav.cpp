#include "objsearch/nav.hpp"

#include <algorithm>
#include <cstdlib>
#include <queue>
#include <tuple>

namespace objsearch {

namespace {

struct Move {
    int dr, dc;
    bool diagonal;
};

constexpr Move kMoves[] = {
    {-1, 0, false}, {1, 0, false}, {0, -1, false}, {0, 1, false},
    {-1, -1, true}, {-1, 1, true}, {1, -1, true},  {1, 1, true},
};

bool can_move(const GridMap& grid, Cell from, const Move& m)
{
    const Cell to{from.row + m.dr, from.col + m.dc};
    if (!grid.is_free(to)) {
        return false;
    }
    if (m.diagonal) {
        return grid.is_free({from.row + m.dr, from.col}) && grid.is_free({from.row, from.col + m.dc});
    }
    return true;
}

StepCount advance(StepCount s, const Move& m)
{
    if (m.diagonal) {
        ++s.diagonal;
    } else {
        ++s.straight;
    }
    return s;
}

void require_endpoint(const GridMap& grid, Cell c, const char* which)
{
    if (!grid.in_bounds(c)) {
        throw PreconditionError(std::string(which) + " cell " + to_string(c) + " is outside the grid");
    }
    if (!grid.is_free(c)) {
        throw PreconditionError(std::string(which) + " cell " + to_string(c) + " is an obstacle");
    }
}

double octile_units(Cell a, Cell b)
{
    const int dr = std::abs(a.row - b.row);
    const int dc = std::abs(a.col - b.col);
    const int lo = std::min(dr, dc);
    const int hi = std::max(dr, dc);
    return (hi - lo) + lo * kSqrt2;
}

// Min-heap entry ordered by (f, row, col).
using OpenEntry = std::tuple<double, int, int>;
using OpenList = std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>>;

} // namespace

double octile_distance(const GridMap& grid, Cell a, Cell b)
{
    return octile_units(a, b) * grid.resolution();
}

std::optional<PathResult> grid_astar(const GridMap& grid, Cell from, Cell to)
{
    require_endpoint(grid, from, "start");
    require_endpoint(grid, to, "goal");

    const std::size_t n = grid.cell_count();
    std::vector<StepCount> g(n);
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> parent(n, n);
    OpenList open;

    const std::size_t start = grid.index(from);
    seen[start] = true;
    open.emplace(octile_units(from, to), from.row, from.col);

    while (!open.empty()) {
        const auto [f, row, col] = open.top();
        open.pop();
        const Cell cur{row, col};
        const std::size_t ci = grid.index(cur);
        if (f > g[ci].units() + octile_units(cur, to)) {
            continue; // stale entry
        }
        if (cur == to) {
            PathResult result;
            result.steps = g[ci];
            result.length = g[ci].meters(grid.resolution());
            for (std::size_t i = ci; i != n; i = parent[i]) {
                result.path.push_back({static_cast<int>(i / static_cast<std::size_t>(grid.width())),
                                       static_cast<int>(i % static_cast<std::size_t>(grid.width()))});
            }
            std::reverse(result.path.begin(), result.path.end());
            return result;
        }
        for (const Move& m : kMoves) {
            if (!can_move(grid, cur, m)) {
                continue;
            }
            const Cell next{row + m.dr, col + m.dc};
            const std::size_t ni = grid.index(next);
            const StepCount cand = advance(g[ci], m);
            if (!seen[ni] || cand.units() < g[ni].units()) {
                seen[ni] = true;
                g[ni] = cand;
                parent[ni] = ci;
                open.emplace(cand.units() + octile_units(next, to), next.row, next.col);
            }
        }
    }
    return std::nullopt;
}

std::vector<double> distance_field(const GridMap& grid, Cell source)
{
    require_endpoint(grid, source, "source");
    const std::size_t n = grid.cell_count();
    std::vector<StepCount> g(n);
    std::vector<bool> seen(n, false);
    std::vector<bool> done(n, false);
    OpenList open;

    seen[grid.index(source)] = true;
    open.emplace(0.0, source.row, source.col);
    while (!open.empty()) {
        const auto [d, row, col] = open.top();
        open.pop();
        const Cell cur{row, col};
        const std::size_t ci = grid.index(cur);
        if (done[ci]) {
            continue;
        }
        done[ci] = true;
        for (const Move& m : kMoves) {
            if (!can_move(grid, cur, m)) {
                continue;
            }
            const Cell next{row + m.dr, col + m.dc};
            const std::size_t ni = grid.index(next);
            const StepCount cand = advance(g[ci], m);
            if (!done[ni] && (!seen[ni] || cand.units() < g[ni].units())) {
                seen[ni] = true;
                g[ni] = cand;
                open.emplace(cand.units(), next.row, next.col);
            }
        }
    }

    std::vector<double> out(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        if (done[i]) {
            out[i] = g[i].meters(grid.resolution());
        }
    }
    return out;
}

DistanceMatrix::DistanceMatrix(std::vector<Cell> points, std::vector<double> dist)
    : points_(std::move(points)), dist_(std::move(dist))
{
    if (dist_.size() != points_.size() * points_.size()) {
        throw PreconditionError("distance matrix size does not match point count");
    }
}

std::optional<std::size_t> DistanceMatrix::index_of(Cell c) const
{
    auto it = std::find(points_.begin(), points_.end(), c);
    if (it == points_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - points_.begin());
}

DistanceMatrix distance_matrix(const GridMap& grid, std::span<const Cell> points)
{
    const std::size_t k = points.size();
    std::vector<double> dist(k * k, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < k; ++i) {
        const std::vector<double> field = distance_field(grid, points[i]);
        for (std::size_t j = 0; j < k; ++j) {
            dist[i * k + j] = i == j ? 0.0 : field[grid.index(points[j])];
        }
    }
    return DistanceMatrix({points.begin(), points.end()}, std::move(dist));
}

std::vector<std::string> unreachable_containers(const MapInstance& instance)
{
    const std::vector<double> field = distance_field(instance.grid, instance.start_pose);
    std::vector<std::string> out;
    for (const Container& c : instance.containers) {
        if (!instance.grid.in_bounds(c.access_cell) ||
            field[instance.grid.index(c.access_cell)] == std::numeric_limits<double>::infinity()) {
            out.push_back(c.id);
        }
    }
    return out;
}

void check_connectivity(const MapInstance& instance)
{
    const std::vector<std::string> cut = unreachable_containers(instance);
    if (!cut.empty()) {
        std::string list;
        for (const std::string& id : cut) {
            list += (list.empty() ? "" : ", ") + id;
        }
        throw InvariantError("map '" + instance.map_id + "': containers unreachable from the start: " + list);
    }
}

} // namespace objsearch
