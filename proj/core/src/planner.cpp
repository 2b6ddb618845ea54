#include "objsearch/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace objsearch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Free room cell nearest the room's centroid; lexicographic on ties.
std::optional<Cell> room_centre(const Room& room, const GridMap& grid)
{
    double sr = 0.0;
    double sc = 0.0;
    std::size_t n = 0;
    for (const Cell& c : room.cells) {
        sr += c.row;
        sc += c.col;
        ++n;
    }
    if (n == 0) {
        return std::nullopt;
    }
    sr /= static_cast<double>(n);
    sc /= static_cast<double>(n);
    std::vector<Cell> cells = room.cells;
    std::sort(cells.begin(), cells.end());
    std::optional<Cell> best;
    double best_d = kInf;
    for (const Cell& c : cells) {
        if (!grid.is_free(c)) {
            continue;
        }
        const double d = (c.row - sr) * (c.row - sr) + (c.col - sc) * (c.col - sc);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::string format_meters(double m)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", m);
    return buf;
}

} // namespace

std::shared_ptr<const KnownWorld> KnownWorld::from_map(const MapInstance& instance, std::optional<Cell> start)
{
    auto world = std::make_shared<KnownWorld>();
    world->map_id_ = instance.map_id;
    world->grid_ = instance.grid;
    world->rooms_ = instance.rooms;
    world->house_ = describe_house(instance);

    for (std::size_t r = 0; r < instance.rooms.size(); ++r) {
        for (const Cell& c : instance.rooms[r].cells) {
            world->room_of_cell_.emplace(c, r);
        }
    }

    for (const Container& c : instance.containers) {
        const Room* room = instance.find_room(c.room_id);
        world->containers_.push_back({c.id, c.kind, c.room_id, room ? room->kind : std::string("house"),
                                      c.access_cell, 0});
    }
    std::sort(world->containers_.begin(), world->containers_.end(),
              [](const ContainerInfo& a, const ContainerInfo& b) { return a.id < b.id; });

    std::vector<Cell> points{start.value_or(instance.start_pose)};
    for (ContainerInfo& c : world->containers_) {
        c.point = points.size();
        points.push_back(c.access_cell);
    }
    world->distances_ = distance_matrix(world->grid_, points);

    std::vector<std::size_t> table_rooms;
    std::vector<Cell> centres;
    for (std::size_t r = 0; r < instance.rooms.size(); ++r) {
        if (auto centre = room_centre(instance.rooms[r], instance.grid)) {
            table_rooms.push_back(r);
            centres.push_back(*centre);
        }
    }
    const DistanceMatrix room_dist = distance_matrix(instance.grid, centres);
    std::ostringstream table;
    bool first = true;
    for (std::size_t i = 0; i < table_rooms.size(); ++i) {
        for (std::size_t j = i + 1; j < table_rooms.size(); ++j) {
            const Room& a = instance.rooms[table_rooms[i]];
            const Room& b = instance.rooms[table_rooms[j]];
            table << (first ? "" : "\n") << "- " << a.kind << " (" << a.id << ") to " << b.kind << " (" << b.id
                  << "): " << (room_dist.reachable(i, j) ? format_meters(room_dist.at(i, j)) : "unreachable");
            first = false;
        }
    }
    if (first && !table_rooms.empty()) {
        table << "- " << instance.rooms[table_rooms[0]].kind << " (" << instance.rooms[table_rooms[0]].id
              << ") is the only room";
    }
    world->room_distances_ = table.str();
    return world;
}

std::optional<std::size_t> KnownWorld::container_index(const std::string& id) const
{
    auto it = std::lower_bound(containers_.begin(), containers_.end(), id,
                               [](const ContainerInfo& c, const std::string& key) { return c.id < key; });
    if (it == containers_.end() || it->id != id) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - containers_.begin());
}

std::string KnownWorld::room_kind_at(Cell cell) const
{
    auto it = room_of_cell_.find(cell);
    return it == room_of_cell_.end() ? std::string("house") : rooms_[it->second].kind;
}

BeliefState::BeliefState(std::shared_ptr<const KnownWorld> world)
    : world_(std::move(world)), explored_(world_->containers().size(), false)
{
}

std::vector<std::size_t> BeliefState::unexplored() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < explored_.size(); ++i) {
        if (!explored_[i]) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> BeliefState::actions() const
{
    std::vector<std::size_t> out;
    const DistanceMatrix& d = world_->distances();
    for (std::size_t i : unexplored()) {
        if (d.reachable(pose_point_, world_->containers()[i].point)) {
            out.push_back(i);
        }
    }
    return out;
}

void BeliefState::record_search(std::size_t container, std::set<std::string> contents)
{
    if (explored_.at(container)) {
        throw PreconditionError("container '" + world_->containers()[container].id + "' was already searched");
    }
    explored_[container] = true;
    pose_point_ = world_->containers()[container].point;
    observed_[world_->containers()[container].id] = std::move(contents);
}

// Ordering ------------------------------------------------------------------------

OrderingSolution solve_ordering(const OrderingProblem& p)
{
    const std::size_t n = p.size();
    if (n == 0) {
        throw EmptyActionSetError("no candidate actions to order");
    }
    if (n > 16) {
        throw PreconditionError("solve_ordering supports at most 16 candidates");
    }
    std::vector<std::size_t> by_id(n);
    std::iota(by_id.begin(), by_id.end(), std::size_t{0});
    std::stable_sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) { return p.ids[a] < p.ids[b]; });

    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<double> value((full + 1) * n, 0.0);
    std::vector<std::size_t> choice((full + 1) * n, n);
    auto at = [n](std::size_t mask, std::size_t last) { return mask * n + last; };

    for (std::size_t mask = full - 1; mask >= 1; --mask) {
        for (std::size_t last = 0; last < n; ++last) {
            if (!(mask >> last & 1U)) {
                continue;
            }
            double best = kInf;
            std::size_t arg = n;
            for (std::size_t a : by_id) {
                if (mask >> a & 1U) {
                    continue;
                }
                const std::size_t next = mask | (std::size_t{1} << a);
                const double v = p.pair(last, a) + p.search_cost[a] + (1.0 - p.p_success[a]) * value[at(next, a)];
                if (v < best) {
                    best = v;
                    arg = a;
                }
            }
            value[at(mask, last)] = best;
            choice[at(mask, last)] = arg;
        }
    }

    double best = kInf;
    std::size_t first = n;
    for (std::size_t a : by_id) {
        const std::size_t mask = std::size_t{1} << a;
        const double v = p.start_cost[a] + p.search_cost[a] + (1.0 - p.p_success[a]) * (mask == full ? 0.0 : value[at(mask, a)]);
        if (v < best) {
            best = v;
            first = a;
        }
    }
    if (first == n) {
        throw EmptyActionSetError("every candidate is unreachable");
    }

    OrderingSolution sol;
    sol.expected_cost = best;
    sol.order.push_back(first);
    std::size_t mask = std::size_t{1} << first;
    std::size_t last = first;
    while (mask != full) {
        const std::size_t next = choice[at(mask, last)];
        if (next == n) {
            break;
        }
        sol.order.push_back(next);
        mask |= std::size_t{1} << next;
        last = next;
    }
    return sol;
}

double evaluate_ordering(const OrderingProblem& p, std::span<const std::size_t> order)
{
    if (order.empty()) {
        throw PreconditionError("cannot evaluate an empty ordering");
    }
    std::vector<bool> used(p.size(), false);
    double survive = 1.0;
    double total = 0.0;
    std::optional<std::size_t> prev;
    for (std::size_t a : order) {
        if (a >= p.size() || used[a]) {
            throw PreconditionError("ordering repeats or references an unknown action");
        }
        used[a] = true;
        const double travel = prev ? p.pair(*prev, a) : p.start_cost[a];
        total += survive * (travel + p.search_cost[a]);
        survive *= 1.0 - p.p_success[a];
        prev = a;
    }
    return total;
}

OrderingProblem make_ordering_problem(std::span<const ActionEstimate> candidates, const DistanceMatrix& distances,
                                      std::size_t start_point)
{
    OrderingProblem p;
    const std::size_t n = candidates.size();
    p.pair_cost.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const ActionEstimate& e = candidates[i];
        p.ids.push_back(e.action.container_id);
        p.start_cost.push_back(distances.at(start_point, e.point));
        p.search_cost.push_back(e.search_cost);
        p.p_success.push_back(e.p_success);
        for (std::size_t j = 0; j < n; ++j) {
            p.pair_cost[i * n + j] = distances.at(e.point, candidates[j].point);
        }
    }
    return p;
}

std::vector<ActionEstimate> select_candidates(std::span<const ActionEstimate> estimates, std::size_t cap,
                                              double resolution)
{
    if (estimates.empty()) {
        throw EmptyActionSetError("no unexplored containers to choose from");
    }
    if (cap == 0) {
        throw PreconditionError("candidate cap must be positive");
    }
    auto by_id = [](const ActionEstimate& a, const ActionEstimate& b) {
        return a.action.container_id < b.action.container_id;
    };
    std::vector<ActionEstimate> all(estimates.begin(), estimates.end());
    std::sort(all.begin(), all.end(), by_id);
    if (all.size() <= cap) {
        return all;
    }

    const std::size_t half = (cap + 1) / 2;
    std::vector<ActionEstimate> likely = all;
    std::stable_sort(likely.begin(), likely.end(),
                     [](const ActionEstimate& a, const ActionEstimate& b) { return a.p_success > b.p_success; });
    std::vector<ActionEstimate> near = all;
    std::stable_sort(near.begin(), near.end(),
                     [](const ActionEstimate& a, const ActionEstimate& b) { return a.travel_cost < b.travel_cost; });

    std::vector<ActionEstimate> picked;
    std::set<std::string> seen;
    for (const auto* list : {&likely, &near}) {
        for (std::size_t i = 0; i < half; ++i) {
            if (seen.insert((*list)[i].action.container_id).second) {
                picked.push_back((*list)[i]);
            }
        }
    }
    if (picked.size() > cap) {
        std::sort(picked.begin(), picked.end(), by_id);
        std::stable_sort(picked.begin(), picked.end(), [&](const ActionEstimate& a, const ActionEstimate& b) {
            return a.p_success / (a.travel_cost + resolution) > b.p_success / (b.travel_cost + resolution);
        });
        picked.resize(cap);
    }
    std::sort(picked.begin(), picked.end(), by_id);
    return picked;
}

Plan plan_expected_cost(std::span<const ActionEstimate> candidates, const DistanceMatrix& distances,
                        std::size_t start_point)
{
    std::vector<ActionEstimate> usable;
    for (const ActionEstimate& e : candidates) {
        if (distances.reachable(start_point, e.point)) {
            usable.push_back(e);
        }
    }
    if (usable.empty()) {
        throw EmptyActionSetError("no reachable candidate containers");
    }
    const OrderingProblem problem = make_ordering_problem(usable, distances, start_point);
    const OrderingSolution sol = solve_ordering(problem);
    Plan plan;
    plan.expected_cost = sol.expected_cost;
    for (std::size_t i : sol.order) {
        plan.ordering.push_back(usable[i].action);
    }
    return plan;
}

double evaluate_ordering(std::span<const SearchAction> ordering, std::span<const ActionEstimate> estimates,
                         const DistanceMatrix& distances, std::size_t start_point)
{
    std::vector<ActionEstimate> chosen;
    for (const SearchAction& a : ordering) {
        auto it = std::find_if(estimates.begin(), estimates.end(),
                               [&](const ActionEstimate& e) { return e.action == a; });
        if (it == estimates.end()) {
            throw PreconditionError("no estimate for container '" + a.container_id + "'");
        }
        chosen.push_back(*it);
    }
    const OrderingProblem problem = make_ordering_problem(chosen, distances, start_point);
    std::vector<std::size_t> order(chosen.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    return evaluate_ordering(problem, order);
}

SearchOutcome execute_search(const BeliefState& belief, const SearchAction& action, const MapInstance& instance,
                             const std::string& target, double search_cost)
{
    const KnownWorld& world = belief.world();
    const auto index = world.container_index(action.container_id);
    if (!index) {
        throw PreconditionError("unknown container '" + action.container_id + "'");
    }
    if (belief.is_explored(*index)) {
        throw PreconditionError("container '" + action.container_id + "' was already searched");
    }
    const double travel = world.distances().at(belief.pose_point(), world.containers()[*index].point);
    if (!std::isfinite(travel)) {
        throw UnreachableError("container '" + action.container_id + "' is unreachable from the robot");
    }
    const Container* truth = instance.find_container(action.container_id);
    if (truth == nullptr) {
        throw PreconditionError("map '" + instance.map_id + "' has no container '" + action.container_id + "'");
    }
    SearchOutcome out{truth->contents.contains(target), belief, travel + search_cost};
    out.belief.record_search(*index, truth->contents);
    return out;
}

} // namespace objsearch
