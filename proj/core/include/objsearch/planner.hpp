#pragma once

#include "objsearch/likelihood.hpp"
#include "objsearch/nav.hpp"
#include "objsearch/worldgen.hpp"

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace objsearch {

/// A container as the robot knows it: location and category, no contents.
struct ContainerInfo {
    std::string id;
    std::string kind;
    std::string room_id;
    std::string room_kind;
    Cell access_cell;
    std::size_t point = 0; ///< row/column in KnownWorld::distances()
};

/// The a-priori known part of a map. Built once per map and shared by every
/// belief state and policy that plans in it.
class KnownWorld {
public:
    /// `start` defaults to the instance's start pose.
    static std::shared_ptr<const KnownWorld> from_map(const MapInstance& instance,
                                                      std::optional<Cell> start = std::nullopt);

    const std::string& map_id() const noexcept { return map_id_; }
    const GridMap& grid() const noexcept { return grid_; }
    const std::vector<Room>& rooms() const noexcept { return rooms_; }
    /// Sorted by container id.
    const std::vector<ContainerInfo>& containers() const noexcept { return containers_; }
    std::optional<std::size_t> container_index(const std::string& id) const;

    /// Points: start pose first, then each container's access cell.
    const DistanceMatrix& distances() const noexcept { return distances_; }
    Cell start() const noexcept { return distances_.points().front(); }
    static constexpr std::size_t kStartPoint = 0;

    const HouseDescription& house() const noexcept { return house_; }
    /// Kind of the room containing `cell`, or "house" if none does.
    std::string room_kind_at(Cell cell) const;
    /// One line per room pair: A* distance between room centre cells, 0.1 m.
    const std::string& room_distance_table() const noexcept { return room_distances_; }

private:
    std::string map_id_;
    GridMap grid_;
    std::vector<Room> rooms_;
    std::vector<ContainerInfo> containers_;
    DistanceMatrix distances_;
    HouseDescription house_;
    std::map<Cell, std::size_t> room_of_cell_;
    std::string room_distances_;
};

struct SearchAction {
    std::string container_id;

    friend bool operator==(const SearchAction&, const SearchAction&) = default;
};

/// The robot's knowledge: known world, pose, and what it has searched.
class BeliefState {
public:
    explicit BeliefState(std::shared_ptr<const KnownWorld> world);

    const KnownWorld& world() const noexcept { return *world_; }
    const std::shared_ptr<const KnownWorld>& world_ptr() const noexcept { return world_; }
    std::size_t pose_point() const noexcept { return pose_point_; }
    Cell pose() const { return world_->distances().points()[pose_point_]; }

    bool is_explored(std::size_t container) const { return explored_.at(container); }
    /// Container indices, id order.
    std::vector<std::size_t> unexplored() const;
    /// Unexplored containers reachable from the pose, id order.
    std::vector<std::size_t> actions() const;
    const std::map<std::string, std::set<std::string>>& observed_contents() const noexcept
    {
        return observed_;
    }
    std::size_t explored_count() const noexcept { return observed_.size(); }

    /// Moves to the container and records what it held.
    void record_search(std::size_t container, std::set<std::string> contents);

private:
    std::shared_ptr<const KnownWorld> world_;
    std::size_t pose_point_ = KnownWorld::kStartPoint;
    std::vector<bool> explored_;
    std::map<std::string, std::set<std::string>> observed_;
};

struct ActionEstimate {
    SearchAction action;
    std::size_t point = 0; ///< access cell in the distance matrix
    double travel_cost = 0.0;
    double search_cost = 0.0;
    double p_success = 0.0;
};

struct Plan {
    std::vector<SearchAction> ordering;
    double expected_cost = 0.0;
};

/// Flat form of the ordering problem: costs from the current pose, pairwise
/// costs between candidates, search costs and success probabilities.
struct OrderingProblem {
    std::vector<std::string> ids;
    std::vector<double> start_cost;
    std::vector<double> pair_cost; ///< row-major n x n
    std::vector<double> search_cost;
    std::vector<double> p_success;

    std::size_t size() const noexcept { return ids.size(); }
    double pair(std::size_t i, std::size_t j) const { return pair_cost[i * ids.size() + j]; }
};

struct OrderingSolution {
    std::vector<std::size_t> order;
    double expected_cost = 0.0;
};

/// Minimum expected-cost ordering via dynamic programming over visited
/// subsets: V(S, last) = min_{a not in S} c(last, a) + R_a + (1 - P_a) V(S+a, a),
/// with V(all, .) = 0. Ties go to the smaller id. Supports up to 20 items.
OrderingSolution solve_ordering(const OrderingProblem& problem);

/// sum_i prod_{j<i} (1 - P_j) * (c(prev_i, a_i) + R_i), prev_1 = pose.
double evaluate_ordering(const OrderingProblem& problem, std::span<const std::size_t> order);

/// Builds the flat problem for `candidates` starting at `start_point`.
OrderingProblem make_ordering_problem(std::span<const ActionEstimate> candidates, const DistanceMatrix& distances,
                                      std::size_t start_point);

/// Up to `cap` actions: the union of the ceil(cap/2) most likely and the
/// ceil(cap/2) nearest, trimmed by p / (d + resolution) if over the cap.
/// All actions when there are at most `cap`. Result is in id order.
std::vector<ActionEstimate> select_candidates(std::span<const ActionEstimate> estimates, std::size_t cap,
                                              double resolution);

/// Exact expected-cost plan over `candidates`. Unreachable candidates are
/// dropped; EmptyActionSetError if none remain.
Plan plan_expected_cost(std::span<const ActionEstimate> candidates, const DistanceMatrix& distances,
                        std::size_t start_point);

double evaluate_ordering(std::span<const SearchAction> ordering, std::span<const ActionEstimate> estimates,
                         const DistanceMatrix& distances, std::size_t start_point);

struct SearchOutcome {
    bool found = false;
    BeliefState belief;
    double step_cost = 0.0;
};

/// Travels to the container, reveals its contents from `instance`, and
/// reports whether `target` was among them.
SearchOutcome execute_search(const BeliefState& belief, const SearchAction& action, const MapInstance& instance,
                             const std::string& target, double search_cost = 0.0);

} // namespace objsearch
