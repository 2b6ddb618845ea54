#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond its data types.

#include "objsearch/harness.hpp"

#include <optional>
#include <string>
#include <vector>

namespace objsearch::testing {

/// Plain Dijkstra over the 8-connected grid, meters; nullopt if unreachable.
std::optional<double> dijkstra_length(const GridMap& grid, Cell from, Cell to);

/// Random grid with roughly `obstacle_fraction` blocked cells.
GridMap random_grid(Rng& rng, int width, int height, double obstacle_fraction, double resolution = 1.0);

struct BruteForceResult {
    std::vector<std::size_t> order;
    double cost = 0.0;
};

/// Every permutation of the problem's items, evaluated term by term.
BruteForceResult brute_force_ordering(const OrderingProblem& problem);

/// Random ordering problem over points in the plane.
OrderingProblem random_ordering_problem(Rng& rng, std::size_t n);

struct ContainerSpec {
    std::string id;
    std::string kind;
    Cell cell;
    std::set<std::string> contents;
};

/// One-room map (kind `room_kind`) over the free cells of `rows`.
MapInstance make_instance(const std::vector<std::string>& rows, Cell start, const std::vector<ContainerSpec>& containers,
                          std::string room_kind = "kitchen", double resolution = 1.0, std::string map_id = "test-map");

/// Probability an object placed by prior-weighted sampling lands in a
/// container of (container_kind, room_kind) on this instance.
double placement_probability(const MapInstance& instance, const PriorTable& prior, const std::string& object,
                             const std::string& container_kind, const std::string& room_kind);

/// A ChatClient with scripted replies; counts calls.
class ScriptedClient final : public ChatClient {
public:
    explicit ScriptedClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    ChatResult complete(const ModelEndpoint&, const std::string& prompt) override
    {
        prompts.push_back(prompt);
        const std::string text = replies_.empty() ? "" : replies_[std::min(calls, replies_.size() - 1)];
        ++calls;
        return {text, 10, 2};
    }
    std::size_t calls = 0;
    std::vector<std::string> prompts;

private:
    std::vector<std::string> replies_;
};

} // namespace objsearch::testing
