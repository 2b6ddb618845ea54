#pragma once

#include "objsearch/likelihood.hpp"

#include <optional>
#include <string>
#include <vector>

namespace objsearch::testing {

struct ProbabilityCase {
    std::string text;
    std::optional<double> expected; ///< nullopt: must be rejected
};

struct ChoiceCase {
    std::string text;
    std::vector<ChoiceCandidate> candidates;
    std::optional<std::string> expected; ///< nullopt: no match
};

inline const std::vector<ProbabilityCase>& probability_corpus()
{
    static const std::vector<ProbabilityCase> cases = {
        {"I estimate 0.7", 0.7},
        {"Likelihood is about 35%.", 0.35},
        {"probability: 0.35", 0.35},
        {"0.35", 0.35},
        {".5", 0.5},
        {"1", 1.0},
        {"0", 0.0},
        {"1.0", 1.0},
        {"The answer is 0.2, or maybe 0.25.", 0.25},
        {"On a scale of 1 to 10 I'd say 7, so 0.7", 0.7},
        {"Probability = 4e-1", 0.4},
        {"roughly 35 percent", 0.35},
        {"100%", 1.0},
        {"0%", 0.0},
        {"There are 3 cabinets here; probability 0.15", 0.15},
        {"P(mug in fridge) = 0.05.", 0.05},
        {"**0.8**", 0.8},
        {"Answer:\n0.42\n", 0.42},
        {"0.3, not 5", 0.3},
        {"-0.2 or 0.1", 0.1},
        {"somewhere in 0.2-0.4", 0.4},
        {"0.9!", 0.9},
        {"I'd put it at 12.5%", 0.125},
        {"none", std::nullopt},
        {"", std::nullopt},
        {"I cannot say.", std::nullopt},
        {"5", std::nullopt},
        {"150%", std::nullopt},
        {"-0.5", std::nullopt},
        {"mug2 fridge3", std::nullopt},
        {"about 1e5", std::nullopt},
        {"R2D2", std::nullopt},
    };
    return cases;
}

inline const std::vector<ChoiceCase>& choice_corpus()
{
    const std::vector<ChoiceCandidate> kitchen = {
        {"fridge_0", "fridge"}, {"bed_1", "bed"}, {"countertop_2", "countertop"}};
    const std::vector<ChoiceCandidate> cabinets = {{"cabinet_3", "cabinet"}, {"cabinet_7", "cabinet"}};
    static const std::vector<ChoiceCase> cases = {
        {"Search the Fridge in the kitchen", kitchen, "fridge_0"},
        {"xyzzy", kitchen, std::nullopt},
        {"I would search the bed_1 first, then the fridge", kitchen, "fridge_0"},
        {"BED", kitchen, "bed_1"},
        {"countertop 2", kitchen, "countertop_2"},
        {"Next: countertop_2.", kitchen, "countertop_2"},
        {"the bedroom", kitchen, std::nullopt},
        {"fridges are cold", kitchen, std::nullopt},
        {"fridge_0", kitchen, "fridge_0"},
        {"cabinet_7", cabinets, "cabinet_7"},
        {"the cabinet", cabinets, "cabinet_3"},
        {"Cabinet 7 looks promising", cabinets, "cabinet_7"},
        {"", kitchen, std::nullopt},
    };
    return cases;
}

} // namespace objsearch::testing
