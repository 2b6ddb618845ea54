#pragma once

#include "objsearch/worldgen.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace objsearch {

/// Probability used whenever a likelihood cannot be obtained.
inline constexpr double kFallbackProbability = 0.01;

struct RoomSummary {
    std::string room_id;
    std::string kind;
    std::vector<std::string> container_kinds;
};

/// Rooms with the container kinds they hold, in map order.
struct HouseDescription {
    std::vector<RoomSummary> rooms;

    std::string render() const;
};

HouseDescription describe_house(const MapInstance& instance);

struct LikelihoodQuery {
    std::string target;
    std::string container_id;
    std::string container_kind;
    std::string room_kind;
    HouseDescription house;
    std::string map_id;
};

enum class AnswerMode { Probability, ContainerChoice };

struct PromptTemplate {
    std::string name;
    std::string text;
    AnswerMode answer_mode = AnswerMode::Probability;
    int version = 1;
};

/// Template names shipped with the library.
inline constexpr std::string_view kContextA = "P-CONTEXT-A";
inline constexpr std::string_view kContextB = "P-CONTEXT-B";
inline constexpr std::string_view kMinimal = "P-MINIMAL";
inline constexpr std::string_view kDirect = "P-DIRECT";

/// Parses a template file: leading "# key: value" header lines (name,
/// answer, version) followed by the body.
PromptTemplate parse_template(std::string_view file_text);
PromptTemplate load_template(const std::filesystem::path& path);
/// One of the four packaged templates; ConfigError for unknown names.
const PromptTemplate& builtin_template(std::string_view name);

class MissingPlaceholderError : public Error {
public:
    explicit MissingPlaceholderError(std::string placeholder);
    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

/// Extra inputs for container-choice prompts.
struct DirectPromptExtras {
    std::optional<std::string> container_list;
    std::optional<std::string> room_distances;
};

/// Substitutes {target}, {container}, {room}, {house_description},
/// {example}, {container_list} and {room_distances}. "{{" and "}}" emit
/// literal braces. Throws MissingPlaceholderError for any placeholder the
/// inputs do not supply.
std::string render_prompt(const PromptTemplate& tmpl, const LikelihoodQuery& query,
                          const DirectPromptExtras& extras = {});

class UnparsableResponseError : public Error {
public:
    using Error::Error;
};

class NoMatchError : public Error {
public:
    using Error::Error;
};

/// Last number in [0, 1] in the text; "35%" reads as 0.35.
double parse_probability(std::string_view raw);

struct ChoiceCandidate {
    std::string id;
    std::string kind;
};

/// Returns the id of the candidate named in `raw`. Names are matched as
/// whole words, case-insensitively, against each candidate's id and kind;
/// a match lying inside a longer match is ignored. Several named
/// candidates resolve to the earliest one in `candidates`.
std::string parse_container_choice(std::string_view raw, const std::vector<ChoiceCandidate>& candidates);

/// Source of P_S values.
class ProbabilityProvider {
public:
    virtual ~ProbabilityProvider() = default;
    /// May throw; callers substitute kFallbackProbability.
    virtual double probability(const LikelihoodQuery& query) = 0;
};

struct PriorNoise {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Table lookup, optionally perturbed by clamp(p * exp(eps), 0, 1) with
/// eps ~ N(0, sigma^2) drawn from a stream keyed by (map, container, target).
double prior_likelihood(const PriorTable& prior, const LikelihoodQuery& query,
                        const std::optional<PriorNoise>& noise = std::nullopt);

class PriorProvider final : public ProbabilityProvider {
public:
    explicit PriorProvider(PriorTable prior, std::optional<PriorNoise> noise = std::nullopt)
        : prior_(std::move(prior)), noise_(noise)
    {
    }
    double probability(const LikelihoodQuery& query) override
    {
        return prior_likelihood(prior_, query, noise_);
    }

private:
    PriorTable prior_;
    std::optional<PriorNoise> noise_;
};

} // namespace objsearch
