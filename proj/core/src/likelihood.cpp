#include "objsearch/likelihood.hpp"

#include "embedded.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace objsearch {

std::string HouseDescription::render() const
{
    std::ostringstream out;
    for (std::size_t i = 0; i < rooms.size(); ++i) {
        const RoomSummary& r = rooms[i];
        out << "- " << r.kind << " (" << r.room_id << "): ";
        if (r.container_kinds.empty()) {
            out << "no containers";
        }
        for (std::size_t k = 0; k < r.container_kinds.size(); ++k) {
            out << (k ? ", " : "") << r.container_kinds[k];
        }
        if (i + 1 < rooms.size()) {
            out << '\n';
        }
    }
    return out.str();
}

HouseDescription describe_house(const MapInstance& instance)
{
    HouseDescription house;
    for (const Room& room : instance.rooms) {
        RoomSummary summary{room.id, room.kind, {}};
        for (const Container& c : instance.containers) {
            if (c.room_id == room.id) {
                summary.container_kinds.push_back(c.kind);
            }
        }
        house.rooms.push_back(std::move(summary));
    }
    return house;
}

// Templates -------------------------------------------------------------------

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

constexpr std::string_view kProbabilityExample =
    "Question: What is the probability of finding a toothbrush in the sink located in the bathroom?\n"
    "Answer: 0.8";

constexpr std::string_view kChoiceExample =
    "The robot is looking for a pillow. Unsearched containers: fridge_1 (fridge in the kitchen), "
    "bed_4 (bed in the bedroom), sofa_2 (sofa in the living room).\n"
    "Answer: bed_4";

} // namespace

PromptTemplate parse_template(std::string_view file_text)
{
    PromptTemplate tmpl;
    std::size_t pos = 0;
    bool saw_mode = false;
    while (pos < file_text.size() && file_text.substr(pos, 2) == "# ") {
        std::size_t eol = file_text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = file_text.size();
        }
        const std::string_view line = file_text.substr(pos + 2, eol - pos - 2);
        const auto colon = line.find(':');
        if (colon != std::string_view::npos) {
            const std::string key = trim(line.substr(0, colon));
            const std::string value = trim(line.substr(colon + 1));
            if (key == "name") {
                tmpl.name = value;
            } else if (key == "answer") {
                if (value == "probability") {
                    tmpl.answer_mode = AnswerMode::Probability;
                } else if (value == "container-choice") {
                    tmpl.answer_mode = AnswerMode::ContainerChoice;
                } else {
                    throw ConfigError("template answer mode '" + value + "' is not recognised");
                }
                saw_mode = true;
            } else if (key == "version") {
                tmpl.version = std::stoi(value);
            }
        }
        pos = eol + 1;
    }
    if (tmpl.name.empty()) {
        throw ConfigError("template header is missing '# name:'");
    }
    if (!saw_mode) {
        throw ConfigError("template '" + tmpl.name + "' header is missing '# answer:'");
    }
    tmpl.text = trim(file_text.substr(std::min(pos, file_text.size())));
    return tmpl;
}

PromptTemplate load_template(const std::filesystem::path& path)
{
    return parse_template(read_text_file(path));
}

const PromptTemplate& builtin_template(std::string_view name)
{
    static const std::vector<PromptTemplate> templates = [] {
        std::vector<PromptTemplate> out;
        for (const char* file : {"templates/p_context_a.txt", "templates/p_context_b.txt",
                                 "templates/p_minimal.txt", "templates/p_direct.txt"}) {
            auto text = detail::embedded_resource(file);
            if (!text) {
                throw Error(std::string("packaged template missing: ") + file);
            }
            out.push_back(parse_template(*text));
        }
        return out;
    }();
    for (const PromptTemplate& t : templates) {
        if (t.name == name) {
            return t;
        }
    }
    throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

MissingPlaceholderError::MissingPlaceholderError(std::string placeholder)
    : Error("prompt placeholder {" + placeholder + "} has no value"), placeholder_(std::move(placeholder))
{
}

std::string render_prompt(const PromptTemplate& tmpl, const LikelihoodQuery& query,
                          const DirectPromptExtras& extras)
{
    auto value_of = [&](const std::string& name) -> std::optional<std::string> {
        auto nonempty = [](std::string s) -> std::optional<std::string> {
            if (s.empty()) {
                return std::nullopt;
            }
            return s;
        };
        if (name == "target") return nonempty(query.target);
        if (name == "container") return nonempty(query.container_kind);
        if (name == "room") return nonempty(query.room_kind);
        if (name == "house_description") {
            if (query.house.rooms.empty()) {
                return std::nullopt;
            }
            return query.house.render();
        }
        if (name == "example") {
            return std::string(tmpl.answer_mode == AnswerMode::Probability ? kProbabilityExample
                                                                           : kChoiceExample);
        }
        if (name == "container_list") return extras.container_list;
        if (name == "room_distances") return extras.room_distances;
        return std::nullopt;
    };

    const std::string& text = tmpl.text;
    std::string out;
    out.reserve(text.size() + 256);
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out += '{';
            ++i;
        } else if (ch == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out += '}';
            ++i;
        } else if (ch == '{') {
            const std::size_t close = text.find('}', i);
            if (close == std::string::npos) {
                throw ConfigError("template '" + tmpl.name + "' has an unterminated placeholder");
            }
            const std::string name = text.substr(i + 1, close - i - 1);
            auto value = value_of(name);
            if (!value) {
                throw MissingPlaceholderError(name);
            }
            out += *value;
            i = close;
        } else {
            out += ch;
        }
    }
    return out;
}

// Parsing ---------------------------------------------------------------------

namespace {

bool is_word_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

double parse_probability(std::string_view raw)
{
    std::optional<double> last;
    const std::size_t n = raw.size();
    auto digit = [&](std::size_t i) { return i < n && std::isdigit(static_cast<unsigned char>(raw[i])); };

    std::size_t i = 0;
    while (i < n) {
        const bool leading_dot = raw[i] == '.' && digit(i + 1) && (i == 0 || !digit(i - 1));
        if (!digit(i) && !leading_dot) {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        // Numbers glued to identifiers ("fridge_0", "gpt5") are not answers.
        const bool in_identifier =
            begin > 0 && (std::isalpha(static_cast<unsigned char>(raw[begin - 1])) || raw[begin - 1] == '_');
        const bool negative = begin > 0 && raw[begin - 1] == '-' &&
                              (begin < 2 || !is_word_char(raw[begin - 2]));
        while (digit(i)) ++i;
        if (i < n && raw[i] == '.' && digit(i + 1)) {
            ++i;
            while (digit(i)) ++i;
        }
        if (i < n && (raw[i] == 'e' || raw[i] == 'E')) {
            std::size_t j = i + 1;
            if (j < n && (raw[j] == '+' || raw[j] == '-')) ++j;
            if (digit(j)) {
                i = j;
                while (digit(i)) ++i;
            }
        }
        const std::size_t end = i;
        if (end < n && std::isalpha(static_cast<unsigned char>(raw[end])) && raw[end] != 'e' &&
            raw[end] != 'E') {
            // "5th", "3d" and similar.
            continue;
        }

        std::size_t k = end;
        while (k < n && raw[k] == ' ') ++k;
        bool percent = false;
        if (k < n && raw[k] == '%') {
            percent = true;
        } else if (lower(raw.substr(k, 7)) == "percent") {
            percent = true;
        }

        if (in_identifier) {
            continue;
        }
        double value = 0.0;
        const std::string token(raw.substr(begin, end - begin));
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size()) {
            continue;
        }
        if (negative) value = -value;
        if (percent) value /= 100.0;
        if (value >= 0.0 && value <= 1.0) {
            last = value;
        }
    }
    if (!last) {
        throw UnparsableResponseError("no probability in [0, 1] found in response");
    }
    return *last;
}

std::string parse_container_choice(std::string_view raw, const std::vector<ChoiceCandidate>& candidates)
{
    if (candidates.empty()) {
        throw PreconditionError("parse_container_choice needs at least one candidate");
    }
    const std::string text = lower(raw);

    struct Occurrence {
        std::size_t begin, end, candidate;
    };
    std::vector<Occurrence> found;
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        std::vector<std::string> terms;
        for (const std::string& name : {candidates[ci].id, candidates[ci].kind}) {
            if (name.empty()) continue;
            std::string t = lower(name);
            terms.push_back(t);
            std::replace(t.begin(), t.end(), '_', ' ');
            terms.push_back(t);
        }
        std::sort(terms.begin(), terms.end());
        terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
        for (const std::string& term : terms) {
            for (std::size_t pos = text.find(term); pos != std::string::npos; pos = text.find(term, pos + 1)) {
                const std::size_t end = pos + term.size();
                const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
                const bool right_ok = end >= text.size() || !is_word_char(text[end]);
                if (left_ok && right_ok) {
                    found.push_back({pos, end, ci});
                }
            }
        }
    }

    std::vector<bool> named(candidates.size(), false);
    for (const Occurrence& o : found) {
        const bool covered = std::any_of(found.begin(), found.end(), [&](const Occurrence& other) {
            return other.begin <= o.begin && other.end >= o.end && (other.end - other.begin) > (o.end - o.begin);
        });
        if (!covered) {
            named[o.candidate] = true;
        }
    }
    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        if (named[ci]) {
            return candidates[ci].id;
        }
    }
    throw NoMatchError("response names none of the candidate containers");
}

double prior_likelihood(const PriorTable& prior, const LikelihoodQuery& query,
                        const std::optional<PriorNoise>& noise)
{
    const double p = prior.lookup(query.target, query.container_kind, query.room_kind);
    if (!noise || noise->sigma <= 0.0) {
        return p;
    }
    std::string key = query.map_id;
    key += '\x1f';
    key += query.container_id;
    key += '\x1f';
    key += query.target;
    Rng rng(mix_seed(noise->seed, stable_hash(key)));
    const double eps = rng.normal(0.0, noise->sigma);
    return std::clamp(p * std::exp(eps), 0.0, 1.0);
}

} // namespace objsearch
