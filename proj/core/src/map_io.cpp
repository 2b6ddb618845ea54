#include "objsearch/worldgen.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace objsearch {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open file '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write file '" + path.string() + "'");
    }
    out << text;
}

// Schema helpers: each takes the field path used in error messages.
const json& require(const json& obj, const std::string& key, const std::string& path)
{
    if (!obj.is_object()) {
        throw SchemaError(path.empty() ? "$" : path, "expected an object");
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(path.empty() ? key : path + "." + key, "missing required key");
    }
    return *it;
}

std::string as_string(const json& v, const std::string& path)
{
    if (!v.is_string()) {
        throw SchemaError(path, "expected a string");
    }
    return v.get<std::string>();
}

double as_number(const json& v, const std::string& path)
{
    if (!v.is_number()) {
        throw SchemaError(path, "expected a number");
    }
    return v.get<double>();
}

const json& as_array(const json& v, const std::string& path)
{
    if (!v.is_array()) {
        throw SchemaError(path, "expected an array");
    }
    return v;
}

Cell as_cell(const json& v, const std::string& path)
{
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        throw SchemaError(path, "expected [row, col] integer pair");
    }
    return {v[0].get<int>(), v[1].get<int>()};
}

json cell_json(const Cell& c)
{
    return json::array({c.row, c.col});
}

std::string indexed(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

json parse_document(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("$", std::string("malformed JSON: ") + e.what());
    }
}

} // namespace

std::string map_to_json(const MapInstance& m)
{
    json doc;
    doc["map_id"] = m.map_id;
    doc["resolution"] = m.grid.resolution();
    json rows = json::array();
    for (int r = 0; r < m.grid.height(); ++r) {
        std::string line(static_cast<std::size_t>(m.grid.width()), '#');
        for (int c = 0; c < m.grid.width(); ++c) {
            if (m.grid.is_free({r, c})) {
                line[static_cast<std::size_t>(c)] = '.';
            }
        }
        rows.push_back(std::move(line));
    }
    doc["grid"] = std::move(rows);
    doc["start"] = cell_json(m.start_pose);
    json rooms = json::array();
    for (const Room& room : m.rooms) {
        json cells = json::array();
        for (const Cell& c : room.cells) {
            cells.push_back(cell_json(c));
        }
        rooms.push_back({{"id", room.id}, {"kind", room.kind}, {"cells", std::move(cells)}});
    }
    doc["rooms"] = std::move(rooms);
    json containers = json::array();
    for (const Container& c : m.containers) {
        containers.push_back({{"id", c.id},
                              {"kind", c.kind},
                              {"room_id", c.room_id},
                              {"access_cell", cell_json(c.access_cell)},
                              {"contents", json(std::vector<std::string>(c.contents.begin(), c.contents.end()))}});
    }
    doc["containers"] = std::move(containers);
    doc["seed"] = m.generator_seed ? json(*m.generator_seed) : json(nullptr);
    return doc.dump(1) + "\n";
}

MapInstance map_from_json(const std::string& text)
{
    const json doc = parse_document(text);
    if (!doc.is_object()) {
        throw SchemaError("$", "map document must be an object");
    }
    MapInstance m;
    m.map_id = as_string(require(doc, "map_id", ""), "map_id");
    const double resolution = as_number(require(doc, "resolution", ""), "resolution");

    const json& rows = as_array(require(doc, "grid", ""), "grid");
    if (rows.empty()) {
        throw InvariantError("grid must have at least one row");
    }
    std::vector<std::string> lines;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        lines.push_back(as_string(rows[r], indexed("grid", r)));
    }
    const std::size_t width = lines.front().size();
    if (width == 0) {
        throw InvariantError("grid must have at least one column");
    }
    if (!(resolution > 0.0)) {
        throw InvariantError("grid resolution must be positive");
    }
    m.grid = GridMap(static_cast<int>(width), static_cast<int>(lines.size()), resolution);
    for (std::size_t r = 0; r < lines.size(); ++r) {
        if (lines[r].size() != width) {
            throw SchemaError(indexed("grid", r), "row length differs from row 0");
        }
        for (std::size_t c = 0; c < width; ++c) {
            const char ch = lines[r][c];
            if (ch != '.' && ch != '#') {
                throw SchemaError(indexed("grid", r), std::string("unexpected cell character '") + ch + "'");
            }
            m.grid.set({static_cast<int>(r), static_cast<int>(c)},
                       ch == '.' ? Occupancy::Free : Occupancy::Obstacle);
        }
    }

    m.start_pose = as_cell(require(doc, "start", ""), "start");

    const json& rooms = as_array(require(doc, "rooms", ""), "rooms");
    for (std::size_t i = 0; i < rooms.size(); ++i) {
        const std::string path = indexed("rooms", i);
        Room room;
        room.id = as_string(require(rooms[i], "id", path), path + ".id");
        room.kind = as_string(require(rooms[i], "kind", path), path + ".kind");
        const json& cells = as_array(require(rooms[i], "cells", path), path + ".cells");
        for (std::size_t k = 0; k < cells.size(); ++k) {
            room.cells.push_back(as_cell(cells[k], indexed(path + ".cells", k)));
        }
        m.rooms.push_back(std::move(room));
    }

    const json& containers = as_array(require(doc, "containers", ""), "containers");
    for (std::size_t i = 0; i < containers.size(); ++i) {
        const std::string path = indexed("containers", i);
        Container c;
        c.id = as_string(require(containers[i], "id", path), path + ".id");
        c.kind = as_string(require(containers[i], "kind", path), path + ".kind");
        c.room_id = as_string(require(containers[i], "room_id", path), path + ".room_id");
        c.access_cell = as_cell(require(containers[i], "access_cell", path), path + ".access_cell");
        const json& contents = as_array(require(containers[i], "contents", path), path + ".contents");
        for (std::size_t k = 0; k < contents.size(); ++k) {
            c.contents.insert(as_string(contents[k], indexed(path + ".contents", k)));
        }
        m.object_catalog.insert(c.contents.begin(), c.contents.end());
        m.containers.push_back(std::move(c));
    }

    const json& seed = require(doc, "seed", "");
    if (seed.is_null()) {
        m.generator_seed.reset();
    } else if (seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
        m.generator_seed = seed.get<std::uint64_t>();
    } else {
        throw SchemaError("seed", "expected a non-negative integer or null");
    }

    check_invariants(m);
    return m;
}

void save_map(const MapInstance& instance, const std::filesystem::path& path)
{
    write_text_file(path, map_to_json(instance));
}

MapInstance load_map(const std::filesystem::path& path)
{
    return map_from_json(read_text_file(path));
}

std::string prior_to_json(const PriorTable& prior)
{
    json entries = json::array();
    for (const auto& [key, p] : prior.entries()) {
        entries.push_back({{"object", std::get<0>(key)},
                           {"container_kind", std::get<1>(key)},
                           {"room_kind", std::get<2>(key)},
                           {"p", p}});
    }
    json doc = {{"default", prior.default_probability()}, {"entries", std::move(entries)}};
    return doc.dump(1) + "\n";
}

PriorTable prior_from_json(const std::string& text)
{
    const json doc = parse_document(text);
    // Accepts {"default": p, "entries": [...]} or a bare entry array (default 0).
    const json* entries = nullptr;
    double fallback = 0.0;
    if (doc.is_array()) {
        entries = &doc;
    } else if (doc.is_object()) {
        fallback = as_number(require(doc, "default", ""), "default");
        entries = &as_array(require(doc, "entries", ""), "entries");
    } else {
        throw SchemaError("$", "prior table must be an object or an array");
    }
    if (!(fallback >= 0.0 && fallback <= 1.0)) {
        throw InvariantError("prior default must lie in [0, 1]");
    }
    PriorTable table(fallback);
    for (std::size_t i = 0; i < entries->size(); ++i) {
        const std::string path = indexed("entries", i);
        const json& e = (*entries)[i];
        table.set(as_string(require(e, "object", path), path + ".object"),
                  as_string(require(e, "container_kind", path), path + ".container_kind"),
                  as_string(require(e, "room_kind", path), path + ".room_kind"),
                  as_number(require(e, "p", path), path + ".p"));
    }
    return table;
}

PriorTable load_prior(const std::filesystem::path& path)
{
    return prior_from_json(read_text_file(path));
}

GenerationConfig generation_config_from_json(const std::string& text)
{
    const json doc = parse_document(text);
    if (!doc.is_object()) {
        throw SchemaError("$", "generation config must be an object");
    }
    GenerationConfig config;
    auto read_range = [&](const char* key, int& lo, int& hi) {
        auto it = doc.find(key);
        if (it == doc.end()) {
            return;
        }
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
            !(*it)[1].is_number_integer()) {
            throw SchemaError(key, "expected [min, max] integer pair");
        }
        lo = (*it)[0].get<int>();
        hi = (*it)[1].get<int>();
    };
    read_range("rooms", config.min_rooms, config.max_rooms);
    read_range("containers_per_room", config.min_containers_per_room, config.max_containers_per_room);
    read_range("objects", config.min_objects, config.max_objects);
    if (auto it = doc.find("width"); it != doc.end()) {
        config.width = it->get<int>();
    }
    if (auto it = doc.find("height"); it != doc.end()) {
        config.height = it->get<int>();
    }
    if (auto it = doc.find("resolution"); it != doc.end()) {
        config.resolution = as_number(*it, "resolution");
    }
    return config;
}

} // namespace objsearch
