#include "objsearch/worldgen.hpp"

#include "embedded.hpp"

#include <algorithm>
#include <numeric>

namespace objsearch {

GridMap::GridMap(int width, int height, double resolution, Occupancy fill)
    : width_(width), height_(height), resolution_(resolution),
      cells_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), fill)
{
    if (width < 1 || height < 1) {
        throw InvariantError("grid dimensions must be at least 1x1");
    }
    if (!(resolution > 0.0)) {
        throw InvariantError("grid resolution must be positive");
    }
}

void GridMap::set(Cell c, Occupancy value)
{
    if (!in_bounds(c)) {
        throw PreconditionError("cell " + to_string(c) + " is outside the grid");
    }
    cells_[index(c)] = value;
}

const Room* MapInstance::find_room(const std::string& id) const
{
    auto it = std::find_if(rooms.begin(), rooms.end(), [&](const Room& r) { return r.id == id; });
    return it == rooms.end() ? nullptr : &*it;
}

const Container* MapInstance::find_container(const std::string& id) const
{
    auto it = std::find_if(containers.begin(), containers.end(),
                           [&](const Container& c) { return c.id == id; });
    return it == containers.end() ? nullptr : &*it;
}

PriorTable::PriorTable(double default_probability) : default_(default_probability)
{
    if (!(default_probability >= 0.0 && default_probability <= 1.0)) {
        throw InvariantError("prior default must lie in [0, 1]");
    }
}

void PriorTable::set(const std::string& object, const std::string& container_kind,
                     const std::string& room_kind, double p)
{
    if (!(p >= 0.0 && p <= 1.0)) {
        throw InvariantError("prior entry (" + object + ", " + container_kind + ", " + room_kind +
                             ") must lie in [0, 1]");
    }
    entries_[Key{object, container_kind, room_kind}] = p;
}

double PriorTable::lookup(const std::string& object, const std::string& container_kind,
                          const std::string& room_kind) const
{
    auto it = entries_.find(Key{object, container_kind, room_kind});
    return it == entries_.end() ? default_ : it->second;
}

std::vector<std::string> PriorTable::objects() const
{
    std::set<std::string> names;
    for (const auto& [key, p] : entries_) {
        names.insert(std::get<0>(key));
    }
    return {names.begin(), names.end()};
}

const std::map<std::string, std::vector<std::string>>& room_palettes()
{
    static const std::map<std::string, std::vector<std::string>> palettes = {
        {"kitchen", {"fridge", "countertop", "cabinet", "sink", "table", "shelf"}},
        {"living room", {"sofa", "table", "bookshelf", "cabinet", "shelf"}},
        {"bedroom", {"bed", "dresser", "nightstand", "desk", "bookshelf"}},
        {"bathroom", {"sink", "cabinet", "shelf", "bathtub"}},
        {"dining room", {"table", "cabinet", "countertop", "shelf"}},
    };
    return palettes;
}

const PriorTable& builtin_prior()
{
    static const PriorTable table = [] {
        auto text = detail::embedded_resource("prior_household.json");
        if (!text) {
            throw Error("packaged prior table is missing");
        }
        return prior_from_json(std::string(*text));
    }();
    return table;
}

namespace {

constexpr int kMinRoomSide = 4;

struct Rect {
    int row0, col0, rows, cols; // interior cells, inclusive origin

    int area() const { return rows * cols; }
    bool contains(Cell c) const
    {
        return c.row >= row0 && c.row < row0 + rows && c.col >= col0 && c.col < col0 + cols;
    }
};

struct Wall {
    bool horizontal; // true: a row of wall cells
    int line;        // row (horizontal) or col (vertical)
    int begin, end;  // span along the wall, [begin, end)
};

bool splittable(const Rect& r)
{
    return std::max(r.rows, r.cols) >= 2 * kMinRoomSide + 1;
}

// Partition `interior` into `count` rectangles separated by one-cell walls.
std::pair<std::vector<Rect>, std::vector<Wall>> partition(const Rect& interior, int count, Rng& rng)
{
    std::vector<Rect> leaves{interior};
    std::vector<Wall> walls;
    while (static_cast<int>(leaves.size()) < count) {
        int pick = -1;
        for (int i = 0; i < static_cast<int>(leaves.size()); ++i) {
            if (splittable(leaves[i]) && (pick < 0 || leaves[i].area() > leaves[pick].area())) {
                pick = i;
            }
        }
        if (pick < 0) {
            throw InfeasibleConfigError("cannot fit " + std::to_string(count) + " rooms into a " +
                                        std::to_string(interior.cols + 2) + "x" +
                                        std::to_string(interior.rows + 2) + " grid");
        }
        const Rect r = leaves[pick];
        const bool split_rows = r.rows > r.cols || (r.rows == r.cols && rng.uniform_index(2) == 0);
        const int extent = split_rows ? r.rows : r.cols;
        // Wall offset w: first part has w cells, wall at w, second part extent-w-1 cells.
        const int offset = rng.uniform_int(kMinRoomSide, extent - kMinRoomSide - 1);
        Rect a = r;
        Rect b = r;
        if (split_rows) {
            a.rows = offset;
            b.row0 = r.row0 + offset + 1;
            b.rows = r.rows - offset - 1;
            walls.push_back({true, r.row0 + offset, r.col0, r.col0 + r.cols});
        } else {
            a.cols = offset;
            b.col0 = r.col0 + offset + 1;
            b.cols = r.cols - offset - 1;
            walls.push_back({false, r.col0 + offset, r.row0, r.row0 + r.rows});
        }
        leaves[pick] = a;
        leaves.insert(leaves.begin() + pick + 1, b);
    }
    return {leaves, walls};
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng.uniform_index(i)]);
    }
}

void validate_config(const GenerationConfig& config)
{
    auto range_ok = [](int lo, int hi) { return lo >= 1 && lo <= hi; };
    if (!range_ok(config.min_rooms, config.max_rooms)) {
        throw ConfigError("room-count range must be nonempty and positive");
    }
    if (!range_ok(config.min_containers_per_room, config.max_containers_per_room)) {
        throw ConfigError("containers-per-room range must be nonempty and positive");
    }
    if (!range_ok(config.min_objects, config.max_objects)) {
        throw ConfigError("object-count range must be nonempty and positive");
    }
    if (config.width < 20 || config.height < 20) {
        throw InfeasibleConfigError("grid must be at least 20x20 cells");
    }
    if (!(config.resolution > 0.0)) {
        throw ConfigError("resolution must be positive");
    }
}

} // namespace

MapInstance generate_map(std::uint64_t seed, const GenerationConfig& config, const PriorTable& prior)
{
    validate_config(config);
    Rng rng(seed);

    MapInstance map;
    map.map_id = "gen-" + std::to_string(seed);
    map.generator_seed = seed;
    map.grid = GridMap(config.width, config.height, config.resolution);

    const int room_count = rng.uniform_int(config.min_rooms, config.max_rooms);
    const Rect interior{1, 1, config.height - 2, config.width - 2};
    auto [rects, walls] = partition(interior, room_count, rng);

    for (const Rect& r : rects) {
        for (int row = r.row0; row < r.row0 + r.rows; ++row) {
            for (int col = r.col0; col < r.col0 + r.cols; ++col) {
                map.grid.set({row, col}, Occupancy::Free);
            }
        }
    }

    // Walls are processed parent-first, so both sides of a door candidate are
    // still plain room cells when it is chosen.
    std::set<Cell> doors;
    for (const Wall& w : walls) {
        std::vector<Cell> candidates;
        for (int t = w.begin; t < w.end; ++t) {
            const Cell cell = w.horizontal ? Cell{w.line, t} : Cell{t, w.line};
            const Cell side_a = w.horizontal ? Cell{w.line - 1, t} : Cell{t, w.line - 1};
            const Cell side_b = w.horizontal ? Cell{w.line + 1, t} : Cell{t, w.line + 1};
            if (map.grid.is_free(side_a) && map.grid.is_free(side_b) && !doors.contains(side_a) &&
                !doors.contains(side_b)) {
                candidates.push_back(cell);
            }
        }
        if (candidates.empty()) {
            throw InfeasibleConfigError("no door position on a partition wall");
        }
        const Cell door = candidates[rng.uniform_index(candidates.size())];
        map.grid.set(door, Occupancy::Free);
        doors.insert(door);
    }

    static const std::vector<std::string> canonical = {"kitchen", "living room", "bedroom",
                                                       "bathroom", "dining room"};
    std::vector<std::string> kinds;
    for (int i = 0; i < room_count; ++i) {
        if (i < static_cast<int>(canonical.size())) {
            kinds.push_back(canonical[static_cast<std::size_t>(i)]);
        } else {
            kinds.push_back(rng.uniform_index(2) == 0 ? "bedroom" : "bathroom");
        }
    }
    shuffle(kinds, rng);

    std::set<Cell> used;
    int container_serial = 0;
    for (int i = 0; i < room_count; ++i) {
        const Rect& r = rects[static_cast<std::size_t>(i)];
        Room room;
        room.id = "room_" + std::to_string(i);
        room.kind = kinds[static_cast<std::size_t>(i)];
        for (int row = r.row0; row < r.row0 + r.rows; ++row) {
            for (int col = r.col0; col < r.col0 + r.cols; ++col) {
                room.cells.push_back({row, col});
            }
        }

        // Wall-hugging cells not touching a door.
        std::vector<Cell> wall_cells;
        for (const Cell& c : room.cells) {
            bool touches_wall = false;
            bool touches_door = false;
            for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
                const Cell n{c.row + dr, c.col + dc};
                touches_wall |= !map.grid.is_free(n);
                touches_door |= doors.contains(n);
            }
            if (touches_wall && !touches_door) {
                wall_cells.push_back(c);
            }
        }
        shuffle(wall_cells, rng);

        std::vector<std::string> palette = room_palettes().at(room.kind);
        shuffle(palette, rng);
        const int wanted = rng.uniform_int(config.min_containers_per_room, config.max_containers_per_room);
        const int count = std::min<int>(wanted, static_cast<int>(wall_cells.size()));
        for (int j = 0; j < count; ++j) {
            Container container;
            container.kind = palette[static_cast<std::size_t>(j) % palette.size()];
            container.id = container.kind + "_" + std::to_string(container_serial++);
            container.room_id = room.id;
            container.access_cell = wall_cells[static_cast<std::size_t>(j)];
            used.insert(container.access_cell);
            map.containers.push_back(std::move(container));
        }
        map.rooms.push_back(std::move(room));
    }

    {
        std::vector<Cell> start_options;
        for (const Room& room : map.rooms) {
            for (const Cell& c : room.cells) {
                if (!used.contains(c)) {
                    start_options.push_back(c);
                }
            }
        }
        map.start_pose = start_options[rng.uniform_index(start_options.size())];
    }

    // Objects: each drawn once, placed by prior-weighted container sampling.
    std::vector<std::string> vocabulary = prior.objects();
    if (vocabulary.empty()) {
        throw ConfigError("prior table lists no objects");
    }
    shuffle(vocabulary, rng);
    const int object_count = std::min<int>(rng.uniform_int(config.min_objects, config.max_objects),
                                           static_cast<int>(vocabulary.size()));
    for (int i = 0; i < object_count; ++i) {
        const std::string& object = vocabulary[static_cast<std::size_t>(i)];
        std::vector<double> weights;
        double total = 0.0;
        for (const Container& c : map.containers) {
            const double w = prior.lookup(object, c.kind, map.find_room(c.room_id)->kind);
            weights.push_back(w);
            total += w;
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double u = rng.uniform01() * total;
            double acc = 0.0;
            chosen = weights.size() - 1;
            for (std::size_t k = 0; k < weights.size(); ++k) {
                acc += weights[k];
                if (u < acc) {
                    chosen = k;
                    break;
                }
            }
        } else {
            chosen = rng.uniform_index(map.containers.size());
        }
        map.containers[chosen].contents.insert(object);
        map.object_catalog.insert(object);
    }

    check_invariants(map);
    return map;
}

std::string sample_task(const MapInstance& instance, std::uint64_t seed)
{
    if (instance.object_catalog.empty()) {
        throw PreconditionError("map '" + instance.map_id + "' has an empty object catalog");
    }
    Rng rng(seed);
    auto it = instance.object_catalog.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng.uniform_index(instance.object_catalog.size())));
    return *it;
}

void check_invariants(const MapInstance& m)
{
    const GridMap& g = m.grid;
    if (g.width() < 1 || g.height() < 1) {
        throw InvariantError("grid dimensions must be at least 1x1");
    }
    if (!(g.resolution() > 0.0)) {
        throw InvariantError("grid resolution must be positive");
    }
    if (!g.is_free(m.start_pose)) {
        throw InvariantError("start pose " + to_string(m.start_pose) + " is not a free cell");
    }

    std::map<Cell, std::string> owner;
    std::set<std::string> room_ids;
    for (const Room& room : m.rooms) {
        if (!room_ids.insert(room.id).second) {
            throw InvariantError("duplicate room id '" + room.id + "'");
        }
        for (const Cell& c : room.cells) {
            if (!g.in_bounds(c)) {
                throw InvariantError("room '" + room.id + "' cell " + to_string(c) + " is outside the grid");
            }
            auto [it, inserted] = owner.emplace(c, room.id);
            if (!inserted && it->second != room.id) {
                throw InvariantError("rooms '" + it->second + "' and '" + room.id + "' overlap at " +
                                     to_string(c));
            }
        }
    }

    std::set<std::string> container_ids;
    std::set<std::string> present;
    for (const Container& c : m.containers) {
        if (!container_ids.insert(c.id).second) {
            throw InvariantError("duplicate container id '" + c.id + "'");
        }
        if (!g.is_free(c.access_cell)) {
            throw InvariantError("container '" + c.id + "' access cell " + to_string(c.access_cell) +
                                 " is not a free cell");
        }
        if (!room_ids.contains(c.room_id)) {
            throw InvariantError("container '" + c.id + "' references unknown room '" + c.room_id + "'");
        }
        auto it = owner.find(c.access_cell);
        if (it == owner.end() || it->second != c.room_id) {
            throw InvariantError("container '" + c.id + "' access cell " + to_string(c.access_cell) +
                                 " is not inside room '" + c.room_id + "'");
        }
        present.insert(c.contents.begin(), c.contents.end());
    }
    for (const std::string& object : m.object_catalog) {
        if (!present.contains(object)) {
            throw InvariantError("catalog object '" + object + "' is in no container");
        }
    }
}

} // namespace objsearch
