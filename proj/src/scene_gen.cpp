#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xenav/errors.hpp"
#include "xenav/rng.hpp"
#include "xenav/scene.hpp"

namespace xenav {

std::vector<CategorySpec> SceneParams::default_categories()
{
    using K = TemplateKind;
    return {
        {"apple", {{K::block, 0.10, 0.10, 0.0, 0.10}}, {}},
        {"bed",
         {{K::block, 1.6, 2.0, 0.0, 0.45}, {K::table, 1.6, 2.0, 0.25, 0.45}},
         {{K::block, 1.6, 2.0, 0.0, 0.45}}},
        {"chair", {{K::block, 0.5, 0.5, 0.0, 0.9}}, {}},
        {"houseplant", {{K::block, 0.4, 0.4, 0.0, 0.9}}, {}},
        {"sofa", {{K::block, 2.0, 0.9, 0.0, 0.85}}, {}},
        {"television", {{K::block, 1.0, 0.2, 0.5, 1.1}}, {{K::block, 1.0, 0.2, 0.0, 0.6}}},
        {"vase", {{K::block, 0.2, 0.2, 0.0, 0.45}}, {}},
        {"toilet", {{K::block, 0.4, 0.7, 0.0, 0.75}}, {}},
        {"trashcan", {{K::block, 0.3, 0.3, 0.0, 0.6}}, {}},
        {"mug", {{K::block, 0.10, 0.10, 0.0, 0.12}}, {}},
        {"table", {{K::table, 1.2, 0.8, 0.6, 0.75}}, {}},
        {"shelf", {{K::block, 1.0, 0.4, 0.0, 1.8}}, {}},
    };
}

std::vector<std::string> SceneParams::default_target_categories()
{
    return {"apple", "bed", "chair", "houseplant", "sofa", "television", "vase", "toilet", "trashcan", "mug"};
}

const CategorySpec* SceneParams::find_category(std::string_view name) const
{
    for (const auto& c : categories) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

void check_params(const SceneParams& p)
{
    const auto fail = [](const std::string& m) { throw ValidationError("scene params: " + m); };
    if (!(p.cell_size > 0.0)) {
        fail("cell_size must be positive");
    }
    if (p.rooms_x < 1 || p.rooms_z < 1) {
        fail("room grid must be at least 1x1");
    }
    if (!(p.room_size.lo > 0.0 && p.room_size.lo <= p.room_size.hi)) {
        fail("room_size range invalid");
    }
    if (!(p.doorway_width.lo <= p.doorway_width.hi) || p.doorway_width.lo < 2.0 * p.cell_size) {
        fail("doorway width must be at least two cells");
    }
    if (p.doorway_width.hi + 0.6 + 2.0 * p.wall_thickness > p.room_size.lo) {
        fail("doorways do not fit in the smallest room");
    }
    if (!(p.wall_thickness >= p.cell_size) || !(p.wall_height > 0.0)) {
        fail("walls must be at least one cell thick and have positive height");
    }
    if (!(p.furniture_density >= 0.0 && p.furniture_density <= 1.0)) {
        fail("furniture_density must lie in [0, 1]");
    }
    for (const auto& c : p.categories) {
        if (c.templates.empty()) {
            fail("category '" + c.name + "' has no shape template");
        }
        for (const auto& t : c.templates) {
            if (!(t.size_x > 0.0 && t.size_z > 0.0 && t.y1 > t.y0 && t.y0 >= 0.0)) {
                fail("category '" + c.name + "' has a degenerate template");
            }
        }
    }
    for (const auto& name : p.target_categories) {
        if (p.find_category(name) == nullptr) {
            fail("target category '" + name + "' has no template");
        }
    }
    if (p.max_retries < 1) {
        fail("max_retries must be at least 1");
    }
}

namespace {

// Integer cell rectangle [x0, x1) x [z0, z1).
struct CellRect
{
    int x0, z0, x1, z1;
    int area() const { return std::max(0, x1 - x0) * std::max(0, z1 - z0); }
    bool overlaps(const CellRect& o) const { return x0 < o.x1 && o.x0 < x1 && z0 < o.z1 && o.z0 < z1; }
    CellRect grown(int m) const { return {x0 - m, z0 - m, x1 + m, z1 + m}; }
};

struct Placed
{
    std::string category;
    ShapeTemplate shape;
    CellRect cells;
};

class Attempt
{
public:
    Attempt(const SceneParams& p, std::uint64_t seed) : p_(p), rng_(seed), cs_(p.cell_size) {}

    // Returns a failure reason, or nullopt with the scene written to `out`.
    std::optional<std::string> run(std::uint64_t scene_seed, Scene& out)
    {
        layout_rooms();
        if (auto err = cut_doors()) {
            return err;
        }
        lowest_.assign(static_cast<std::size_t>(nx_) * nz_, std::numeric_limits<float>::infinity());
        for (int iz = 0; iz < nz_; ++iz) {
            for (int ix = 0; ix < nx_; ++ix) {
                if (wall_[idx(ix, iz)]) {
                    lowest_[idx(ix, iz)] = 0.0F;
                }
            }
        }
        for (const auto& name : p_.target_categories) {
            if (!place_target(name)) {
                return "could not place target category '" + name + "' while keeping free space connected";
            }
        }
        for (std::size_t r = 0; r < rooms_.size(); ++r) {
            if (!fill_room(r)) {
                std::ostringstream os;
                os << "furniture density " << p_.furniture_density << " unreachable in room " << r
                   << " while keeping free space connected";
                return os.str();
            }
        }
        out = assemble(scene_seed);
        return std::nullopt;
    }

private:
    std::size_t idx(int ix, int iz) const
    {
        return static_cast<std::size_t>(iz) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(ix);
    }

    int cells(double meters) const { return std::max(1, static_cast<int>(std::lround(meters / cs_))); }

    void layout_rooms()
    {
        tc_ = cells(p_.wall_thickness);
        xb_.assign(1, 0);
        for (int i = 0; i < p_.rooms_x; ++i) {
            xb_.push_back(xb_.back() + cells(rng_.uniform(p_.room_size.lo, p_.room_size.hi)));
        }
        zb_.assign(1, 0);
        for (int j = 0; j < p_.rooms_z; ++j) {
            zb_.push_back(zb_.back() + cells(rng_.uniform(p_.room_size.lo, p_.room_size.hi)));
        }
        nx_ = xb_.back();
        nz_ = zb_.back();
        wall_.assign(static_cast<std::size_t>(nx_) * nz_, 0);
        const int half = tc_ / 2;
        for (int iz = 0; iz < nz_; ++iz) {
            for (int ix = 0; ix < nx_; ++ix) {
                bool w = ix < tc_ || iz < tc_ || ix >= nx_ - tc_ || iz >= nz_ - tc_;
                for (std::size_t k = 1; k + 1 < xb_.size(); ++k) {
                    w = w || (ix >= xb_[k] - half && ix < xb_[k] - half + tc_);
                }
                for (std::size_t k = 1; k + 1 < zb_.size(); ++k) {
                    w = w || (iz >= zb_[k] - half && iz < zb_[k] - half + tc_);
                }
                wall_[idx(ix, iz)] = w ? 1 : 0;
            }
        }
        rooms_.clear();
        for (int j = 0; j < p_.rooms_z; ++j) {
            for (int i = 0; i < p_.rooms_x; ++i) {
                const int x0 = i == 0 ? tc_ : xb_[i] - half + tc_;
                const int x1 = i + 1 == p_.rooms_x ? nx_ - tc_ : xb_[i + 1] - half;
                const int z0 = j == 0 ? tc_ : zb_[j] - half + tc_;
                const int z1 = j + 1 == p_.rooms_z ? nz_ - tc_ : zb_[j + 1] - half;
                rooms_.push_back({x0, z0, x1, z1});
            }
        }
    }

    std::optional<std::string> cut_doors()
    {
        const int half = tc_ / 2;
        const int margin = cells(0.3);
        const int keep = cells(0.4);
        const auto door_span = [&](int lo, int hi, int& start, int& width) -> bool {
            width = cells(rng_.uniform(p_.doorway_width.lo, p_.doorway_width.hi));
            const int first = lo + margin;
            const int last = hi - margin - width;
            if (last < first) {
                return false;
            }
            start = static_cast<int>(rng_.uniform_int(first, last));
            return true;
        };
        for (int j = 0; j < p_.rooms_z; ++j) {
            for (int i = 0; i + 1 < p_.rooms_x; ++i) {
                const CellRect& room = rooms_[static_cast<std::size_t>(j * p_.rooms_x + i)];
                int start = 0;
                int width = 0;
                if (!door_span(room.z0, room.z1, start, width)) {
                    return "doorway does not fit between rooms";
                }
                const CellRect door{xb_[i + 1] - half, start, xb_[i + 1] - half + tc_, start + width};
                clear_door(door);
                door_zones_.push_back({door.x0 - keep, door.z0, door.x1 + keep, door.z1});
            }
        }
        for (int j = 0; j + 1 < p_.rooms_z; ++j) {
            for (int i = 0; i < p_.rooms_x; ++i) {
                const CellRect& room = rooms_[static_cast<std::size_t>(j * p_.rooms_x + i)];
                int start = 0;
                int width = 0;
                if (!door_span(room.x0, room.x1, start, width)) {
                    return "doorway does not fit between rooms";
                }
                const CellRect door{start, zb_[j + 1] - half, start + width, zb_[j + 1] - half + tc_};
                clear_door(door);
                door_zones_.push_back({door.x0, door.z0 - keep, door.x1, door.z1 + keep});
            }
        }
        return std::nullopt;
    }

    void clear_door(const CellRect& d)
    {
        for (int iz = d.z0; iz < d.z1; ++iz) {
            for (int ix = d.x0; ix < d.x1; ++ix) {
                wall_[idx(ix, iz)] = 0;
            }
        }
    }

    const ShapeTemplate& pick_template(const CategorySpec& cat, bool as_target)
    {
        const auto& pool = as_target && p_.low_targets && !cat.low_templates.empty() ? cat.low_templates
                                                                                     : cat.templates;
        return pool[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    }

    std::optional<Placed> propose(const CategorySpec& cat, const ShapeTemplate& shape, std::size_t room)
    {
        const bool turn = rng_.bernoulli(0.5);
        const int w = cells(turn ? shape.size_z : shape.size_x);
        const int d = cells(turn ? shape.size_x : shape.size_z);
        const CellRect& r = rooms_[room];
        if (r.x1 - r.x0 < w || r.z1 - r.z0 < d) {
            return std::nullopt;
        }
        const int x0 = static_cast<int>(rng_.uniform_int(r.x0, r.x1 - w));
        const int z0 = static_cast<int>(rng_.uniform_int(r.z0, r.z1 - d));
        const CellRect c{x0, z0, x0 + w, z0 + d};
        for (const auto& z : door_zones_) {
            if (c.overlaps(z)) {
                return std::nullopt;
            }
        }
        for (const auto& other : placed_) {
            if (c.overlaps(other.cells)) {
                return std::nullopt;
            }
        }
        return Placed{cat.name, shape, c};
    }

    void stamp(const Placed& pl, std::vector<float>& grid) const
    {
        const auto& s = pl.shape;
        for (int iz = pl.cells.z0; iz < pl.cells.z1; ++iz) {
            for (int ix = pl.cells.x0; ix < pl.cells.x1; ++ix) {
                float low = static_cast<float>(s.y0);
                if (s.kind == TemplateKind::table) {
                    const bool corner = (ix == pl.cells.x0 || ix == pl.cells.x1 - 1) &&
                                        (iz == pl.cells.z0 || iz == pl.cells.z1 - 1);
                    low = corner ? 0.0F : static_cast<float>(s.y0);
                }
                float& cell = grid[idx(ix, iz)];
                cell = std::min(cell, low);
            }
        }
    }

    // Every room must share one free-space component for a 0.2 m disc at 0.2 m
    // height, and every target instance must have a free cell within 1 m.
    bool connected(const std::vector<float>& grid) const
    {
        const FreeSpace fs = free_space(grid, nx_, nz_, cs_, 0.2, 0.2);
        if (fs.component_count == 0) {
            return false;
        }
        std::vector<int> counts(static_cast<std::size_t>(fs.component_count), 0);
        for (int c : fs.component) {
            if (c >= 0) {
                ++counts[static_cast<std::size_t>(c)];
            }
        }
        const int main = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
        for (const auto& r : rooms_) {
            if (!region_has(fs, r, main)) {
                return false;
            }
        }
        const int reach = cells(1.0);
        for (const auto& pl : placed_) {
            if (!is_target(pl.category)) {
                continue;
            }
            if (!region_has(fs, pl.cells.grown(reach), main)) {
                return false;
            }
        }
        return true;
    }

    bool region_has(const FreeSpace& fs, const CellRect& r, int label) const
    {
        for (int iz = std::max(0, r.z0); iz < std::min(nz_, r.z1); ++iz) {
            for (int ix = std::max(0, r.x0); ix < std::min(nx_, r.x1); ++ix) {
                if (fs.component[idx(ix, iz)] == label) {
                    return true;
                }
            }
        }
        return false;
    }

    bool is_target(const std::string& name) const
    {
        return std::find(p_.target_categories.begin(), p_.target_categories.end(), name) !=
               p_.target_categories.end();
    }

    bool try_commit(const Placed& pl)
    {
        std::vector<float> grid = lowest_;
        stamp(pl, grid);
        placed_.push_back(pl);
        if (!connected(grid)) {
            placed_.pop_back();
            return false;
        }
        lowest_ = std::move(grid);
        return true;
    }

    bool place_target(const std::string& name)
    {
        const CategorySpec& cat = *p_.find_category(name);
        for (int attempt = 0; attempt < 80; ++attempt) {
            const auto room = static_cast<std::size_t>(
                rng_.uniform_int(0, static_cast<std::int64_t>(rooms_.size()) - 1));
            const ShapeTemplate& shape = pick_template(cat, true);
            if (auto pl = propose(cat, shape, room); pl && try_commit(*pl)) {
                return true;
            }
        }
        return false;
    }

    bool fill_room(std::size_t room)
    {
        const CellRect& r = rooms_[room];
        const double target = p_.furniture_density * r.area();
        const auto covered = [&] {
            int sum = 0;
            for (const auto& pl : placed_) {
                if (pl.cells.overlaps(r)) {
                    sum += pl.cells.area();
                }
            }
            return sum;
        };
        if (p_.categories.empty()) {
            return target <= 0.0;
        }
        int failures = 0;
        while (covered() < target) {
            if (++failures > 200) {
                return false;
            }
            const auto& cat = p_.categories[static_cast<std::size_t>(
                rng_.uniform_int(0, static_cast<std::int64_t>(p_.categories.size()) - 1))];
            const ShapeTemplate& shape = pick_template(cat, is_target(cat.name));
            if (auto pl = propose(cat, shape, room); pl && try_commit(*pl)) {
                failures = 0;
            }
        }
        return true;
    }

    Scene assemble(std::uint64_t scene_seed) const
    {
        SceneBuilder b(cs_, nx_, nz_, scene_seed);
        // Decompose the wall mask into rectangles, one instance each.
        std::vector<char> left = wall_;
        for (int iz = 0; iz < nz_; ++iz) {
            for (int ix = 0; ix < nx_; ++ix) {
                if (!left[idx(ix, iz)]) {
                    continue;
                }
                int x1 = ix;
                while (x1 < nx_ && left[idx(x1, iz)]) {
                    ++x1;
                }
                int z1 = iz + 1;
                const auto row_full = [&](int z) {
                    for (int x = ix; x < x1; ++x) {
                        if (!left[idx(x, z)]) {
                            return false;
                        }
                    }
                    return true;
                };
                while (z1 < nz_ && row_full(z1)) {
                    ++z1;
                }
                for (int z = iz; z < z1; ++z) {
                    for (int x = ix; x < x1; ++x) {
                        left[idx(x, z)] = 0;
                    }
                }
                b.add_block(std::string(kWallCategory), {ix * cs_, iz * cs_, x1 * cs_, z1 * cs_}, 0.0,
                            p_.wall_height);
            }
        }
        for (const auto& pl : placed_) {
            const Rect fp{pl.cells.x0 * cs_, pl.cells.z0 * cs_, pl.cells.x1 * cs_, pl.cells.z1 * cs_};
            if (pl.shape.kind == TemplateKind::table) {
                b.add_table(pl.category, fp, pl.shape.y0, pl.shape.y1);
            } else {
                b.add_block(pl.category, fp, pl.shape.y0, pl.shape.y1);
            }
        }
        return b.build();
    }

    const SceneParams& p_;
    Rng rng_;
    double cs_;
    int tc_ = 2;
    int nx_ = 0;
    int nz_ = 0;
    std::vector<int> xb_;
    std::vector<int> zb_;
    std::vector<char> wall_;
    std::vector<float> lowest_;
    std::vector<CellRect> rooms_;
    std::vector<CellRect> door_zones_;
    std::vector<Placed> placed_;
};

} // namespace

Scene generate_scene(std::uint64_t seed, const SceneParams& params)
{
    check_params(params);
    std::string reason;
    for (int attempt = 0; attempt < params.max_retries; ++attempt) {
        Attempt a(params, split_seed(seed, static_cast<std::uint64_t>(attempt)));
        Scene scene;
        auto err = a.run(seed, scene);
        if (!err) {
            return scene;
        }
        reason = *err;
    }
    throw GenerationError("scene generation failed after " + std::to_string(params.max_retries) +
                          " attempts: " + reason);
}

// JSON ---------------------------------------------------------------------

void to_json(nlohmann::json& j, const ShapeTemplate& t)
{
    j = nlohmann::json{{"kind", t.kind == TemplateKind::table ? "table" : "block"},
                       {"size", {t.size_x, t.size_z}},
                       {"y", {t.y0, t.y1}}};
}

void from_json(const nlohmann::json& j, ShapeTemplate& t)
{
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "block" && kind != "table") {
        throw ParseError("shape template kind must be 'block' or 'table'");
    }
    t.kind = kind == "table" ? TemplateKind::table : TemplateKind::block;
    const auto& size = j.at("size");
    const auto& y = j.at("y");
    t.size_x = size.at(0).get<double>();
    t.size_z = size.at(1).get<double>();
    t.y0 = y.at(0).get<double>();
    t.y1 = y.at(1).get<double>();
}

void to_json(nlohmann::json& j, const CategorySpec& c)
{
    j = nlohmann::json{{"name", c.name}, {"templates", c.templates}, {"low_templates", c.low_templates}};
}

void from_json(const nlohmann::json& j, CategorySpec& c)
{
    j.at("name").get_to(c.name);
    c.templates = j.at("templates").get<std::vector<ShapeTemplate>>();
    c.low_templates = j.value("low_templates", std::vector<ShapeTemplate>{});
}

void to_json(nlohmann::json& j, const SceneParams& p)
{
    j = nlohmann::json{{"rooms", {p.rooms_x, p.rooms_z}},
                       {"room_size", p.room_size},
                       {"doorway_width", p.doorway_width},
                       {"wall_thickness", p.wall_thickness},
                       {"wall_height", p.wall_height},
                       {"furniture_density", p.furniture_density},
                       {"cell_size", p.cell_size},
                       {"categories", p.categories},
                       {"target_categories", p.target_categories},
                       {"low_targets", p.low_targets},
                       {"max_retries", p.max_retries}};
}

void from_json(const nlohmann::json& j, SceneParams& p)
{
    const SceneParams d;
    if (j.contains("rooms")) {
        p.rooms_x = j.at("rooms").at(0).get<int>();
        p.rooms_z = j.at("rooms").at(1).get<int>();
    } else {
        p.rooms_x = d.rooms_x;
        p.rooms_z = d.rooms_z;
    }
    p.room_size = j.value("room_size", d.room_size);
    p.doorway_width = j.value("doorway_width", d.doorway_width);
    p.wall_thickness = j.value("wall_thickness", d.wall_thickness);
    p.wall_height = j.value("wall_height", d.wall_height);
    p.furniture_density = j.value("furniture_density", d.furniture_density);
    p.cell_size = j.value("cell_size", d.cell_size);
    p.categories = j.contains("categories") ? j.at("categories").get<std::vector<CategorySpec>>() : d.categories;
    p.target_categories = j.value("target_categories", d.target_categories);
    p.low_targets = j.value("low_targets", d.low_targets);
    p.max_retries = j.value("max_retries", d.max_retries);
    check_params(p);
}

} // namespace xenav
