#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xenav/embodiment.hpp"
#include "xenav/geometry.hpp"

namespace xenav {

using InstanceId = std::uint16_t;
inline constexpr InstanceId kNoInstance = 0;

/// One occupied vertical interval inside a grid cell.
struct Slab
{
    float y_min = 0.0F;
    float y_max = 0.0F;
    InstanceId instance = kNoInstance;

    friend bool operator==(const Slab&, const Slab&) = default;
};

struct Instance
{
    InstanceId id = kNoInstance;
    std::string category;
    Rect footprint;
    Vec3 representative;  ///< footprint centroid at the vertical midpoint of its main slab

    friend bool operator==(const Instance&, const Instance&) = default;
};

inline constexpr std::string_view kWallCategory = "wall";

/// 2.5D world: a grid of cells, each holding the vertical intervals occupied by
/// object colliders. Immutable once built.
class Scene
{
public:
    Scene() = default;

    double cell_size() const { return cell_size_; }
    int nx() const { return nx_; }
    int nz() const { return nz_; }
    std::uint64_t seed() const { return seed_; }
    Rect bounds() const { return {0.0, 0.0, nx_ * cell_size_, nz_ * cell_size_}; }

    bool in_bounds(int ix, int iz) const { return ix >= 0 && iz >= 0 && ix < nx_ && iz < nz_; }
    std::size_t cell_index(int ix, int iz) const
    {
        return static_cast<std::size_t>(iz) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(ix);
    }

    /// Slabs of a cell, sorted by y_min. Throws IndexError when out of bounds.
    std::span<const Slab> occupied_intervals(int ix, int iz) const;

    /// Unchecked variant for inner loops.
    std::span<const Slab> cell_slabs(std::size_t cell) const
    {
        return {slabs_.data() + offsets_[cell], slabs_.data() + offsets_[cell + 1]};
    }

    /// Lowest slab bottom in a cell, +inf when empty. A body spanning heights
    /// (0, h) collides with the cell iff lowest(cell) < h.
    float lowest(std::size_t cell) const { return lowest_[cell]; }
    bool blocks(std::size_t cell, double body_height) const { return lowest_[cell] < body_height; }

    /// Highest slab top over the whole scene (0 when empty).
    float max_height() const { return max_height_; }

    const std::vector<Instance>& instances() const { return instances_; }
    const Instance* find_instance(InstanceId id) const;
    std::vector<const Instance*> instances_of(std::string_view category) const;

    std::size_t slab_count() const { return slabs_.size(); }
    double slab_volume() const;

    friend bool operator==(const Scene& a, const Scene& b)
    {
        return a.cell_size_ == b.cell_size_ && a.nx_ == b.nx_ && a.nz_ == b.nz_ && a.seed_ == b.seed_ &&
               a.instances_ == b.instances_ && a.offsets_ == b.offsets_ && a.slabs_ == b.slabs_;
    }

private:
    friend class SceneBuilder;

    double cell_size_ = 0.05;
    int nx_ = 0;
    int nz_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<Instance> instances_;
    std::vector<std::uint32_t> offsets_{0};
    std::vector<Slab> slabs_;
    std::vector<float> lowest_;
    float max_height_ = 0.0F;
};

/// Incremental scene construction. Footprints are snapped to the cell grid.
class SceneBuilder
{
public:
    SceneBuilder(double cell_size, int nx, int nz, std::uint64_t seed = 0);

    double cell_size() const { return cell_size_; }
    int nx() const { return nx_; }
    int nz() const { return nz_; }

    /// A solid box covering the footprint over [y0, y1].
    InstanceId add_block(std::string category, Rect footprint, double y0, double y1);

    /// Four one-cell corner legs over [0, top_y0] and a top over [top_y0, top_y1].
    InstanceId add_table(std::string category, Rect footprint, double top_y0, double top_y1);

    /// Raw access used by the file loader.
    InstanceId add_instance(Instance inst);
    void add_slab(int ix, int iz, Slab slab);

    Scene build() const;

    /// Cell index range [i0, i1) covered by a snapped footprint.
    void cell_range(const Rect& r, int& ix0, int& iz0, int& ix1, int& iz1) const;

private:
    double cell_size_;
    int nx_;
    int nz_;
    std::uint64_t seed_;
    std::vector<Instance> instances_;
    std::vector<std::vector<Slab>> cells_;
};

enum class TemplateKind
{
    block,
    table,
};

/// Shape template of an object category; footprint in meters before a random
/// quarter-turn.
struct ShapeTemplate
{
    TemplateKind kind = TemplateKind::block;
    double size_x = 0.5;
    double size_z = 0.5;
    double y0 = 0.0;  ///< block bottom, or table-top bottom (leg height)
    double y1 = 0.5;  ///< top

    friend bool operator==(const ShapeTemplate&, const ShapeTemplate&) = default;
};

struct CategorySpec
{
    std::string name;
    std::vector<ShapeTemplate> templates;
    std::vector<ShapeTemplate> low_templates;  ///< used when targets must sit low; empty = same

    friend bool operator==(const CategorySpec&, const CategorySpec&) = default;
};

struct SceneParams
{
    int rooms_x = 2;
    int rooms_z = 2;
    Interval room_size{3.0, 4.5};
    Interval doorway_width{1.0, 1.4};
    double wall_thickness = 0.1;
    double wall_height = 2.0;
    double furniture_density = 0.08;  ///< fraction of each room's floor covered by furniture
    double cell_size = 0.05;
    std::vector<CategorySpec> categories = default_categories();
    std::vector<std::string> target_categories = default_target_categories();
    bool low_targets = false;  ///< targets use templates visible from 0.3 m height
    int max_retries = 8;

    static std::vector<CategorySpec> default_categories();
    static std::vector<std::string> default_target_categories();

    const CategorySpec* find_category(std::string_view name) const;

    friend bool operator==(const SceneParams&, const SceneParams&) = default;
};

/// Throws ValidationError on inconsistent parameters.
void check_params(const SceneParams& params);

/// Procedural multi-room indoor scene. Throws GenerationError after bounded retries.
Scene generate_scene(std::uint64_t seed, const SceneParams& params = {});

/// Cells from which a disc of `radius` spanning heights (0, height) is free, and
/// the 4-connected component label of each (−1 = not free).
struct FreeSpace
{
    int nx = 0;
    int nz = 0;
    std::vector<int> component;
    int component_count = 0;
};
FreeSpace free_space(const Scene& scene, double radius, double height);

/// Same as free_space, over a raw per-cell grid of lowest slab bottoms.
FreeSpace free_space(std::span<const float> lowest, int nx, int nz, double cell_size, double radius,
                     double height);

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);
std::string serialize_scene(const Scene& scene);
Scene deserialize_scene(const std::string& bytes);

/// Hand-built layouts reproducing embodiment-dependent behavior.
struct Scenario
{
    Scene scene;
    Vec2 start;
    double start_heading = 0.0;
    std::string target_category;
};

/// A long table between the start and the target: short bodies pass under it,
/// tall ones must go around.
Scenario make_under_table_scenario();

/// A raised bed (clearance 0.25 m) between the start and the target.
Scenario make_under_bed_scenario();

void to_json(nlohmann::json& j, const ShapeTemplate& t);
void from_json(const nlohmann::json& j, ShapeTemplate& t);
void to_json(nlohmann::json& j, const CategorySpec& c);
void from_json(const nlohmann::json& j, CategorySpec& c);
void to_json(nlohmann::json& j, const SceneParams& p);
void from_json(const nlohmann::json& j, SceneParams& p);
void to_json(nlohmann::json& j, const Instance& i);
void from_json(const nlohmann::json& j, Instance& i);

} // namespace xenav
