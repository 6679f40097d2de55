#include "xenav/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xenav/errors.hpp"

namespace xenav {

std::span<const Slab> Scene::occupied_intervals(int ix, int iz) const
{
    if (!in_bounds(ix, iz)) {
        std::ostringstream os;
        os << "cell (" << ix << ", " << iz << ") outside scene grid " << nx_ << "x" << nz_;
        throw IndexError(os.str());
    }
    return cell_slabs(cell_index(ix, iz));
}

const Instance* Scene::find_instance(InstanceId id) const
{
    const auto it = std::lower_bound(instances_.begin(), instances_.end(), id,
                                     [](const Instance& inst, InstanceId v) { return inst.id < v; });
    return it != instances_.end() && it->id == id ? &*it : nullptr;
}

std::vector<const Instance*> Scene::instances_of(std::string_view category) const
{
    std::vector<const Instance*> out;
    for (const auto& inst : instances_) {
        if (inst.category == category) {
            out.push_back(&inst);
        }
    }
    return out;
}

double Scene::slab_volume() const
{
    double sum = 0.0;
    for (const Slab& s : slabs_) {
        sum += static_cast<double>(s.y_max) - static_cast<double>(s.y_min);
    }
    return sum * cell_size_ * cell_size_;
}

// SceneBuilder -------------------------------------------------------------

SceneBuilder::SceneBuilder(double cell_size, int nx, int nz, std::uint64_t seed)
    : cell_size_(cell_size), nx_(nx), nz_(nz), seed_(seed)
{
    if (!(cell_size > 0.0) || nx <= 0 || nz <= 0) {
        throw ValidationError("scene grid must have a positive cell size and extent");
    }
    cells_.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(nz));
}

void SceneBuilder::cell_range(const Rect& r, int& ix0, int& iz0, int& ix1, int& iz1) const
{
    ix0 = std::clamp(static_cast<int>(std::lround(r.x0 / cell_size_)), 0, nx_);
    iz0 = std::clamp(static_cast<int>(std::lround(r.z0 / cell_size_)), 0, nz_);
    ix1 = std::clamp(static_cast<int>(std::lround(r.x1 / cell_size_)), 0, nx_);
    iz1 = std::clamp(static_cast<int>(std::lround(r.z1 / cell_size_)), 0, nz_);
}

InstanceId SceneBuilder::add_instance(Instance inst)
{
    if (inst.id == kNoInstance) {
        if (instances_.size() >= 65535) {
            throw GenerationError("scene exceeds 65535 instances");
        }
        inst.id = static_cast<InstanceId>(instances_.size() + 1);
    }
    instances_.push_back(std::move(inst));
    return instances_.back().id;
}

void SceneBuilder::add_slab(int ix, int iz, Slab slab)
{
    cells_[static_cast<std::size_t>(iz) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(ix)]
        .push_back(slab);
}

InstanceId SceneBuilder::add_block(std::string category, Rect footprint, double y0, double y1)
{
    int ix0, iz0, ix1, iz1;
    cell_range(footprint, ix0, iz0, ix1, iz1);
    const Rect snapped{ix0 * cell_size_, iz0 * cell_size_, ix1 * cell_size_, iz1 * cell_size_};
    const Vec2 c = snapped.center();
    const InstanceId id = add_instance({kNoInstance, std::move(category), snapped, {c.x, 0.5 * (y0 + y1), c.z}});
    for (int iz = iz0; iz < iz1; ++iz) {
        for (int ix = ix0; ix < ix1; ++ix) {
            add_slab(ix, iz, {static_cast<float>(y0), static_cast<float>(y1), id});
        }
    }
    return id;
}

InstanceId SceneBuilder::add_table(std::string category, Rect footprint, double top_y0, double top_y1)
{
    int ix0, iz0, ix1, iz1;
    cell_range(footprint, ix0, iz0, ix1, iz1);
    const Rect snapped{ix0 * cell_size_, iz0 * cell_size_, ix1 * cell_size_, iz1 * cell_size_};
    const Vec2 c = snapped.center();
    const InstanceId id =
        add_instance({kNoInstance, std::move(category), snapped, {c.x, 0.5 * (top_y0 + top_y1), c.z}});
    for (int iz = iz0; iz < iz1; ++iz) {
        for (int ix = ix0; ix < ix1; ++ix) {
            const bool corner = (ix == ix0 || ix == ix1 - 1) && (iz == iz0 || iz == iz1 - 1);
            if (corner && top_y0 > 0.0) {
                add_slab(ix, iz, {0.0F, static_cast<float>(top_y0), id});
            }
            add_slab(ix, iz, {static_cast<float>(top_y0), static_cast<float>(top_y1), id});
        }
    }
    return id;
}

Scene SceneBuilder::build() const
{
    Scene s;
    s.cell_size_ = cell_size_;
    s.nx_ = nx_;
    s.nz_ = nz_;
    s.seed_ = seed_;
    s.instances_ = instances_;
    std::sort(s.instances_.begin(), s.instances_.end(),
              [](const Instance& a, const Instance& b) { return a.id < b.id; });
    s.offsets_.assign(cells_.size() + 1, 0);
    s.lowest_.assign(cells_.size(), std::numeric_limits<float>::infinity());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        std::vector<Slab> cell = cells_[i];
        std::stable_sort(cell.begin(), cell.end(), [](const Slab& a, const Slab& b) {
            return a.y_min < b.y_min || (a.y_min == b.y_min && a.y_max < b.y_max);
        });
        for (const Slab& sl : cell) {
            s.slabs_.push_back(sl);
            s.lowest_[i] = std::min(s.lowest_[i], sl.y_min);
            s.max_height_ = std::max(s.max_height_, sl.y_max);
        }
        s.offsets_[i + 1] = static_cast<std::uint32_t>(s.slabs_.size());
    }
    return s;
}

// Free space ---------------------------------------------------------------

FreeSpace free_space(const Scene& scene, double radius, double height)
{
    std::vector<float> lowest(static_cast<std::size_t>(scene.nx()) * scene.nz());
    for (std::size_t i = 0; i < lowest.size(); ++i) {
        lowest[i] = scene.lowest(i);
    }
    return free_space(lowest, scene.nx(), scene.nz(), scene.cell_size(), radius, height);
}

FreeSpace free_space(std::span<const float> lowest, int nx, int nz, double cs, double radius, double height)
{
    const auto index = [nx](int ix, int iz) {
        return static_cast<std::size_t>(iz) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix);
    };
    const auto in_bounds = [nx, nz](int ix, int iz) { return ix >= 0 && iz >= 0 && ix < nx && iz < nz; };
    FreeSpace fs;
    fs.nx = nx;
    fs.nz = nz;
    std::vector<char> free(static_cast<std::size_t>(nx) * nz, 1);

    // Cells whose square comes within `radius` of a cell center.
    const int reach = static_cast<int>(std::ceil(radius / cs + 0.5));
    std::vector<std::pair<int, int>> offsets;
    for (int dz = -reach; dz <= reach; ++dz) {
        for (int dx = -reach; dx <= reach; ++dx) {
            const double gx = std::max(std::abs(dx) - 0.5, 0.0) * cs;
            const double gz = std::max(std::abs(dz) - 0.5, 0.0) * cs;
            if (std::hypot(gx, gz) < radius) {
                offsets.emplace_back(dx, dz);
            }
        }
    }
    for (int iz = 0; iz < nz; ++iz) {
        for (int ix = 0; ix < nx; ++ix) {
            const double cx = (ix + 0.5) * cs;
            const double cz = (iz + 0.5) * cs;
            if (cx < radius || cz < radius || nx * cs - cx < radius || nz * cs - cz < radius) {
                free[index(ix, iz)] = 0;
            }
            if (!(lowest[index(ix, iz)] < height)) {
                continue;
            }
            for (const auto& [dx, dz] : offsets) {
                if (in_bounds(ix + dx, iz + dz)) {
                    free[index(ix + dx, iz + dz)] = 0;
                }
            }
        }
    }

    fs.component.assign(free.size(), -1);
    std::deque<std::pair<int, int>> queue;
    for (int iz = 0; iz < nz; ++iz) {
        for (int ix = 0; ix < nx; ++ix) {
            const std::size_t start = index(ix, iz);
            if (!free[start] || fs.component[start] >= 0) {
                continue;
            }
            const int label = fs.component_count++;
            fs.component[start] = label;
            queue.emplace_back(ix, iz);
            while (!queue.empty()) {
                const auto [cx, cz] = queue.front();
                queue.pop_front();
                constexpr int kDx[] = {1, -1, 0, 0};
                constexpr int kDz[] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    const int nxi = cx + kDx[k];
                    const int nzi = cz + kDz[k];
                    if (!in_bounds(nxi, nzi)) {
                        continue;
                    }
                    const std::size_t n = index(nxi, nzi);
                    if (free[n] && fs.component[n] < 0) {
                        fs.component[n] = label;
                        queue.emplace_back(nxi, nzi);
                    }
                }
            }
        }
    }
    return fs;
}

// Scenarios ----------------------------------------------------------------

namespace {

void add_outer_walls(SceneBuilder& b, double thickness, double height)
{
    const double w = b.nx() * b.cell_size();
    const double d = b.nz() * b.cell_size();
    b.add_block(std::string(kWallCategory), {0.0, 0.0, w, thickness}, 0.0, height);
    b.add_block(std::string(kWallCategory), {0.0, d - thickness, w, d}, 0.0, height);
    b.add_block(std::string(kWallCategory), {0.0, thickness, thickness, d - thickness}, 0.0, height);
    b.add_block(std::string(kWallCategory), {w - thickness, thickness, w, d - thickness}, 0.0, height);
}

} // namespace

Scenario make_under_table_scenario()
{
    SceneBuilder b(0.05, 120, 120, 0);
    add_outer_walls(b, 0.1, 2.0);
    b.add_table("table", {0.9, 2.4, 5.1, 3.6}, 0.6, 0.75);
    b.add_block("chair", {2.75, 4.8, 3.25, 5.3}, 0.0, 0.9);
    return {b.build(), {3.0, 1.2}, 0.0, "chair"};
}

Scenario make_under_bed_scenario()
{
    SceneBuilder b(0.05, 120, 120, 0);
    add_outer_walls(b, 0.1, 2.0);
    b.add_table("bed", {0.9, 2.2, 5.1, 3.8}, 0.25, 0.45);
    b.add_block("houseplant", {2.8, 4.8, 3.2, 5.2}, 0.0, 0.9);
    return {b.build(), {3.0, 1.2}, 0.0, "houseplant"};
}

// File format --------------------------------------------------------------

namespace {

constexpr int kSceneFormatVersion = 1;

void put_u16(std::string& out, std::uint16_t v)
{
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void put_f32(std::string& out, float f)
{
    const auto v = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

class ByteReader
{
public:
    ByteReader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    std::uint16_t u16(const char* what)
    {
        need(2, what);
        const auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes_[pos_]) |
                                                  (static_cast<unsigned char>(bytes_[pos_ + 1]) << 8));
        pos_ += 2;
        return v;
    }

    float f32(const char* what)
    {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return std::bit_cast<float>(v);
    }

    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n, const char* what) const
    {
        if (pos_ + n > bytes_.size()) {
            std::ostringstream os;
            os << "scene file truncated at byte offset " << pos_ << " while reading " << what;
            throw ParseError(os.str());
        }
    }

    const std::string& bytes_;
    std::size_t pos_;
};

} // namespace

void to_json(nlohmann::json& j, const Instance& i)
{
    j = nlohmann::json{{"id", i.id},
                       {"category", i.category},
                       {"footprint", {i.footprint.x0, i.footprint.z0, i.footprint.x1, i.footprint.z1}},
                       {"point", {i.representative.x, i.representative.y, i.representative.z}}};
}

void from_json(const nlohmann::json& j, Instance& i)
{
    j.at("id").get_to(i.id);
    j.at("category").get_to(i.category);
    const auto& f = j.at("footprint");
    const auto& p = j.at("point");
    if (f.size() != 4 || p.size() != 3) {
        throw ParseError("instance footprint needs 4 numbers and point 3");
    }
    i.footprint = {f[0].get<double>(), f[1].get<double>(), f[2].get<double>(), f[3].get<double>()};
    i.representative = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
}

std::string serialize_scene(const Scene& scene)
{
    std::string slabs;
    for (int iz = 0; iz < scene.nz(); ++iz) {
        for (int ix = 0; ix < scene.nx(); ++ix) {
            const auto cell = scene.occupied_intervals(ix, iz);
            put_u16(slabs, static_cast<std::uint16_t>(cell.size()));
            for (const Slab& s : cell) {
                put_f32(slabs, s.y_min);
                put_f32(slabs, s.y_max);
                put_u16(slabs, s.instance);
            }
        }
    }
    nlohmann::json header{{"format", "xenav-scene"},
                          {"version", kSceneFormatVersion},
                          {"cell_size", scene.cell_size()},
                          {"nx", scene.nx()},
                          {"nz", scene.nz()},
                          {"seed", scene.seed()},
                          {"instances", scene.instances()},
                          {"slab_section_bytes", slabs.size()}};
    std::string out = header.dump();
    out.push_back('\n');
    out += slabs;
    return out;
}

Scene deserialize_scene(const std::string& bytes)
{
    const std::size_t eol = bytes.find('\n');
    if (eol == std::string::npos) {
        throw ParseError("scene file: missing header line terminator (line 1)");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, eol));
    } catch (const nlohmann::json::parse_error& e) {
        std::ostringstream os;
        os << "scene header: line 1, byte " << e.byte << ": " << e.what();
        throw ParseError(os.str());
    }
    if (header.value("format", std::string{}) != "xenav-scene") {
        throw ParseError("scene header: line 1: not a scene file");
    }
    if (header.value("version", 0) != kSceneFormatVersion) {
        throw ParseError("scene header: unsupported version");
    }
    double cell_size = 0;
    int nx = 0;
    int nz = 0;
    std::uint64_t seed = 0;
    std::vector<Instance> instances;
    try {
        cell_size = header.at("cell_size").get<double>();
        nx = header.at("nx").get<int>();
        nz = header.at("nz").get<int>();
        seed = header.at("seed").get<std::uint64_t>();
        instances = header.at("instances").get<std::vector<Instance>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("scene header: line 1: ") + e.what());
    }

    SceneBuilder b(cell_size, nx, nz, seed);
    std::vector<char> known(65536, 0);
    for (auto& inst : instances) {
        if (inst.id == kNoInstance || known[inst.id]) {
            throw ValidationError("scene header: invalid or duplicate instance id " + std::to_string(inst.id));
        }
        known[inst.id] = 1;
        b.add_instance(std::move(inst));
    }

    ByteReader rd(bytes, eol + 1);
    for (int iz = 0; iz < nz; ++iz) {
        for (int ix = 0; ix < nx; ++ix) {
            const std::uint16_t count = rd.u16("slab count");
            for (std::uint16_t k = 0; k < count; ++k) {
                Slab s;
                s.y_min = rd.f32("slab y_min");
                s.y_max = rd.f32("slab y_max");
                s.instance = rd.u16("slab instance");
                std::ostringstream where;
                where << "cell (" << ix << ", " << iz << ")";
                if (!(s.y_min >= 0.0F && s.y_min < s.y_max)) {
                    throw ValidationError(where.str() + ": slab must satisfy 0 <= y_min < y_max");
                }
                if (!known[s.instance]) {
                    throw ValidationError(where.str() + ": slab references unknown instance " +
                                          std::to_string(s.instance));
                }
                b.add_slab(ix, iz, s);
            }
        }
    }
    if (rd.pos() != bytes.size()) {
        std::ostringstream os;
        os << "scene file: " << bytes.size() - rd.pos() << " trailing bytes after slab section at offset "
           << rd.pos();
        throw ParseError(os.str());
    }
    return b.build();
}

void save_scene(const Scene& scene, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    const std::string bytes = serialize_scene(scene);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

Scene load_scene(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_scene(ss.str());
}

} // namespace xenav
