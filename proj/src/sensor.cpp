#include "xenav/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xenav/errors.hpp"

namespace xenav {

Image Image::blank(int width, int height, int camera_index)
{
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    return {width, height, std::vector<std::uint16_t>(n, kNoInstance), std::vector<std::uint16_t>(n, kNoHitDepth),
            camera_index};
}

Image Image::masked(int width, int height, int camera_index)
{
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    return {width, height, std::vector<std::uint16_t>(n, 0), std::vector<std::uint16_t>(n, 0), camera_index};
}

RayHit trace_ray(const Scene& scene, const Vec3& o, const Vec3& d, double max_range)
{
    constexpr double kInf = std::numeric_limits<double>::infinity();
    const double cs = scene.cell_size();
    const double width = scene.nx() * cs;
    const double depth = scene.nz() * cs;
    const double top = scene.max_height();

    // Clip the horizontal projection to the grid rectangle.
    double t_enter = 0.0;
    double t_exit = max_range;
    const auto clip = [&](double origin, double dir, double lo, double hi) {
        if (dir == 0.0) {
            return origin >= lo && origin <= hi;
        }
        double a = (lo - origin) / dir;
        double b = (hi - origin) / dir;
        if (a > b) {
            std::swap(a, b);
        }
        t_enter = std::max(t_enter, a);
        t_exit = std::min(t_exit, b);
        return t_enter <= t_exit;
    };
    if (!clip(o.x, d.x, 0.0, width) || !clip(o.z, d.z, 0.0, depth)) {
        return {};
    }
    // Below the floor or above everything: nothing can be hit.
    if (d.y < 0.0) {
        t_exit = std::min(t_exit, -o.y / d.y);
    } else if (o.y > top) {
        return {};
    }
    if (d.y > 0.0) {
        t_exit = std::min(t_exit, (top - o.y) / d.y);
    }
    if (t_enter > t_exit) {
        return {};
    }

    const double px = o.x + d.x * t_enter;
    const double pz = o.z + d.z * t_enter;
    int ix = std::clamp(static_cast<int>(std::floor(px / cs)), 0, scene.nx() - 1);
    int iz = std::clamp(static_cast<int>(std::floor(pz / cs)), 0, scene.nz() - 1);
    const int step_x = d.x > 0.0 ? 1 : -1;
    const int step_z = d.z > 0.0 ? 1 : -1;
    const double delta_x = d.x != 0.0 ? cs / std::abs(d.x) : kInf;
    const double delta_z = d.z != 0.0 ? cs / std::abs(d.z) : kInf;
    double next_x = d.x > 0.0 ? ((ix + 1) * cs - o.x) / d.x : d.x < 0.0 ? (ix * cs - o.x) / d.x : kInf;
    double next_z = d.z > 0.0 ? ((iz + 1) * cs - o.z) / d.z : d.z < 0.0 ? (iz * cs - o.z) / d.z : kInf;

    double t0 = t_enter;
    while (t0 <= t_exit) {
        const double t1 = std::min({next_x, next_z, t_exit});
        const std::size_t cell = scene.cell_index(ix, iz);
        const float lowest = scene.lowest(cell);
        // Skip empty cells and cells whose slabs lie entirely above the ray segment.
        if (lowest <= std::max(o.y + d.y * t0, o.y + d.y * t1)) {
            double best = kInf;
            InstanceId best_id = kNoInstance;
            for (const Slab& s : scene.cell_slabs(cell)) {
                double lo = t0;
                double hi = t1;
                if (d.y == 0.0) {
                    if (o.y < s.y_min || o.y > s.y_max) {
                        continue;
                    }
                } else {
                    double a = (s.y_min - o.y) / d.y;
                    double b = (s.y_max - o.y) / d.y;
                    if (a > b) {
                        std::swap(a, b);
                    }
                    lo = std::max(lo, a);
                    hi = std::min(hi, b);
                }
                if (lo <= hi && lo < best) {
                    best = lo;
                    best_id = s.instance;
                }
            }
            if (best_id != kNoInstance) {
                return {best, best_id, true};
            }
        }
        if (t1 >= t_exit) {
            break;
        }
        if (next_x < next_z) {
            ix += step_x;
            next_x += delta_x;
        } else {
            iz += step_z;
            next_z += delta_z;
        }
        if (!scene.in_bounds(ix, iz)) {
            break;
        }
        t0 = t1;
    }
    return {};
}

namespace {

// Pinhole model shared by full renders and targeted visibility queries, so
// both trace bit-identical rays.
struct Projector
{
    Vec3 origin;
    Vec3 fwd;
    Vec3 up;
    Vec3 right;
    double tu;
    double tv;
    int w;
    int h;

    Projector(const EmbodimentConfig& e, const Pose& pose, const CameraConfig& c, int width, int height)
    {
        w = width > 0 ? width : c.width;
        h = height > 0 ? height : c.height;
        const CameraPlacement place = camera_placement(e, pose, c);
        origin = place.position;
        const Vec2 hf = heading_forward(place.heading);
        const Vec2 hr = heading_right(place.heading);
        const double sp = std::sin(deg2rad(place.pitch));
        const double cp = std::cos(deg2rad(place.pitch));
        // Pitch tilts the optical axis downward.
        fwd = {cp * hf.x, -sp, cp * hf.z};
        up = {sp * hf.x, cp, sp * hf.z};
        right = {hr.x, 0.0, hr.z};
        tu = std::tan(deg2rad(c.hfov / 2.0));
        tv = std::tan(deg2rad(c.vfov / 2.0));
    }

    Vec3 ray(int i, int j) const
    {
        const double v = (1.0 - 2.0 * (j + 0.5) / h) * tv;
        const double u = (2.0 * (i + 0.5) / w - 1.0) * tu;
        Vec3 dir{fwd.x + u * right.x + v * up.x, fwd.y + v * up.y, fwd.z + u * right.z + v * up.z};
        const double n = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
        return {dir.x / n, dir.y / n, dir.z / n};
    }

    // Continuous pixel coordinates of a point in front of the camera.
    bool project(const Vec3& p, double& pi, double& pj) const
    {
        const Vec3 r{p.x - origin.x, p.y - origin.y, p.z - origin.z};
        const double zc = r.x * fwd.x + r.y * fwd.y + r.z * fwd.z;
        if (zc <= 1e-6) {
            return false;
        }
        const double u = (r.x * right.x + r.y * right.y + r.z * right.z) / zc;
        const double v = (r.x * up.x + r.y * up.y + r.z * up.z) / zc;
        pi = (u / tu + 1.0) * w / 2.0;
        pj = (1.0 - v / tv) * h / 2.0;
        return true;
    }
};

// Box enclosing every slab of an instance, one cell of slack around the footprint.
bool instance_box(const Scene& scene, InstanceId id, Rect& footprint, double& y0, double& y1)
{
    const Instance* inst = scene.find_instance(id);
    if (inst == nullptr) {
        return false;
    }
    const double cs = scene.cell_size();
    const int ix0 = std::max(0, static_cast<int>(std::floor(inst->footprint.x0 / cs)) - 1);
    const int iz0 = std::max(0, static_cast<int>(std::floor(inst->footprint.z0 / cs)) - 1);
    const int ix1 = std::min(scene.nx() - 1, static_cast<int>(std::ceil(inst->footprint.x1 / cs)));
    const int iz1 = std::min(scene.nz() - 1, static_cast<int>(std::ceil(inst->footprint.z1 / cs)));
    y0 = std::numeric_limits<double>::infinity();
    y1 = -y0;
    for (int iz = iz0; iz <= iz1; ++iz) {
        for (int ix = ix0; ix <= ix1; ++ix) {
            for (const Slab& s : scene.cell_slabs(scene.cell_index(ix, iz))) {
                if (s.instance == id) {
                    y0 = std::min(y0, static_cast<double>(s.y_min));
                    y1 = std::max(y1, static_cast<double>(s.y_max));
                }
            }
        }
    }
    footprint = {ix0 * cs, iz0 * cs, (ix1 + 1) * cs, (iz1 + 1) * cs};
    return y0 <= y1;
}

} // namespace

Image render(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, std::size_t cam, int width,
             int height)
{
    if (cam >= e.cameras.size()) {
        throw IndexError("camera index " + std::to_string(cam) + " out of range for embodiment with " +
                         std::to_string(e.cameras.size()) + " camera(s)");
    }
    const Projector proj(e, pose, e.cameras[cam], width, height);
    Image img = Image::blank(proj.w, proj.h, static_cast<int>(cam));
    for (int j = 0; j < proj.h; ++j) {
        for (int i = 0; i < proj.w; ++i) {
            const RayHit hit = trace_ray(scene, proj.origin, proj.ray(i, j));
            if (hit.hit) {
                const auto p = static_cast<std::size_t>(j) * static_cast<std::size_t>(proj.w) + static_cast<std::size_t>(i);
                img.semantic[p] = hit.instance;
                img.depth[p] = static_cast<std::uint16_t>(std::min(std::lround(hit.distance * 1000.0), 65534L));
            }
        }
    }
    return img;
}

bool targets_visible(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, std::size_t cam,
                     std::span<const InstanceId> ids, int width, int height)
{
    if (cam >= e.cameras.size()) {
        throw IndexError("camera index " + std::to_string(cam) + " out of range for embodiment with " +
                         std::to_string(e.cameras.size()) + " camera(s)");
    }
    const Projector proj(e, pose, e.cameras[cam], width, height);
    auto wanted = [&](InstanceId v) { return std::find(ids.begin(), ids.end(), v) != ids.end(); };
    for (const InstanceId id : ids) {
        Rect fp;
        double y0 = 0.0;
        double y1 = 0.0;
        if (!instance_box(scene, id, fp, y0, y1)) {
            continue;
        }
        // Pixel window covering the projected box; the whole image when a
        // corner is behind the camera.
        int i0 = 0;
        int i1 = proj.w - 1;
        int j0 = 0;
        int j1 = proj.h - 1;
        double lo_i = std::numeric_limits<double>::infinity();
        double hi_i = -lo_i;
        double lo_j = lo_i;
        double hi_j = -lo_i;
        bool bounded = true;
        for (int k = 0; k < 8 && bounded; ++k) {
            const Vec3 corner{(k & 1) != 0 ? fp.x1 : fp.x0, (k & 2) != 0 ? y1 : y0, (k & 4) != 0 ? fp.z1 : fp.z0};
            double pi = 0.0;
            double pj = 0.0;
            bounded = proj.project(corner, pi, pj);
            lo_i = std::min(lo_i, pi);
            hi_i = std::max(hi_i, pi);
            lo_j = std::min(lo_j, pj);
            hi_j = std::max(hi_j, pj);
        }
        if (bounded) {
            if (hi_i < -1.0 || lo_i > proj.w + 1.0 || hi_j < -1.0 || lo_j > proj.h + 1.0) {
                continue;
            }
            i0 = std::max(0, static_cast<int>(std::floor(lo_i)) - 1);
            i1 = std::min(proj.w - 1, static_cast<int>(std::ceil(hi_i)) + 1);
            j0 = std::max(0, static_cast<int>(std::floor(lo_j)) - 1);
            j1 = std::min(proj.h - 1, static_cast<int>(std::ceil(hi_j)) + 1);
        }
        for (int j = j0; j <= j1; ++j) {
            for (int i = i0; i <= i1; ++i) {
                const RayHit hit = trace_ray(scene, proj.origin, proj.ray(i, j));
                if (hit.hit && wanted(hit.instance)) {
                    return true;
                }
            }
        }
    }
    return false;
}

std::set<InstanceId> visible_instances(const Image& img)
{
    std::set<InstanceId> out;
    for (const auto s : img.semantic) {
        if (s != kNoInstance) {
            out.insert(s);
        }
    }
    return out;
}

Image pad_to_square(const Image& img, int side)
{
    const int square = std::max(img.width, img.height);
    if (side < square) {
        throw RangeError("pad_to_square: side " + std::to_string(side) + " smaller than image extent " +
                         std::to_string(square));
    }
    Image padded = Image::blank(square, square, img.camera_index);
    const int ox = (square - img.width) / 2;
    const int oy = (square - img.height) / 2;
    for (int j = 0; j < img.height; ++j) {
        for (int i = 0; i < img.width; ++i) {
            const auto src = static_cast<std::size_t>(j) * img.width + i;
            const auto dst = static_cast<std::size_t>(j + oy) * square + (i + ox);
            padded.semantic[dst] = img.semantic[src];
            padded.depth[dst] = img.depth[src];
        }
    }
    if (side == square) {
        return padded;
    }
    Image out = Image::blank(side, side, img.camera_index);
    const auto map = [square, side](int dst) {
        return static_cast<int>((static_cast<std::int64_t>(2 * dst + 1) * square) / (2 * side));
    };
    for (int j = 0; j < side; ++j) {
        const int sj = map(j);
        for (int i = 0; i < side; ++i) {
            const auto src = static_cast<std::size_t>(sj) * square + map(i);
            const auto dst = static_cast<std::size_t>(j) * side + i;
            out.semantic[dst] = padded.semantic[src];
            out.depth[dst] = padded.depth[src];
        }
    }
    return out;
}

std::string encode_image(const Image& img)
{
    std::string out;
    out.reserve(img.pixels() * 4);
    for (std::size_t p = 0; p < img.pixels(); ++p) {
        const std::uint16_t s = img.semantic[p];
        const std::uint16_t d = img.depth[p];
        out.push_back(static_cast<char>(s & 0xFF));
        out.push_back(static_cast<char>(s >> 8));
        out.push_back(static_cast<char>(d & 0xFF));
        out.push_back(static_cast<char>(d >> 8));
    }
    return out;
}

Image decode_image(const std::string& bytes, int width, int height, int camera_index)
{
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() != n * 4) {
        throw ParseError("image payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(n * 4));
    }
    Image img = Image::blank(width, height, camera_index);
    const auto byte = [&bytes](std::size_t i) { return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[i])); };
    for (std::size_t p = 0; p < n; ++p) {
        img.semantic[p] = static_cast<std::uint16_t>(byte(4 * p) | (byte(4 * p + 1) << 8));
        img.depth[p] = static_cast<std::uint16_t>(byte(4 * p + 2) | (byte(4 * p + 3) << 8));
    }
    return img;
}

} // namespace xenav
