#include "xenav/embodiment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xenav/errors.hpp"
#include "xenav/geometry.hpp"
#include "xenav/rng.hpp"

namespace xenav {

std::array<CameraRanges, 2> SamplingRanges::default_camera_ranges()
{
    CameraRanges first;
    CameraRanges second;
    second.pitch = {-20.0, 60.0};
    second.yaw = {0.0, 360.0};
    return {first, second};
}

namespace {

void check_interval(const Interval& i, const char* name)
{
    if (!std::isfinite(i.lo) || !std::isfinite(i.hi) || i.lo > i.hi) {
        std::ostringstream os;
        os << "sampling range '" << name << "' is empty: [" << i.lo << ", " << i.hi << "]";
        throw RangeError(os.str());
    }
}

double sample(Rng& rng, const Interval& i) { return rng.uniform(i.lo, i.hi); }

int sample_pixels(Rng& rng, const Interval& i)
{
    return static_cast<int>(rng.uniform_int(static_cast<std::int64_t>(std::ceil(i.lo)),
                                            static_cast<std::int64_t>(std::floor(i.hi))));
}

} // namespace

void check_ranges(const SamplingRanges& r)
{
    check_interval(r.collider_x, "collider_x");
    check_interval(r.collider_y, "collider_y");
    check_interval(r.collider_z, "collider_z");
    check_interval(r.pivot_x_frac, "pivot_x");
    check_interval(r.pivot_z_frac, "pivot_z");
    if (r.collider_x.lo <= 0.0 || r.collider_y.lo <= 0.0 || r.collider_z.lo <= 0.0) {
        throw RangeError("collider ranges must be strictly positive");
    }
    if (r.pivot_x_frac.lo < -0.5 || r.pivot_x_frac.hi > 0.5 || r.pivot_z_frac.lo < -0.5 ||
        r.pivot_z_frac.hi > 0.5) {
        throw RangeError("pivot fractions must lie within [-0.5, 0.5] of the collider");
    }
    for (const auto& c : r.cameras) {
        check_interval(c.vfov, "vfov");
        check_interval(c.hfov, "hfov");
        check_interval(c.pitch, "pitch");
        check_interval(c.yaw, "yaw");
        check_interval(c.pos_x_frac, "pos_x");
        check_interval(c.height, "height");
        check_interval(c.pos_z_frac, "pos_z");
        check_interval(c.width, "width");
        check_interval(c.image_height, "image_height");
        if (c.vfov.lo <= 0.0 || c.vfov.hi >= 180.0 || c.hfov.lo <= 0.0 || c.hfov.hi >= 180.0) {
            throw RangeError("field of view ranges must lie inside (0, 180)");
        }
        if (c.height.lo <= 0.0) {
            throw RangeError("camera height range must be positive");
        }
        if (c.pos_x_frac.lo < -0.5 || c.pos_x_frac.hi > 0.5 || c.pos_z_frac.lo < -0.5 ||
            c.pos_z_frac.hi > 0.5) {
            throw RangeError("camera position fractions must lie within [-0.5, 0.5]");
        }
        if (std::ceil(c.width.lo) > std::floor(c.width.hi) || c.width.lo < 1.0 ||
            std::ceil(c.image_height.lo) > std::floor(c.image_height.hi) || c.image_height.lo < 1.0) {
            throw RangeError("image size ranges must contain a positive integer");
        }
    }
    if (r.cameras[0].yaw.lo != 0.0 || r.cameras[0].yaw.hi != 0.0) {
        throw RangeError("the first camera always faces forward (yaw range must be [0, 0])");
    }
    if (!(r.two_camera_probability >= 0.0 && r.two_camera_probability <= 1.0)) {
        throw RangeError("two_camera_probability must lie in [0, 1]");
    }
    for (const auto& c : r.cameras) {
        if (c.height.lo > r.collider_y.hi) {
            throw RangeError("camera height range lies above every admissible collider height");
        }
    }
}

EmbodimentConfig sample_embodiment(std::uint64_t seed, const SamplingRanges& ranges)
{
    check_ranges(ranges);
    Rng rng(seed);

    EmbodimentConfig e;
    const bool two = rng.bernoulli(ranges.two_camera_probability);
    const std::size_t n_cams = two ? 2 : 1;

    // The collider must be tall enough to hold every camera at its lowest admissible height.
    double y_lo = ranges.collider_y.lo;
    for (std::size_t i = 0; i < n_cams; ++i) {
        y_lo = std::max(y_lo, ranges.cameras[i].height.lo);
    }

    e.collider.x = sample(rng, ranges.collider_x);
    e.collider.y = sample(rng, {y_lo, ranges.collider_y.hi});
    e.collider.z = sample(rng, ranges.collider_z);
    e.pivot_x = sample(rng, ranges.pivot_x_frac) * e.collider.x;
    e.pivot_z = sample(rng, ranges.pivot_z_frac) * e.collider.z;

    for (std::size_t i = 0; i < n_cams; ++i) {
        const CameraRanges& cr = ranges.cameras[i];
        CameraConfig c;
        c.pos_x = sample(rng, cr.pos_x_frac) * e.collider.x;
        c.pos_y = sample(rng, {cr.height.lo, std::min(cr.height.hi, e.collider.y)});
        c.pos_z = sample(rng, cr.pos_z_frac) * e.collider.z;
        c.pitch = sample(rng, cr.pitch);
        c.yaw = i == 0 ? 0.0 : normalize_heading(sample(rng, cr.yaw));
        c.hfov = sample(rng, cr.hfov);
        c.vfov = sample(rng, cr.vfov);
        c.width = sample_pixels(rng, cr.width);
        c.height = sample_pixels(rng, cr.image_height);
        e.cameras.push_back(c);
    }

    std::ostringstream id;
    id << "random-" << std::hex << seed;
    e.id = id.str();
    return e;
}

namespace {

struct PresetRow
{
    std::string_view name;
    double body_x_cm, body_z_cm, body_y_cm;
    double vfov, hfov, cam_height_cm, pitch;
    int cameras;
};

// Body dimension columns are read as width x depth x height.
constexpr std::array<PresetRow, 6> kPresets = {{
    {"stretch_re1", 33, 34, 141, 59, 90, 140, 27, 2},
    {"stretch_factory", 33, 34, 141, 69, 42, 130, 30, 1},
    {"locobot", 35, 35, 89, 42, 68, 87, 0, 1},
    {"unitree_go1", 64.5, 28, 40, 42, 68, 28, 0, 1},
    {"rby1_standing", 60, 69, 140, 73, 53, 140, 0, 1},
    {"rby1_seated", 60, 69, 92, 73, 53, 92, 0, 1},
}};

constexpr int kPresetImageHeight = 224;

} // namespace

EmbodimentConfig preset_embodiment(std::string_view name)
{
    for (const auto& row : kPresets) {
        if (row.name != name) {
            continue;
        }
        EmbodimentConfig e;
        e.id = std::string(name);
        e.collider = {row.body_x_cm / 100.0, row.body_y_cm / 100.0, row.body_z_cm / 100.0};
        CameraConfig c;
        c.pos_y = row.cam_height_cm / 100.0;
        c.pitch = row.pitch;
        c.hfov = row.hfov;
        c.vfov = row.vfov;
        c.height = kPresetImageHeight;
        // Square pixels: the width follows from the two fields of view.
        c.width = static_cast<int>(std::lround(kPresetImageHeight * std::tan(deg2rad(row.hfov / 2)) /
                                               std::tan(deg2rad(row.vfov / 2))));
        e.cameras.push_back(c);
        if (row.cameras == 2) {
            CameraConfig side = c;
            side.yaw = 90.0;
            e.cameras.push_back(side);
        }
        return e;
    }
    throw LookupError("unknown embodiment preset '" + std::string(name) + "'");
}

ConfigVector config_vector(const EmbodimentConfig& e)
{
    ConfigVector v{};
    v[0] = e.collider.x;
    v[1] = e.collider.y;
    v[2] = e.collider.z;
    v[3] = e.pivot_x;
    v[4] = e.pivot_z;
    for (std::size_t slot = 0; slot < 2 && slot < e.cameras.size(); ++slot) {
        const CameraConfig& c = e.cameras[slot];
        double* s = v.data() + 5 + slot * 9;
        s[0] = 1.0;
        s[1] = c.pos_x;
        s[2] = c.pos_y;
        s[3] = c.pos_z;
        s[4] = c.pitch;
        s[5] = c.yaw;
        s[6] = c.hfov;
        s[7] = c.vfov;
        s[8] = static_cast<double>(c.width) / static_cast<double>(c.height);
    }
    v[23] = static_cast<double>(std::min<std::size_t>(e.cameras.size(), 2));
    return v;
}

const ConfigVector& config_vector_scale()
{
    static const ConfigVector scale = [] {
        const SamplingRanges d;
        ConfigVector s{};
        s[0] = d.collider_x.width();
        s[1] = d.collider_y.width();
        s[2] = d.collider_z.width();
        s[3] = d.pivot_x_frac.width() * d.collider_x.hi;
        s[4] = d.pivot_z_frac.width() * d.collider_z.hi;
        const double min_aspect = d.cameras[0].width.lo / d.cameras[0].image_height.hi;
        const double max_aspect = d.cameras[0].width.hi / d.cameras[0].image_height.lo;
        for (std::size_t slot = 0; slot < 2; ++slot) {
            const CameraRanges& c = d.cameras[slot];
            double* p = s.data() + 5 + slot * 9;
            p[0] = 1.0;
            p[1] = c.pos_x_frac.width() * d.collider_x.hi;
            p[2] = c.height.width();
            p[3] = c.pos_z_frac.width() * d.collider_z.hi;
            p[4] = c.pitch.width();
            p[5] = c.yaw.width();
            p[6] = c.hfov.width();
            p[7] = c.vfov.width();
            p[8] = max_aspect - min_aspect;
        }
        s[23] = 1.0;
        for (double& x : s) {
            if (x <= 0.0) {
                x = 1.0;  // fixed parameters (first camera yaw)
            }
        }
        return s;
    }();
    return scale;
}

double embodiment_distance(const EmbodimentConfig& a, const EmbodimentConfig& b)
{
    const ConfigVector va = config_vector(a);
    const ConfigVector vb = config_vector(b);
    const ConfigVector& scale = config_vector_scale();
    double sum = 0.0;
    for (std::size_t i = 0; i < kConfigVectorSize; ++i) {
        const double d = (va[i] - vb[i]) / scale[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

namespace {

using IntervalRef = std::function<std::vector<Interval*>(SamplingRanges&)>;

const std::map<std::string, IntervalRef, std::less<>>& filter_table()
{
    static const std::map<std::string, IntervalRef, std::less<>> table = [] {
        std::map<std::string, IntervalRef, std::less<>> t;
        t["collider_x"] = [](SamplingRanges& r) { return std::vector<Interval*>{&r.collider_x}; };
        t["collider_y"] = [](SamplingRanges& r) { return std::vector<Interval*>{&r.collider_y}; };
        t["collider_z"] = [](SamplingRanges& r) { return std::vector<Interval*>{&r.collider_z}; };
        t["collider_size"] = [](SamplingRanges& r) {
            return std::vector<Interval*>{&r.collider_x, &r.collider_z};
        };
        t["pivot_x"] = [](SamplingRanges& r) { return std::vector<Interval*>{&r.pivot_x_frac}; };
        t["pivot_z"] = [](SamplingRanges& r) { return std::vector<Interval*>{&r.pivot_z_frac}; };

        using Member = Interval CameraRanges::*;
        const std::pair<const char*, Member> members[] = {
            {"vfov", &CameraRanges::vfov},         {"hfov", &CameraRanges::hfov},
            {"pitch", &CameraRanges::pitch},       {"yaw", &CameraRanges::yaw},
            {"pos_x", &CameraRanges::pos_x_frac},  {"height", &CameraRanges::height},
            {"pos_z", &CameraRanges::pos_z_frac},  {"width", &CameraRanges::width},
            {"image_height", &CameraRanges::image_height},
        };
        for (const auto& [suffix, member] : members) {
            for (std::size_t cam = 0; cam < 2; ++cam) {
                const std::string key = "cam" + std::to_string(cam + 1) + "_" + suffix;
                t[key] = [cam, member](SamplingRanges& r) {
                    return std::vector<Interval*>{&(r.cameras[cam].*member)};
                };
            }
        }
        t["camera_height"] = [](SamplingRanges& r) {
            return std::vector<Interval*>{&r.cameras[0].height, &r.cameras[1].height};
        };
        t["camera_pitch"] = [](SamplingRanges& r) {
            return std::vector<Interval*>{&r.cameras[0].pitch, &r.cameras[1].pitch};
        };
        t["camera_fov"] = [](SamplingRanges& r) {
            return std::vector<Interval*>{&r.cameras[0].vfov, &r.cameras[0].hfov,
                                          &r.cameras[1].vfov, &r.cameras[1].hfov};
        };
        t["camera_vfov"] = [](SamplingRanges& r) {
            return std::vector<Interval*>{&r.cameras[0].vfov, &r.cameras[1].vfov};
        };
        t["camera_hfov"] = [](SamplingRanges& r) {
            return std::vector<Interval*>{&r.cameras[0].hfov, &r.cameras[1].hfov};
        };
        return t;
    }();
    return table;
}

} // namespace

std::vector<std::string> filterable_parameters()
{
    std::vector<std::string> names;
    for (const auto& [name, _] : filter_table()) {
        names.push_back(name);
    }
    return names;
}

SamplingRanges filter_ranges(const SamplingRanges& ranges, std::string_view parameter, Interval interval)
{
    const auto it = filter_table().find(parameter);
    if (it == filter_table().end()) {
        throw LookupError("unknown sampling parameter '" + std::string(parameter) + "'");
    }
    if (!(interval.lo <= interval.hi)) {
        throw RangeError("narrowed interval is empty");
    }
    SamplingRanges out = ranges;
    for (Interval* target : it->second(out)) {
        if (!target->contains(interval)) {
            std::ostringstream os;
            os << "interval [" << interval.lo << ", " << interval.hi << "] for '" << parameter
               << "' is not inside the existing range [" << target->lo << ", " << target->hi << "]";
            throw RangeError(os.str());
        }
        *target = interval;
    }
    check_ranges(out);
    return out;
}

std::vector<std::string> validate(const EmbodimentConfig& e)
{
    std::vector<std::string> v;
    const Collider& a = e.collider;
    if (!(a.x > 0.0 && a.y > 0.0 && a.z > 0.0)) {
        v.emplace_back("collider dimensions must be positive");
    }
    if (std::abs(e.pivot_x) > a.x / 2 || std::abs(e.pivot_z) > a.z / 2) {
        v.emplace_back("pivot outside footprint");
    }
    if (e.cameras.empty() || e.cameras.size() > 2) {
        v.emplace_back("embodiment must carry one or two cameras");
    }
    for (std::size_t i = 0; i < e.cameras.size(); ++i) {
        const CameraConfig& c = e.cameras[i];
        const std::string tag = "camera " + std::to_string(i + 1) + ": ";
        if (!(c.hfov > 0.0 && c.hfov < 180.0 && c.vfov > 0.0 && c.vfov < 180.0)) {
            v.push_back(tag + "field of view outside (0, 180)");
        }
        if (c.width < 1 || c.height < 1) {
            v.push_back(tag + "image size must be at least 1x1");
        }
        if (c.pos_y > a.y) {
            v.push_back(tag + "camera above collider");
        }
        if (c.pos_y <= 0.0) {
            v.push_back(tag + "camera at or below the floor");
        }
        if (std::abs(c.pos_x) > a.x / 2 || std::abs(c.pos_z) > a.z / 2) {
            v.push_back(tag + "camera outside collider footprint");
        }
        if (i == 0 && c.yaw != 0.0) {
            v.push_back(tag + "first camera yaw must be 0");
        }
        if (i == 1 && !(c.yaw >= 0.0 && c.yaw < 360.0)) {
            v.push_back(tag + "yaw outside [0, 360)");
        }
        if (!std::isfinite(c.pitch)) {
            v.push_back(tag + "pitch is not finite");
        }
    }
    return v;
}

// JSON ---------------------------------------------------------------------

void to_json(nlohmann::json& j, const CameraConfig& c)
{
    j = nlohmann::json{{"pos_x", c.pos_x}, {"pos_y", c.pos_y}, {"pos_z", c.pos_z},
                       {"pitch", c.pitch}, {"yaw", c.yaw},     {"hfov", c.hfov},
                       {"vfov", c.vfov},   {"width", c.width}, {"height", c.height}};
}

void from_json(const nlohmann::json& j, CameraConfig& c)
{
    j.at("pos_x").get_to(c.pos_x);
    j.at("pos_y").get_to(c.pos_y);
    j.at("pos_z").get_to(c.pos_z);
    j.at("pitch").get_to(c.pitch);
    j.at("yaw").get_to(c.yaw);
    j.at("hfov").get_to(c.hfov);
    j.at("vfov").get_to(c.vfov);
    j.at("width").get_to(c.width);
    j.at("height").get_to(c.height);
}

void to_json(nlohmann::json& j, const EmbodimentConfig& e)
{
    j = nlohmann::json{{"collider", {e.collider.x, e.collider.y, e.collider.z}},
                       {"pivot", {e.pivot_x, e.pivot_z}},
                       {"cameras", e.cameras},
                       {"id", e.id}};
}

void from_json(const nlohmann::json& j, EmbodimentConfig& e)
{
    const auto& col = j.at("collider");
    const auto& piv = j.at("pivot");
    if (!col.is_array() || col.size() != 3 || !piv.is_array() || piv.size() != 2) {
        throw ParseError("embodiment: 'collider' must have 3 entries and 'pivot' 2");
    }
    e.collider = {col[0].get<double>(), col[1].get<double>(), col[2].get<double>()};
    e.pivot_x = piv[0].get<double>();
    e.pivot_z = piv[1].get<double>();
    e.cameras = j.at("cameras").get<std::vector<CameraConfig>>();
    e.id = j.value("id", std::string{});
}

void to_json(nlohmann::json& j, const Interval& i) { j = nlohmann::json::array({i.lo, i.hi}); }

void from_json(const nlohmann::json& j, Interval& i)
{
    if (!j.is_array() || j.size() != 2) {
        throw ParseError("interval must be a [lo, hi] pair");
    }
    i = {j[0].get<double>(), j[1].get<double>()};
}

namespace {

void to_json(nlohmann::json& j, const CameraRanges& c)
{
    j = nlohmann::json{{"vfov", c.vfov},           {"hfov", c.hfov},         {"pitch", c.pitch},
                       {"yaw", c.yaw},             {"pos_x", c.pos_x_frac},  {"height", c.height},
                       {"pos_z", c.pos_z_frac},    {"width", c.width},
                       {"image_height", c.image_height}};
}

void from_json(const nlohmann::json& j, CameraRanges& c)
{
    const CameraRanges defaults = c;
    c.vfov = j.value("vfov", defaults.vfov);
    c.hfov = j.value("hfov", defaults.hfov);
    c.pitch = j.value("pitch", defaults.pitch);
    c.yaw = j.value("yaw", defaults.yaw);
    c.pos_x_frac = j.value("pos_x", defaults.pos_x_frac);
    c.height = j.value("height", defaults.height);
    c.pos_z_frac = j.value("pos_z", defaults.pos_z_frac);
    c.width = j.value("width", defaults.width);
    c.image_height = j.value("image_height", defaults.image_height);
}

} // namespace

void to_json(nlohmann::json& j, const SamplingRanges& r)
{
    nlohmann::json cams = nlohmann::json::array();
    for (const auto& c : r.cameras) {
        nlohmann::json cj;
        to_json(cj, c);
        cams.push_back(cj);
    }
    j = nlohmann::json{{"collider_x", r.collider_x},
                       {"collider_y", r.collider_y},
                       {"collider_z", r.collider_z},
                       {"pivot_x", r.pivot_x_frac},
                       {"pivot_z", r.pivot_z_frac},
                       {"cameras", cams},
                       {"two_camera_probability", r.two_camera_probability}};
}

void from_json(const nlohmann::json& j, SamplingRanges& r)
{
    SamplingRanges d;
    r.collider_x = j.value("collider_x", d.collider_x);
    r.collider_y = j.value("collider_y", d.collider_y);
    r.collider_z = j.value("collider_z", d.collider_z);
    r.pivot_x_frac = j.value("pivot_x", d.pivot_x_frac);
    r.pivot_z_frac = j.value("pivot_z", d.pivot_z_frac);
    r.two_camera_probability = j.value("two_camera_probability", d.two_camera_probability);
    r.cameras = d.cameras;
    if (j.contains("cameras")) {
        const auto& cams = j.at("cameras");
        if (!cams.is_array() || cams.size() != 2) {
            throw ParseError("sampling ranges: 'cameras' must list exactly two camera slots");
        }
        for (std::size_t i = 0; i < 2; ++i) {
            from_json(cams[i], r.cameras[i]);
        }
    }
    check_ranges(r);
}

} // namespace xenav
