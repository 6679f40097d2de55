#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace xenav {

/// Pinhole camera mounted inside the collider box.
struct CameraConfig
{
    double pos_x = 0.0;  ///< lateral offset from the collider center, meters (+ = right)
    double pos_y = 0.5;  ///< height above the floor, meters
    double pos_z = 0.0;  ///< longitudinal offset from the collider center, meters (+ = forward)
    double pitch = 0.0;  ///< degrees, downward positive
    double yaw = 0.0;    ///< degrees clockwise from the body forward axis
    double hfov = 90.0;  ///< degrees
    double vfov = 60.0;  ///< degrees
    int width = 128;
    int height = 128;

    friend bool operator==(const CameraConfig&, const CameraConfig&) = default;
};

struct Collider
{
    double x = 0.3;  ///< width (lateral), meters
    double y = 1.0;  ///< height, meters
    double z = 0.3;  ///< depth (longitudinal), meters

    friend bool operator==(const Collider&, const Collider&) = default;
};

struct EmbodimentConfig
{
    Collider collider;
    double pivot_x = 0.0;  ///< rotation center relative to the footprint center, lateral
    double pivot_z = 0.0;  ///< rotation center relative to the footprint center, longitudinal
    std::vector<CameraConfig> cameras;  ///< 1 or 2
    std::string id;

    friend bool operator==(const EmbodimentConfig&, const EmbodimentConfig&) = default;
};

struct Interval
{
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    bool contains(const Interval& o) const { return o.lo >= lo && o.hi <= hi; }
    double width() const { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Per-camera-slot sampling intervals. Positions in x/z are fractions of the
/// realized collider dimension; height is absolute but capped at the collider top.
struct CameraRanges
{
    Interval vfov{40.0, 100.0};
    Interval hfov{40.0, 120.0};
    Interval pitch{-20.0, 40.0};
    Interval yaw{0.0, 0.0};
    Interval pos_x_frac{-0.5, 0.5};
    Interval height{0.3, 1.5};
    Interval pos_z_frac{-0.5, 0.5};
    Interval width{112.0, 448.0};
    Interval image_height{112.0, 448.0};

    friend bool operator==(const CameraRanges&, const CameraRanges&) = default;
};

/// Closed sampling intervals for every randomized embodiment parameter.
struct SamplingRanges
{
    Interval collider_x{0.2, 0.5};
    Interval collider_y{0.3, 1.5};
    Interval collider_z{0.2, 0.5};
    Interval pivot_x_frac{-1.0 / 3.0, 1.0 / 3.0};
    Interval pivot_z_frac{-1.0 / 3.0, 1.0 / 3.0};
    std::array<CameraRanges, 2> cameras = default_camera_ranges();
    double two_camera_probability = 0.5;

    static std::array<CameraRanges, 2> default_camera_ranges();

    friend bool operator==(const SamplingRanges&, const SamplingRanges&) = default;
};

/// Throws RangeError when an interval is empty or inconsistent.
void check_ranges(const SamplingRanges& ranges);

EmbodimentConfig sample_embodiment(std::uint64_t seed, const SamplingRanges& ranges = {});

inline constexpr std::array<std::string_view, 6> kPresetNames = {
    "stretch_re1", "stretch_factory", "locobot", "unitree_go1", "rby1_standing", "rby1_seated"};

/// Real-robot parameter presets. Throws LookupError on an unknown name.
EmbodimentConfig preset_embodiment(std::string_view name);

inline constexpr std::size_t kConfigVectorSize = 24;
using ConfigVector = std::array<double, kConfigVectorSize>;

/// Fixed layout: [ax, ay, az, ox, oz] then two camera slots of
/// [present, pos_x, pos_y, pos_z, pitch, yaw, hfov, vfov, width/height],
/// then the camera count. Absent slots are zero.
ConfigVector config_vector(const EmbodimentConfig& e);

/// Per-dimension scale used by embodiment_distance (default range widths).
const ConfigVector& config_vector_scale();

double embodiment_distance(const EmbodimentConfig& a, const EmbodimentConfig& b);

/// Parameter names accepted by filter_ranges. Group names ("camera_height",
/// "camera_fov", "camera_pitch", "collider_size") narrow every member.
std::vector<std::string> filterable_parameters();

SamplingRanges filter_ranges(const SamplingRanges& ranges, std::string_view parameter, Interval interval);

/// Every violated invariant as a human readable message; empty means valid.
std::vector<std::string> validate(const EmbodimentConfig& e);

void to_json(nlohmann::json& j, const CameraConfig& c);
void from_json(const nlohmann::json& j, CameraConfig& c);
void to_json(nlohmann::json& j, const EmbodimentConfig& e);
void from_json(const nlohmann::json& j, EmbodimentConfig& e);
void to_json(nlohmann::json& j, const Interval& i);
void from_json(const nlohmann::json& j, Interval& i);
void to_json(nlohmann::json& j, const SamplingRanges& r);
void from_json(const nlohmann::json& j, SamplingRanges& r);

} // namespace xenav
