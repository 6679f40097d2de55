#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xenav/embodiment.hpp"
#include "xenav/pose.hpp"
#include "xenav/scene.hpp"

namespace xenav {

inline constexpr std::uint16_t kNoHitDepth = 65535;
inline constexpr double kMaxRange = 20.0;

/// Semantic + depth image. Row-major, top row first.
struct Image
{
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> semantic;  ///< instance id, 0 = none
    std::vector<std::uint16_t> depth;     ///< millimeters, kNoHitDepth = no hit
    int camera_index = 0;

    static Image blank(int width, int height, int camera_index);
    /// All-zero mask image used for an absent second camera.
    static Image masked(int width, int height, int camera_index);

    std::size_t pixels() const { return semantic.size(); }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Ray-marched render from one camera. `width`/`height` override the camera's
/// own resolution when positive (the fields of view are kept).
/// Throws IndexError if the camera index is out of range.
Image render(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, std::size_t cam, int width = 0,
             int height = 0);

/// Whether any pixel of the given render would show one of `ids`. Traces only
/// the pixels covering each instance's bounding box, so it agrees with
/// render() but costs far less.
bool targets_visible(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, std::size_t cam,
                     std::span<const InstanceId> ids, int width = 0, int height = 0);

/// Result of tracing a single ray.
struct RayHit
{
    double distance = 0.0;
    InstanceId instance = kNoInstance;
    bool hit = false;
};

/// Exact cell traversal of one ray; `dir` must be unit length.
RayHit trace_ray(const Scene& scene, const Vec3& origin, const Vec3& dir, double max_range = kMaxRange);

std::set<InstanceId> visible_instances(const Image& img);

/// Center-pads to a square with empty pixels, then nearest-neighbor resizes to side x side.
Image pad_to_square(const Image& img, int side);

/// Little-endian layout: per pixel u16 semantic then u16 depth.
std::string encode_image(const Image& img);
Image decode_image(const std::string& bytes, int width, int height, int camera_index);

} // namespace xenav
