#pragma once

#include "xenav/embodiment.hpp"
#include "xenav/geometry.hpp"

namespace xenav {

/// Agent state on the floor plane: the rotation pivot location and heading.
struct Pose
{
    double x = 0.0;
    double z = 0.0;
    double heading = 0.0;  ///< degrees in [0, 360)

    Vec2 position() const { return {x, z}; }
    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Center of the collider footprint. The pivot sits at (pivot_x, pivot_z) in the
/// body frame, so the center is the pose minus the rotated pivot offset.
inline Vec2 collider_center(const EmbodimentConfig& e, const Pose& p)
{
    const Vec2 f = heading_forward(p.heading);
    const Vec2 r = heading_right(p.heading);
    return p.position() - (e.pivot_x * r + e.pivot_z * f);
}

struct CameraPlacement
{
    Vec3 position;
    double heading = 0.0;  ///< absolute yaw of the optical axis
    double pitch = 0.0;    ///< downward positive
};

inline CameraPlacement camera_placement(const EmbodimentConfig& e, const Pose& p, const CameraConfig& c)
{
    const Vec2 center = collider_center(e, p);
    const Vec2 f = heading_forward(p.heading);
    const Vec2 r = heading_right(p.heading);
    const Vec2 at = center + c.pos_x * r + c.pos_z * f;
    return {{at.x, c.pos_y, at.z}, normalize_heading(p.heading + c.yaw), c.pitch};
}

} // namespace xenav
