#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace xenav {

// World frame: x east, z north, y up. Heading is in degrees, 0 faces +z and
// positive angles turn clockwise seen from above.

struct Vec2
{
    double x = 0.0;
    double z = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.z - b.z}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.z}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.z); }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }

struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

/// Axis-aligned rectangle on the floor plane.
struct Rect
{
    double x0 = 0.0;
    double z0 = 0.0;
    double x1 = 0.0;
    double z1 = 0.0;

    bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.z >= z0 && p.z <= z1; }
    Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (z0 + z1)}; }
    friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

/// Euclidean distance from a point to the closest point of a rectangle (0 inside).
inline double distance_to_rect(Vec2 p, const Rect& r)
{
    const double dx = std::max({r.x0 - p.x, 0.0, p.x - r.x1});
    const double dz = std::max({r.z0 - p.z, 0.0, p.z - r.z1});
    return std::hypot(dx, dz);
}

inline bool rects_overlap(const Rect& a, const Rect& b)
{
    return a.x0 < b.x1 && b.x0 < a.x1 && a.z0 < b.z1 && b.z0 < a.z1;
}

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Maps any angle to [0, 360).
inline double normalize_heading(double deg)
{
    double h = std::fmod(deg, 360.0);
    if (h < 0.0) {
        h += 360.0;
    }
    if (h >= 360.0) {
        h = 0.0;
    }
    return h;
}

/// Maps any angle difference to (-180, 180].
inline double wrap_angle(double deg)
{
    double a = std::fmod(deg, 360.0);
    if (a > 180.0) {
        a -= 360.0;
    } else if (a <= -180.0) {
        a += 360.0;
    }
    return a;
}

inline Vec2 heading_forward(double heading_deg)
{
    const double r = deg2rad(heading_deg);
    return {std::sin(r), std::cos(r)};
}

inline Vec2 heading_right(double heading_deg)
{
    const double r = deg2rad(heading_deg);
    return {std::cos(r), -std::sin(r)};
}

/// Heading that faces from `from` toward `to`.
inline double heading_towards(Vec2 from, Vec2 to)
{
    return normalize_heading(rad2deg(std::atan2(to.x - from.x, to.z - from.z)));
}

} // namespace xenav
