#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "xenav/geometry.hpp"
#include "xenav/pose.hpp"
#include "xenav/scene.hpp"

namespace xenav {

struct PlotLayers
{
    std::string title;
    std::vector<std::string> target_categories;  ///< outlined in red
    std::vector<Vec2> planned_path;
    std::vector<Vec2> waypoints;
    std::vector<Pose> executed;
};

/// Stable "#rrggbb" color for a category name.
std::string category_color(std::string_view category);

/// Top-down SVG: instance footprints colored by category, the planned path,
/// its waypoints and the executed poses. North is up.
std::string plot_svg(const Scene& scene, const PlotLayers& layers, double pixels_per_meter = 80.0);

} // namespace xenav
