#include "xenav/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>

namespace xenav {

namespace {

std::string escape_xml(std::string_view s)
{
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

} // namespace

std::string category_color(std::string_view category)
{
    if (category == kWallCategory) {
        return "#404040";
    }
    std::uint32_t h = 2166136261u;
    for (const char c : category) {
        h = (h ^ static_cast<unsigned char>(c)) * 16777619u;
    }
    // Hue from the hash, fixed saturation and lightness.
    const double hue = (h % 360) / 60.0;
    const double sat = 0.55;
    const double light = 0.6;
    const double chroma = (1.0 - std::abs(2.0 * light - 1.0)) * sat;
    const double x = chroma * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hue)) {
    case 0:
        r = chroma, g = x;
        break;
    case 1:
        r = x, g = chroma;
        break;
    case 2:
        g = chroma, b = x;
        break;
    case 3:
        g = x, b = chroma;
        break;
    case 4:
        r = x, b = chroma;
        break;
    default:
        r = chroma, b = x;
    }
    const double m = light - chroma / 2.0;
    auto byte = [&](double v) { return static_cast<int>(std::lround((v + m) * 255.0)); };
    return fmt("#%02x%02x%02x", byte(r), byte(g), byte(b));
}

std::string plot_svg(const Scene& scene, const PlotLayers& layers, double ppm)
{
    const Rect b = scene.bounds();
    const double margin = 20.0;
    const double header = layers.title.empty() ? 0.0 : 24.0;
    const double w = (b.x1 - b.x0) * ppm + 2 * margin;
    const double h = (b.z1 - b.z0) * ppm + 2 * margin + header;
    auto sx = [&](double x) { return margin + (x - b.x0) * ppm; };
    auto sy = [&](double z) { return header + margin + (b.z1 - z) * ppm; };

    std::string out;
    out += fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n", w,
               h, w, h);
    out += fmt("<rect x=\"0\" y=\"0\" width=\"%.0f\" height=\"%.0f\" fill=\"#ffffff\"/>\n", w, h);
    if (!layers.title.empty()) {
        out += fmt("<text x=\"%.1f\" y=\"18\" font-family=\"monospace\" font-size=\"14\">", margin) +
               escape_xml(layers.title) + "</text>\n";
    }
    out += fmt("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"#f4f1ea\" stroke=\"#999999\"/>\n",
               sx(b.x0), sy(b.z1), (b.x1 - b.x0) * ppm, (b.z1 - b.z0) * ppm);

    out += "<g id=\"instances\">\n";
    for (const Instance& inst : scene.instances()) {
        const Rect& f = inst.footprint;
        const bool target = std::find(layers.target_categories.begin(), layers.target_categories.end(),
                                      inst.category) != layers.target_categories.end();
        out += fmt("<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\" fill-opacity=\"%.2f\"%s>",
                   sx(f.x0), sy(f.z1), (f.x1 - f.x0) * ppm, (f.z1 - f.z0) * ppm,
                   category_color(inst.category).c_str(), inst.category == kWallCategory ? 1.0 : 0.6,
                   target ? " stroke=\"#d00000\" stroke-width=\"2\"" : "");
        out += "<title>" + escape_xml(inst.category) + " #" + std::to_string(inst.id) + "</title></rect>\n";
    }
    out += "</g>\n";

    auto polyline = [&](const std::vector<Vec2>& pts, const char* id, const char* color, double width,
                        const char* dash) {
        if (pts.size() < 2) {
            return;
        }
        out += fmt("<polyline id=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"%.1f\"%s points=\"", id, color,
                   width, dash);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            out += fmt(i == 0 ? "%.2f,%.2f" : " %.2f,%.2f", sx(pts[i].x), sy(pts[i].z));
        }
        out += "\"/>\n";
    };
    polyline(layers.planned_path, "planned", "#1f5fbf", 1.5, " stroke-dasharray=\"4 3\"");
    std::vector<Vec2> executed;
    for (const Pose& p : layers.executed) {
        executed.push_back(p.position());
    }
    polyline(executed, "executed", "#13853a", 2.5, "");

    out += "<g id=\"waypoints\">\n";
    for (const Vec2& p : layers.waypoints) {
        out += fmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"#f08c00\"/>\n", sx(p.x), sy(p.z));
    }
    out += "</g>\n";
    if (!layers.executed.empty()) {
        const Pose& s = layers.executed.front();
        const Pose& e = layers.executed.back();
        out += fmt("<circle id=\"start\" cx=\"%.2f\" cy=\"%.2f\" r=\"6\" fill=\"none\" stroke=\"#000000\" "
                   "stroke-width=\"2\"/>\n",
                   sx(s.x), sy(s.z));
        const double rad = e.heading * M_PI / 180.0;
        out += fmt("<line id=\"end\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#000000\" "
                   "stroke-width=\"2\"/>\n",
                   sx(e.x), sy(e.z), sx(e.x + 0.3 * std::sin(rad)), sy(e.z + 0.3 * std::cos(rad)));
    }
    out += "</svg>\n";
    return out;
}

} // namespace xenav
