#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "xenav/embodiment.hpp"
#include "xenav/scene.hpp"

namespace xenav::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("xenav-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Walled square room of side `meters` with nothing inside.
inline SceneBuilder open_room(double meters, double wall = 0.1, std::uint64_t seed = 0)
{
    const int n = static_cast<int>(meters / 0.05 + 0.5);
    SceneBuilder b(0.05, n, n, seed);
    b.add_block("wall", {0, 0, meters, wall}, 0.0, 2.0);
    b.add_block("wall", {0, meters - wall, meters, meters}, 0.0, 2.0);
    b.add_block("wall", {0, 0, wall, meters}, 0.0, 2.0);
    b.add_block("wall", {meters - wall, 0, meters, meters}, 0.0, 2.0);
    return b;
}

/// Box body with one forward camera near its top.
inline EmbodimentConfig box_body(double w, double h, double d, double pitch = 10.0)
{
    EmbodimentConfig e;
    e.collider = {w, h, d};
    CameraConfig c;
    c.pos_y = h - 0.05;
    c.pitch = pitch;
    c.hfov = 90.0;
    c.vfov = 60.0;
    e.cameras = {c};
    e.id = "box";
    return e;
}

} // namespace xenav::testing
