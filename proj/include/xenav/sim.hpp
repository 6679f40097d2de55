#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xenav/embodiment.hpp"
#include "xenav/pose.hpp"
#include "xenav/scene.hpp"
#include "xenav/sensor.hpp"

namespace xenav {

/// The discrete action space shared by every embodiment.
enum class Action : std::uint8_t
{
    MoveAhead,
    MoveBack,
    RotateRight30,
    RotateLeft30,
    RotateRight6,
    RotateLeft6,
    Done,
};

inline constexpr std::size_t kActionCount = 7;
inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::MoveAhead,   Action::MoveBack,   Action::RotateRight30, Action::RotateLeft30,
    Action::RotateRight6, Action::RotateLeft6, Action::Done};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);

struct TaskSpec
{
    std::string target_category;
    double success_distance = 2.0;  ///< d
    int max_steps = 600;             ///< n
    double collision_penalty = 0.0;

    std::string instruction() const { return "find a " + target_category; }
    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct SimOptions
{
    double move_distance = 0.2;
    double translate_sample = 0.025;  ///< swept-collision sampling step, meters
    double rotate_sample = 2.0;       ///< swept-collision sampling step, degrees
    double step_penalty = 0.01;
    double success_reward = 10.0;
    int render_width = 0;   ///< > 0 overrides every camera's resolution
    int render_height = 0;
    bool render_observations = true;

    friend bool operator==(const SimOptions&, const SimOptions&) = default;
};

inline constexpr int kDefaultRenderSize = 128;

/// Evaluation defaults: every step rendered at 128 x 128.
inline SimOptions eval_sim_options()
{
    SimOptions o;
    o.render_width = kDefaultRenderSize;
    o.render_height = kDefaultRenderSize;
    return o;
}

/// Expert defaults: same resolution, but images are only rendered when the
/// success check needs them.
inline SimOptions expert_sim_options()
{
    SimOptions o = eval_sim_options();
    o.render_observations = false;
    return o;
}

struct Observation
{
    std::array<Image, 2> images;  ///< the second is all zero for one-camera bodies
    bool last_action_failed = false;
    bool rendered = false;
};

struct StepResult
{
    Observation observation;
    double reward = 0.0;
    bool collision = false;
    bool terminal = false;
    bool success = false;
    double distance = 0.0;  ///< distance to the nearest target after the step
};

/// Episode state. The scene and embodiment are borrowed and must outlive it.
struct SimState
{
    const Scene* scene = nullptr;
    const EmbodimentConfig* embodiment = nullptr;
    Pose pose;
    int steps = 0;
    double min_distance = 0.0;
    int collisions = 0;
    TaskSpec task;
    std::uint64_t seed = 0;
    bool terminal = false;
    bool success = false;
    SimOptions options;
    std::vector<InstanceId> targets;
    Observation observation;
};

/// Exact oriented-rectangle vs blocked-cell overlap. Leaving the world is a collision.
bool check_collision(const Scene& scene, const EmbodimentConfig& e, const Pose& pose);

/// Pivot-to-nearest-footprint-point distance to the closest target instance.
double distance_to_targets(const Scene& scene, std::span<const InstanceId> targets, Vec2 point);

/// Renders both camera slots at the configured resolution.
Observation observe(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, const SimOptions& options);

/// Whether either camera would show one of `ids`, without a full render.
bool targets_in_view(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, const SimOptions& options,
                     std::span<const InstanceId> ids);

/// Throws PlacementError for a colliding start and TaskError when the
/// target category is absent from the scene.
SimState reset(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
               const SimOptions& options = {}, std::uint64_t seed = 0);

/// Advances the episode in place. Throws StateError after termination.
StepResult step(SimState& state, Action a);

/// Whether the action's swept motion would hit something, without stepping.
bool action_blocked(const SimState& state, Action a);

/// Within the success distance of a target instance that shows at least one
/// pixel in either camera.
bool success_check(const SimState& state);

/// One row of an episode trace.
struct TraceStep
{
    Action action = Action::Done;
    bool collision = false;
    double reward = 0.0;
    double distance = 0.0;
    Pose pose;
    bool terminal = false;
    bool success = false;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct EpisodeTrace
{
    Pose start;
    double start_distance = 0.0;
    std::vector<TraceStep> steps;

    friend bool operator==(const EpisodeTrace&, const EpisodeTrace&) = default;
};

void to_json(nlohmann::json& j, const Action& a);
void from_json(const nlohmann::json& j, Action& a);
void to_json(nlohmann::json& j, const Pose& p);
void from_json(const nlohmann::json& j, Pose& p);
void to_json(nlohmann::json& j, const TaskSpec& t);
void from_json(const nlohmann::json& j, TaskSpec& t);
void to_json(nlohmann::json& j, const TraceStep& s);
void from_json(const nlohmann::json& j, TraceStep& s);
void to_json(nlohmann::json& j, const EpisodeTrace& t);
void from_json(const nlohmann::json& j, EpisodeTrace& t);

} // namespace xenav
