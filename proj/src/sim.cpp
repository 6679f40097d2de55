#include "xenav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "xenav/errors.hpp"

namespace xenav {

namespace {

constexpr std::array<std::string_view, kActionCount> kActionNames = {
    "MoveAhead", "MoveBack", "RotateRight30", "RotateLeft30", "RotateRight6", "RotateLeft6", "Done"};

constexpr double kTouchEps = 1e-9;

} // namespace

std::string_view action_name(Action a) { return kActionNames[static_cast<std::size_t>(a)]; }

std::optional<Action> parse_action(std::string_view name)
{
    for (std::size_t i = 0; i < kActionCount; ++i) {
        if (kActionNames[i] == name) {
            return static_cast<Action>(i);
        }
    }
    return std::nullopt;
}

bool check_collision(const Scene& scene, const EmbodimentConfig& e, const Pose& pose)
{
    if (!std::isfinite(pose.x) || !std::isfinite(pose.z) || !std::isfinite(pose.heading)) {
        return true;
    }
    const double cs = scene.cell_size();
    const Vec2 c = collider_center(e, pose);
    const Vec2 f = heading_forward(pose.heading);
    const Vec2 r = heading_right(pose.heading);
    const double hx = e.collider.x / 2.0;
    const double hz = e.collider.z / 2.0;

    const double ex = std::abs(r.x) * hx + std::abs(f.x) * hz;
    const double ez = std::abs(r.z) * hx + std::abs(f.z) * hz;
    const Rect world = scene.bounds();
    if (c.x - ex < world.x0 - kTouchEps || c.x + ex > world.x1 + kTouchEps || c.z - ez < world.z0 - kTouchEps ||
        c.z + ez > world.z1 + kTouchEps) {
        return true;
    }

    const int ix0 = std::max(0, static_cast<int>(std::floor((c.x - ex) / cs)));
    const int ix1 = std::min(scene.nx() - 1, static_cast<int>(std::floor((c.x + ex) / cs)));
    const int iz0 = std::max(0, static_cast<int>(std::floor((c.z - ez) / cs)));
    const int iz1 = std::min(scene.nz() - 1, static_cast<int>(std::floor((c.z + ez) / cs)));
    const double half = cs / 2.0;
    // Projection radius of an axis-aligned square onto the rectangle axes.
    const double cell_on_r = half * (std::abs(r.x) + std::abs(r.z));
    const double cell_on_f = half * (std::abs(f.x) + std::abs(f.z));

    for (int iz = iz0; iz <= iz1; ++iz) {
        for (int ix = ix0; ix <= ix1; ++ix) {
            if (!scene.blocks(scene.cell_index(ix, iz), e.collider.y)) {
                continue;
            }
            const Vec2 d{(ix + 0.5) * cs - c.x, (iz + 0.5) * cs - c.z};
            // Separating axis test: world axes, then the rectangle axes.
            if (std::abs(d.x) >= half + ex - kTouchEps || std::abs(d.z) >= half + ez - kTouchEps) {
                continue;
            }
            if (std::abs(dot(d, r)) >= hx + cell_on_r - kTouchEps) {
                continue;
            }
            if (std::abs(dot(d, f)) >= hz + cell_on_f - kTouchEps) {
                continue;
            }
            return true;
        }
    }
    return false;
}

double distance_to_targets(const Scene& scene, std::span<const InstanceId> targets, Vec2 point)
{
    double best = std::numeric_limits<double>::infinity();
    for (const InstanceId id : targets) {
        if (const Instance* inst = scene.find_instance(id)) {
            best = std::min(best, distance_to_rect(point, inst->footprint));
        }
    }
    return best;
}

Observation observe(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, const SimOptions& options)
{
    Observation obs;
    obs.rendered = true;
    obs.images[0] = render(scene, e, pose, 0, options.render_width, options.render_height);
    if (e.cameras.size() > 1) {
        obs.images[1] = render(scene, e, pose, 1, options.render_width, options.render_height);
    } else {
        obs.images[1] = Image::masked(obs.images[0].width, obs.images[0].height, 1);
    }
    return obs;
}

bool targets_in_view(const Scene& scene, const EmbodimentConfig& e, const Pose& pose, const SimOptions& options,
                     std::span<const InstanceId> ids)
{
    for (std::size_t cam = 0; cam < e.cameras.size(); ++cam) {
        if (targets_visible(scene, e, pose, cam, ids, options.render_width, options.render_height)) {
            return true;
        }
    }
    return false;
}

SimState reset(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
               const SimOptions& options, std::uint64_t seed)
{
    if (!(task.success_distance > 0.0) || task.max_steps < 1) {
        throw ArgumentError("task needs a positive success distance and at least one step");
    }
    SimState s;
    s.scene = &scene;
    s.embodiment = &e;
    s.pose = {start.x, start.z, normalize_heading(start.heading)};
    s.task = task;
    s.options = options;
    s.seed = seed;
    for (const Instance* inst : scene.instances_of(task.target_category)) {
        s.targets.push_back(inst->id);
    }
    if (s.targets.empty()) {
        throw TaskError("scene has no instance of target category '" + task.target_category + "'");
    }
    if (check_collision(scene, e, s.pose)) {
        throw PlacementError("start pose collides with the scene");
    }
    s.min_distance = distance_to_targets(scene, s.targets, s.pose.position());
    if (options.render_observations) {
        s.observation = observe(scene, e, s.pose, options);
    }
    return s;
}

namespace {

bool swept_translation_blocked(const SimState& s, double signed_distance, Pose& out)
{
    const Vec2 f = heading_forward(s.pose.heading);
    const int samples = std::max(1, static_cast<int>(std::ceil(std::abs(signed_distance) /
                                                               s.options.translate_sample - 1e-9)));
    for (int k = 1; k <= samples; ++k) {
        const double t = signed_distance * k / samples;
        const Pose p{s.pose.x + t * f.x, s.pose.z + t * f.z, s.pose.heading};
        if (check_collision(*s.scene, *s.embodiment, p)) {
            return true;
        }
        out = p;
    }
    return false;
}

bool swept_rotation_blocked(const SimState& s, double degrees, Pose& out)
{
    const int samples =
        std::max(1, static_cast<int>(std::ceil(std::abs(degrees) / s.options.rotate_sample - 1e-9)));
    for (int k = 1; k <= samples; ++k) {
        const Pose p{s.pose.x, s.pose.z, normalize_heading(s.pose.heading + degrees * k / samples)};
        if (check_collision(*s.scene, *s.embodiment, p)) {
            return true;
        }
        out = p;
    }
    return false;
}

bool target_visible(const Observation& obs, std::span<const InstanceId> ids)
{
    for (const Image& img : obs.images) {
        for (const auto px : img.semantic) {
            if (px != kNoInstance && std::find(ids.begin(), ids.end(), px) != ids.end()) {
                return true;
            }
        }
    }
    return false;
}

} // namespace

bool success_check(const SimState& s)
{
    std::vector<InstanceId> near;
    for (const InstanceId id : s.targets) {
        const Instance* inst = s.scene->find_instance(id);
        if (inst && distance_to_rect(s.pose.position(), inst->footprint) <= s.task.success_distance) {
            near.push_back(id);
        }
    }
    if (near.empty()) {
        return false;
    }
    if (s.observation.rendered) {
        return target_visible(s.observation, near);
    }
    return targets_in_view(*s.scene, *s.embodiment, s.pose, s.options, near);
}

namespace {

bool sweep(const SimState& s, Action a, Pose& next)
{
    next = s.pose;
    switch (a) {
    case Action::MoveAhead:
        return swept_translation_blocked(s, s.options.move_distance, next);
    case Action::MoveBack:
        return swept_translation_blocked(s, -s.options.move_distance, next);
    case Action::RotateRight30:
        return swept_rotation_blocked(s, 30.0, next);
    case Action::RotateLeft30:
        return swept_rotation_blocked(s, -30.0, next);
    case Action::RotateRight6:
        return swept_rotation_blocked(s, 6.0, next);
    case Action::RotateLeft6:
        return swept_rotation_blocked(s, -6.0, next);
    case Action::Done:
        break;
    }
    return false;
}

} // namespace

bool action_blocked(const SimState& s, Action a)
{
    Pose next;
    return sweep(s, a, next);
}

StepResult step(SimState& s, Action a)
{
    if (s.terminal) {
        throw StateError("step called on a terminated episode");
    }
    StepResult result;
    Pose next;
    const bool blocked = sweep(s, a, next);
    if (blocked) {
        ++s.collisions;
    } else {
        s.pose = next;
    }
    ++s.steps;

    const double distance = distance_to_targets(*s.scene, s.targets, s.pose.position());
    const double progress = std::max(0.0, s.min_distance - distance);
    s.min_distance = std::min(s.min_distance, distance);

    if (s.options.render_observations && (a != Action::Done || !s.observation.rendered)) {
        s.observation = observe(*s.scene, *s.embodiment, s.pose, s.options);
    } else if (!s.options.render_observations) {
        s.observation = {};
    }
    s.observation.last_action_failed = blocked;

    bool success = false;
    if (a == Action::Done) {
        success = success_check(s);
        s.terminal = true;
        s.success = success;
    }
    if (s.steps >= s.task.max_steps) {
        s.terminal = true;
    }

    result.reward = progress + (success ? s.options.success_reward : 0.0) - s.options.step_penalty -
                    (blocked ? s.task.collision_penalty : 0.0);
    result.collision = blocked;
    result.terminal = s.terminal;
    result.success = success;
    result.distance = distance;
    result.observation = s.observation;
    return result;
}

// JSON ---------------------------------------------------------------------

void to_json(nlohmann::json& j, const Action& a) { j = std::string(action_name(a)); }

void from_json(const nlohmann::json& j, Action& a)
{
    const auto parsed = parse_action(j.get<std::string>());
    if (!parsed) {
        throw ParseError("unknown action '" + j.get<std::string>() + "'");
    }
    a = *parsed;
}

void to_json(nlohmann::json& j, const Pose& p) { j = nlohmann::json{{"x", p.x}, {"z", p.z}, {"heading", p.heading}}; }

void from_json(const nlohmann::json& j, Pose& p)
{
    j.at("x").get_to(p.x);
    j.at("z").get_to(p.z);
    j.at("heading").get_to(p.heading);
}

void to_json(nlohmann::json& j, const TaskSpec& t)
{
    j = nlohmann::json{{"target_category", t.target_category},
                       {"success_distance", t.success_distance},
                       {"max_steps", t.max_steps},
                       {"collision_penalty", t.collision_penalty},
                       {"instruction", t.instruction()}};
}

void from_json(const nlohmann::json& j, TaskSpec& t)
{
    j.at("target_category").get_to(t.target_category);
    t.success_distance = j.value("success_distance", 2.0);
    t.max_steps = j.value("max_steps", 600);
    t.collision_penalty = j.value("collision_penalty", 0.0);
}

void to_json(nlohmann::json& j, const TraceStep& s)
{
    j = nlohmann::json{{"action", s.action},     {"collision", s.collision}, {"reward", s.reward},
                       {"distance", s.distance}, {"pose", s.pose},           {"terminal", s.terminal},
                       {"success", s.success}};
}

void from_json(const nlohmann::json& j, TraceStep& s)
{
    j.at("action").get_to(s.action);
    j.at("collision").get_to(s.collision);
    j.at("reward").get_to(s.reward);
    j.at("distance").get_to(s.distance);
    j.at("pose").get_to(s.pose);
    j.at("terminal").get_to(s.terminal);
    j.at("success").get_to(s.success);
}

void to_json(nlohmann::json& j, const EpisodeTrace& t)
{
    j = nlohmann::json{{"start", t.start}, {"start_distance", t.start_distance}, {"steps", t.steps}};
}

void from_json(const nlohmann::json& j, EpisodeTrace& t)
{
    j.at("start").get_to(t.start);
    j.at("start_distance").get_to(t.start_distance);
    j.at("steps").get_to(t.steps);
}

} // namespace xenav
