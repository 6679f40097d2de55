#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xenav/embodiment.hpp"
#include "xenav/geometry.hpp"
#include "xenav/pose.hpp"
#include "xenav/scene.hpp"
#include "xenav/sim.hpp"

namespace xenav {

struct PlannerConfig
{
    double spacing = 0.1;
    double d_lo = 0.05;  ///< distance clip, meters
    double d_hi = 1.0;
    double waypoint_radius = 0.25;
    /// Radius used instead when the straight line onward from the current
    /// pose is not clear, and for the final waypoint. Half a forward move, so
    /// an aligned approach always lands inside it.
    double tight_radius = 0.1;
    double heading_tolerance = 3.0;  ///< degrees
    double shortcut_epsilon = 1e-6;
    int max_replans = 1;
    /// Goal nodes are kept this far inside the success distance.
    double goal_margin = 0.25;
    /// How many goal candidates get a visibility render before falling back
    /// to the node nearest the target.
    int visibility_candidates = 400;
    /// Minimum spacing between candidates that get a visibility render.
    double candidate_spacing = 0.2;

    friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

/// Regular lattice of candidate agent positions. Node (ix, iz) sits at
/// origin + spacing * (ix, iz); index = iz * nx + ix.
struct ReachGrid
{
    double spacing = 0.1;
    Vec2 origin;
    int nx = 0;
    int nz = 0;
    std::vector<std::uint8_t> reachable;

    int size() const { return nx * nz; }
    int index(int ix, int iz) const { return iz * nx + ix; }
    int ix(int node) const { return node % nx; }
    int iz(int node) const { return node / nx; }
    Vec2 position(int node) const { return {origin.x + spacing * ix(node), origin.z + spacing * iz(node)}; }
    bool is_reachable(int node) const { return node >= 0 && node < size() && reachable[node] != 0; }
    std::size_t count() const;
};

/// Radius of the smallest pivot-centered disc holding the collider at every heading.
double reach_radius(const EmbodimentConfig& e);

/// Lattice covering the scene with origin (spacing/2, spacing/2). A node is
/// reachable when the reach_radius disc around it stays inside the world and
/// clears every cell blocked below the collider height.
ReachGrid reachable_grid(const Scene& scene, const EmbodimentConfig& e, double spacing = 0.1);

struct CostField
{
    double d_lo = 0.05;
    double d_hi = 1.0;
    std::vector<double> distance;  ///< clipped, per node
    std::vector<double> cost;      ///< distance^-3, per node

    double cost_floor() const { return 1.0 / (d_hi * d_hi * d_hi); }
};

double clipped_cost(double distance, double d_lo, double d_hi);

/// Exact distance from a point to the nearest cell blocked below `height`,
/// searched out to `limit` (returns `limit` when nothing is closer).
double obstacle_distance(const Scene& scene, Vec2 p, double height, double limit);

/// Whether a disc of `radius` can slide from a to b below `height` while
/// staying inside the world (sampled at a twentieth of a meter).
bool disc_path_clear(const Scene& scene, Vec2 a, Vec2 b, double radius, double height);

CostField distance_field(const Scene& scene, const ReachGrid& grid, const EmbodimentConfig& e, double d_lo = 0.05,
                         double d_hi = 1.0);

/// Builds a field from given per-node distances (clipped here).
CostField cost_field_from_distances(std::vector<double> distances, double d_lo, double d_hi);

/// 8-connected graph over reachable nodes. Edge weight = length * max(cost_u, cost_v).
class PlanGraph
{
public:
    struct Edge
    {
        int to;
        double weight;
    };

    PlanGraph(const ReachGrid& grid, const CostField& field);

    const ReachGrid& grid() const { return grid_; }
    int size() const { return grid_.size(); }
    bool has_node(int node) const { return grid_.is_reachable(node); }
    double cost(int node) const { return cost_[node]; }
    double cost_floor() const { return cost_floor_; }
    std::span<const Edge> edges(int node) const
    {
        return {edges_.data() + offsets_[node], edges_.data() + offsets_[node + 1]};
    }
    /// 8-connected component label, -1 for unreachable nodes.
    int component(int node) const { return component_[node]; }
    std::size_t edge_count() const { return edges_.size(); }

    /// Nearest reachable node to a point, optionally limited to one component.
    std::optional<int> nearest_node(Vec2 p, int component = -1) const;

private:
    ReachGrid grid_;
    std::vector<double> cost_;
    double cost_floor_ = 1.0;
    std::vector<std::uint32_t> offsets_;
    std::vector<Edge> edges_;
    std::vector<int> component_;
};

struct PathResult
{
    std::vector<int> nodes;  ///< start..goal; empty when start == goal
    double cost = 0.0;
};

/// Minimum-cost path. Throws UnreachableError when no path exists and
/// ArgumentError when an endpoint is not a graph node.
PathResult astar(const PlanGraph& g, int start, int goal);

/// Sum of edge weights along consecutive path nodes.
double path_cost(const PlanGraph& g, std::span<const int> path);

/// Cost of the straight segment between two nodes: traverses the lattice
/// cells it crosses and charges each crossing max(cost) times its share of
/// length. Infinite if the segment touches an unreachable cell.
double segment_cost(const PlanGraph& g, int from, int to);

/// Greedy farthest-shortcut waypoint selection. Returns node ids; the first
/// and last path nodes are always included.
std::vector<int> extract_waypoints(const PlanGraph& g, std::span<const int> path, double epsilon = 1e-6);

double polyline_cost(const PlanGraph& g, std::span<const int> waypoints);

struct ExpertTrajectory
{
    std::vector<int> path;
    std::vector<Vec2> waypoints;
    std::vector<Action> actions;
    std::vector<TraceStep> steps;
    Pose start;
    double start_distance = 0.0;
    bool success = false;
    int collisions = 0;
    int replans = 0;
    double path_cost = 0.0;
    int goal_node = -1;
    bool goal_visible = false;
    std::string error;  ///< empty unless the expert gave up

    std::vector<Pose> poses() const;  ///< start pose followed by one pose per step
    EpisodeTrace trace() const;
    int move_count() const;
    friend bool operator==(const ExpertTrajectory&, const ExpertTrajectory&) = default;
};

/// Everything the expert needs for one scene and embodiment.
struct PlanContext
{
    ReachGrid grid;
    CostField field;
    PlanGraph graph;
    PlannerConfig config;
};

PlanContext prepare_plan(const Scene& scene, const EmbodimentConfig& e, const PlannerConfig& config = {});

/// Reachable nodes within the success distance (less the goal margin) of a target.
std::vector<int> goal_candidates(const Scene& scene, const PlanContext& ctx, std::span<const InstanceId> targets,
                                 const TaskSpec& task);

/// Sorted component labels holding at least one goal candidate whose render,
/// facing the nearest target, shows a target within the success distance.
std::vector<int> visible_goal_components(const Scene& scene, const EmbodimentConfig& e, const PlanContext& ctx,
                                         std::span<const InstanceId> targets, const TaskSpec& task,
                                         const SimOptions& options);

/// Goal node for a task: among candidates in the start's component, the
/// cheapest to reach whose render facing the target shows it; the candidate
/// nearest the target when none does. Throws UnreachableError when the
/// component has no candidate.
struct GoalChoice
{
    int node = -1;
    bool visible = false;  ///< the target showed in the render from this node
};

GoalChoice select_goal(const Scene& scene, const EmbodimentConfig& e, const PlanContext& ctx, int start,
                       std::span<const InstanceId> targets, const TaskSpec& task, const SimOptions& options);

/// Closed-loop execution of waypoints in the simulator.
ExpertTrajectory emit_actions(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
                              const PlanContext& ctx, std::span<const int> waypoints, int goal,
                              const SimOptions& options);

/// Full expert pipeline. Throws TaskError, PlacementError or UnreachableError
/// when no plan exists; failures while executing are reported in-band.
ExpertTrajectory plan_episode(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
                              const PlannerConfig& config = {}, const SimOptions& options = expert_sim_options());

ExpertTrajectory plan_episode(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
                              const PlanContext& ctx, const SimOptions& options = expert_sim_options());

void to_json(nlohmann::json& j, const PlannerConfig& c);
void from_json(const nlohmann::json& j, PlannerConfig& c);
void to_json(nlohmann::json& j, const ExpertTrajectory& t);
void from_json(const nlohmann::json& j, ExpertTrajectory& t);

} // namespace xenav
