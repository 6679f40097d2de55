#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "graph_oracle.hpp"
#include "test_util.hpp"
#include "xenav/errors.hpp"
#include "xenav/planner.hpp"
#include "xenav/rng.hpp"

using namespace xenav;
using xenav::testing::oracle_distances;
using xenav::testing::kInf;
using xenav::testing::random_grid;
using xenav::testing::reachable_nodes;

namespace {

ReachGrid full_grid(int nx, int nz)
{
    ReachGrid grid;
    grid.nx = nx;
    grid.nz = nz;
    grid.origin = {0.05, 0.05};
    grid.reachable.assign(grid.size(), 1);
    return grid;
}

PlanGraph uniform_graph(const ReachGrid& grid)
{
    return PlanGraph(grid, cost_field_from_distances(std::vector<double>(grid.size(), 5.0), 0.05, 1.0));
}

// Every point sampled along a-b falls in a reachable lattice cell.
bool segment_cells_reachable(const ReachGrid& grid, Vec2 a, Vec2 b)
{
    const int samples = std::max(1, static_cast<int>(norm(b - a) / 0.005));
    for (int k = 0; k <= samples; ++k) {
        const Vec2 p = a + (static_cast<double>(k) / samples) * (b - a);
        const int ix = static_cast<int>(std::lround((p.x - grid.origin.x) / grid.spacing));
        const int iz = static_cast<int>(std::lround((p.z - grid.origin.z) / grid.spacing));
        if (ix < 0 || iz < 0 || ix >= grid.nx || iz >= grid.nz || grid.reachable[grid.index(ix, iz)] == 0) {
            return false;
        }
    }
    return true;
}

bool inside(const Rect& r, Vec2 p) { return p.x > r.x0 && p.x < r.x1 && p.z > r.z0 && p.z < r.z1; }

std::vector<Pose> replay(const Scene& scene, const EmbodimentConfig& e, const ExpertTrajectory& t,
                         const TaskSpec& task, int& collisions, bool& success)
{
    SimState s = reset(scene, e, t.start, task, expert_sim_options());
    std::vector<Pose> poses{s.pose};
    for (const Action a : t.actions) {
        step(s, a);
        poses.push_back(s.pose);
    }
    collisions = s.collisions;
    success = s.success;
    return poses;
}

} // namespace

TEST(Planner, AstarMatchesBoostDijkstraOnRandomGraphs)
{
    Rng rng(2024);
    int compared = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const ReachGrid grid = random_grid(64, 0.75, rng);
        std::vector<double> distances(grid.size());
        for (auto& d : distances) {
            d = rng.uniform(0.0, 1.2);
        }
        const CostField field = cost_field_from_distances(distances, 0.05, 1.0);
        const PlanGraph g(grid, field);
        const auto nodes = reachable_nodes(grid);
        const int source = nodes[rng.uniform_int(0, static_cast<std::int64_t>(nodes.size()) - 1)];
        const auto oracle = oracle_distances(grid, field.cost, source);
        for (int k = 0; k < 5; ++k) {
            const int goal = nodes[rng.uniform_int(0, static_cast<std::int64_t>(nodes.size()) - 1)];
            if (!std::isfinite(oracle[goal])) {
                EXPECT_THROW(astar(g, source, goal), UnreachableError);
                continue;
            }
            const PathResult p = astar(g, source, goal);
            EXPECT_NEAR(p.cost, oracle[goal], 1e-9 * std::max(1.0, oracle[goal]));
            if (goal != source) {
                ASSERT_GE(p.nodes.size(), 2U);
                EXPECT_EQ(p.nodes.front(), source);
                EXPECT_EQ(p.nodes.back(), goal);
                EXPECT_NEAR(path_cost(g, p.nodes), p.cost, 1e-9 * std::max(1.0, p.cost));
            }
            ++compared;
        }
    }
    EXPECT_GT(compared, 300);
}

TEST(Planner, DiagonalPathOnUniformGrid)
{
    const ReachGrid grid = full_grid(5, 5);
    const PlanGraph g = uniform_graph(grid);
    const PathResult p = astar(g, grid.index(0, 0), grid.index(4, 4));
    EXPECT_NEAR(p.cost, 4.0 * std::sqrt(2.0) * 0.1, 1e-12);
    EXPECT_EQ(p.nodes.size(), 5U);
}

TEST(Planner, StartEqualsGoal)
{
    const ReachGrid grid = full_grid(5, 5);
    const PlanGraph g = uniform_graph(grid);
    const PathResult p = astar(g, 7, 7);
    EXPECT_TRUE(p.nodes.empty());
    EXPECT_EQ(p.cost, 0.0);
}

TEST(Planner, EndpointErrors)
{
    ReachGrid grid = full_grid(5, 5);
    for (int iz = 0; iz < 5; ++iz) {
        grid.reachable[grid.index(2, iz)] = 0;
    }
    const PlanGraph g = uniform_graph(grid);
    EXPECT_THROW(astar(g, grid.index(2, 2), grid.index(0, 0)), ArgumentError);
    EXPECT_THROW(astar(g, -1, grid.index(0, 0)), ArgumentError);
    EXPECT_THROW(astar(g, grid.index(0, 0), 25), ArgumentError);
    EXPECT_THROW(astar(g, grid.index(0, 0), grid.index(4, 4)), UnreachableError);
    EXPECT_NE(g.component(grid.index(0, 0)), g.component(grid.index(4, 4)));
    EXPECT_EQ(g.component(grid.index(2, 0)), -1);
}

TEST(Planner, NoCornerCutting)
{
    ReachGrid grid = full_grid(2, 2);
    grid.reachable[grid.index(1, 0)] = 0;
    grid.reachable[grid.index(0, 1)] = 0;
    const PlanGraph g = uniform_graph(grid);
    EXPECT_EQ(g.edge_count(), 0U);
    EXPECT_THROW(astar(g, grid.index(0, 0), grid.index(1, 1)), UnreachableError);
}

TEST(Planner, StraightCorridorHasTwoWaypoints)
{
    const ReachGrid grid = full_grid(10, 1);
    const PlanGraph g = uniform_graph(grid);
    const PathResult p = astar(g, 0, 9);
    ASSERT_EQ(p.nodes.size(), 10U);
    EXPECT_EQ(extract_waypoints(g, p.nodes), (std::vector<int>{0, 9}));
    const std::vector<int> single{4};
    EXPECT_EQ(extract_waypoints(g, single), single);
}

TEST(Planner, WaypointsSkipAroundAnLShape)
{
    ReachGrid grid = full_grid(6, 6);
    for (int iz = 0; iz < 5; ++iz) {
        for (int ix = 1; ix < 6; ++ix) {
            grid.reachable[grid.index(ix, iz)] = 0;
        }
    }
    const PlanGraph g = uniform_graph(grid);
    const PathResult p = astar(g, grid.index(0, 0), grid.index(5, 5));
    const auto w = extract_waypoints(g, p.nodes);
    EXPECT_EQ(w, (std::vector<int>{grid.index(0, 0), grid.index(0, 5), grid.index(5, 5)}));
    EXPECT_NEAR(polyline_cost(g, w), p.cost, 1e-12);
}

TEST(Planner, SegmentCostInfiniteThroughUnreachable)
{
    ReachGrid grid = full_grid(5, 5);
    grid.reachable[grid.index(2, 2)] = 0;
    const PlanGraph g = uniform_graph(grid);
    EXPECT_EQ(segment_cost(g, grid.index(0, 2), grid.index(4, 2)), kInf);
    EXPECT_NEAR(segment_cost(g, grid.index(0, 0), grid.index(4, 0)), 0.4, 1e-12);
}

TEST(Planner, WaypointSoundnessOnScenes)
{
    const EmbodimentConfig e = xenav::testing::box_body(0.3, 0.5, 0.3);
    Rng rng(77);
    int plans = 0;
    for (std::uint64_t seed = 0; plans < 50 && seed < 200; ++seed) {
        const Scene scene = generate_scene(seed);
        const PlanContext ctx = prepare_plan(scene, e);
        const auto nodes = reachable_nodes(ctx.grid);
        for (int k = 0; k < 5 && plans < 50; ++k) {
            const int a = nodes[rng.uniform_int(0, static_cast<std::int64_t>(nodes.size()) - 1)];
            const int b = nodes[rng.uniform_int(0, static_cast<std::int64_t>(nodes.size()) - 1)];
            if (a == b || ctx.graph.component(a) != ctx.graph.component(b)) {
                continue;
            }
            const PathResult p = astar(ctx.graph, a, b);
            const auto w = extract_waypoints(ctx.graph, p.nodes);
            ASSERT_GE(w.size(), 2U);
            EXPECT_EQ(w.front(), a);
            EXPECT_EQ(w.back(), b);
            // Waypoints form a subsequence of the path.
            auto it = p.nodes.begin();
            for (const int n : w) {
                it = std::find(it, p.nodes.end(), n);
                ASSERT_NE(it, p.nodes.end());
            }
            EXPECT_LE(polyline_cost(ctx.graph, w), p.cost * (1.0 + 1e-6) + 1e-12);
            for (std::size_t i = 0; i + 1 < w.size(); ++i) {
                EXPECT_TRUE(std::isfinite(segment_cost(ctx.graph, w[i], w[i + 1])));
                EXPECT_TRUE(
                    segment_cells_reachable(ctx.grid, ctx.grid.position(w[i]), ctx.grid.position(w[i + 1])));
            }
            ++plans;
        }
    }
    EXPECT_EQ(plans, 50);
}

TEST(Planner, DistanceFieldMatchesBruteForce)
{
    Rng rng(5);
    SceneBuilder b(0.05, 32, 32, 1);
    for (int k = 0; k < 12; ++k) {
        const double x = rng.uniform(0.0, 1.4);
        const double z = rng.uniform(0.0, 1.4);
        const double y0 = rng.uniform(0.0, 0.8);
        b.add_block("box", {x, z, x + rng.uniform(0.05, 0.3), z + rng.uniform(0.05, 0.3)}, y0, y0 + 0.3);
    }
    const Scene scene = b.build();
    const EmbodimentConfig e = xenav::testing::box_body(0.1, 0.5, 0.1);
    ReachGrid grid = reachable_grid(scene, e);
    std::fill(grid.reachable.begin(), grid.reachable.end(), std::uint8_t{1});
    const CostField f = distance_field(scene, grid, e, 0.05, 1.0);
    for (int node = 0; node < grid.size(); ++node) {
        const Vec2 p = grid.position(node);
        double best = 1.0;
        for (int iz = 0; iz < 32; ++iz) {
            for (int ix = 0; ix < 32; ++ix) {
                bool blocked = false;
                for (const Slab& s : scene.occupied_intervals(ix, iz)) {
                    blocked = blocked || s.y_min < 0.5;
                }
                if (!blocked) {
                    continue;
                }
                const double dx = std::max(0.0, std::abs(p.x - (ix + 0.5) * 0.05) - 0.025);
                const double dz = std::max(0.0, std::abs(p.z - (iz + 0.5) * 0.05) - 0.025);
                best = std::min(best, std::hypot(dx, dz));
            }
        }
        const double clipped = std::clamp(best, 0.05, 1.0);
        EXPECT_NEAR(f.distance[node], clipped, 1e-12) << node;
        EXPECT_NEAR(f.cost[node], 1.0 / (clipped * clipped * clipped), 1e-9);
    }
}

TEST(Planner, ReachabilityShrinksWithBodySize)
{
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Scene scene = generate_scene(seed);
        const ReachGrid small = reachable_grid(scene, xenav::testing::box_body(0.25, 0.4, 0.25));
        const ReachGrid wide = reachable_grid(scene, xenav::testing::box_body(0.4, 0.4, 0.35));
        const ReachGrid tall = reachable_grid(scene, xenav::testing::box_body(0.25, 1.2, 0.25));
        ASSERT_EQ(small.size(), wide.size());
        for (int n = 0; n < small.size(); ++n) {
            if (wide.reachable[n] != 0 || tall.reachable[n] != 0) {
                ASSERT_NE(small.reachable[n], 0) << "seed " << seed << " node " << n;
            }
        }
        EXPECT_LT(wide.count(), small.count());
    }
}

TEST(Planner, ShortBodyTakesTheShortcutUnderTheTable)
{
    const Scenario sc = make_under_table_scenario();
    const Rect table{0.9, 2.4, 5.1, 3.6};
    TaskSpec task;
    task.target_category = sc.target_category;
    const Pose start{sc.start.x, sc.start.z, sc.start_heading};

    const auto short_body = xenav::testing::box_body(0.3, 0.4, 0.3);
    const auto tall_body = xenav::testing::box_body(0.3, 1.4, 0.3);
    const ExpertTrajectory low = plan_episode(sc.scene, short_body, start, task);
    const ExpertTrajectory high = plan_episode(sc.scene, tall_body, start, task);
    ASSERT_TRUE(low.success) << low.error;
    ASSERT_TRUE(high.success) << high.error;
    EXPECT_EQ(low.collisions, 0);
    EXPECT_EQ(high.collisions, 0);
    EXPECT_LE(static_cast<double>(low.actions.size()) / high.actions.size(), 0.67);

    const auto low_poses = low.poses();
    EXPECT_TRUE(std::any_of(low_poses.begin(), low_poses.end(),
                            [&](const Pose& p) { return inside(table, p.position()); }));
    for (const Pose& p : high.poses()) {
        EXPECT_FALSE(inside(table, p.position())) << p.x << " " << p.z;
    }
}

TEST(Planner, ExpertSolvesOpenRoomAndReplays)
{
    auto b = xenav::testing::open_room(6.0);
    b.add_block("chair", {4.6, 4.6, 5.1, 5.1}, 0.0, 0.9);
    const Scene scene = b.build();
    const auto e = xenav::testing::box_body(0.3, 0.5, 0.3);
    TaskSpec task;
    task.target_category = "chair";
    const Pose start{1.05, 1.05, 200.0};

    const ExpertTrajectory t = plan_episode(scene, e, start, task);
    ASSERT_TRUE(t.success) << t.error;
    EXPECT_EQ(t.collisions, 0);
    EXPECT_EQ(t.actions.back(), Action::Done);
    EXPECT_EQ(std::count(t.actions.begin(), t.actions.end(), Action::Done), 1);
    EXPECT_EQ(t.steps.size(), t.actions.size());

    int collisions = -1;
    bool success = false;
    const auto poses = replay(scene, e, t, task, collisions, success);
    EXPECT_TRUE(success);
    EXPECT_EQ(collisions, 0);
    EXPECT_EQ(poses, t.poses());

    EXPECT_EQ(plan_episode(scene, e, start, task), t);
}

TEST(Planner, TurnsTowardTheWaypointBeforeMoving)
{
    auto b = xenav::testing::open_room(6.0);
    b.add_block("chair", {4.6, 1.0, 5.1, 1.5}, 0.0, 0.9);
    const Scene scene = b.build();
    const auto e = xenav::testing::box_body(0.3, 0.5, 0.3);
    TaskSpec task;
    task.target_category = "chair";
    task.success_distance = 0.5;
    PlannerConfig cfg;
    const Pose start{1.05, 1.25, 0.0};

    const ExpertTrajectory t = plan_episode(scene, e, start, task, cfg);
    ASSERT_TRUE(t.success) << t.error;
    ASSERT_GE(t.waypoints.size(), 2U);
    const auto first_move = std::find(t.actions.begin(), t.actions.end(), Action::MoveAhead);
    ASSERT_NE(first_move, t.actions.end());
    const auto poses = t.poses();
    const Pose before = poses[first_move - t.actions.begin()];
    const double bearing = heading_towards(before.position(), t.waypoints[1]);
    EXPECT_LE(std::abs(wrap_angle(bearing - before.heading)), cfg.heading_tolerance);
    for (auto it = t.actions.begin(); it != first_move; ++it) {
        EXPECT_NE(*it, Action::MoveBack);
        EXPECT_NE(*it, Action::Done);
    }
}

TEST(Planner, PlanErrors)
{
    const Scene scene = xenav::testing::open_room(4.0).build();
    const auto e = xenav::testing::box_body(0.3, 0.5, 0.3);
    TaskSpec task;
    task.target_category = "chair";
    EXPECT_THROW(plan_episode(scene, e, {2.0, 2.0, 0.0}, task), TaskError);
    EXPECT_THROW(reachable_grid(scene, e, 0.0), ArgumentError);
}
