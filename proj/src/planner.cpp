#include "xenav/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include <nlohmann/json.hpp>

#include "xenav/errors.hpp"

namespace xenav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cell offsets around a query cell, ordered by a lower bound on the distance
// from any point of the query cell to the offset cell.
struct ObstacleSearch
{
    const Scene& scene;
    double height;
    double limit;
    struct Offset
    {
        int dx;
        int dz;
        double lower;
    };
    std::vector<Offset> offsets;

    ObstacleSearch(const Scene& s, double h, double lim) : scene(s), height(h), limit(lim)
    {
        const double cs = s.cell_size();
        const int r = static_cast<int>(std::ceil(lim / cs)) + 1;
        for (int dz = -r; dz <= r; ++dz) {
            for (int dx = -r; dx <= r; ++dx) {
                const double gx = std::max(0, std::abs(dx) - 1) * cs;
                const double gz = std::max(0, std::abs(dz) - 1) * cs;
                const double lower = std::hypot(gx, gz);
                if (lower < lim) {
                    offsets.push_back({dx, dz, lower});
                }
            }
        }
        std::stable_sort(offsets.begin(), offsets.end(),
                         [](const Offset& a, const Offset& b) { return a.lower < b.lower; });
    }

    double query(Vec2 p) const
    {
        const double cs = scene.cell_size();
        const int cx = static_cast<int>(std::floor(p.x / cs));
        const int cz = static_cast<int>(std::floor(p.z / cs));
        double best = limit;
        for (const Offset& o : offsets) {
            if (o.lower >= best) {
                break;
            }
            const int ix = cx + o.dx;
            const int iz = cz + o.dz;
            if (!scene.in_bounds(ix, iz) || !scene.blocks(scene.cell_index(ix, iz), height)) {
                continue;
            }
            const Rect cell{ix * cs, iz * cs, (ix + 1) * cs, (iz + 1) * cs};
            best = std::min(best, distance_to_rect(p, cell));
        }
        return best;
    }
};

Vec2 facing_point(const Scene& scene, std::span<const InstanceId> targets, Vec2 p)
{
    double best = kInf;
    Vec2 at = p;
    for (const InstanceId id : targets) {
        const Instance* inst = scene.find_instance(id);
        if (inst == nullptr) {
            continue;
        }
        const double d = distance_to_rect(p, inst->footprint);
        if (d < best) {
            best = d;
            at = {inst->representative.x, inst->representative.z};
        }
    }
    return at;
}

std::vector<double> dijkstra(const PlanGraph& g, int source)
{
    std::vector<double> dist(g.size(), kInf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    dist[source] = 0.0;
    open.push({0.0, source});
    while (!open.empty()) {
        const auto [d, u] = open.top();
        open.pop();
        if (d > dist[u]) {
            continue;
        }
        for (const auto& edge : g.edges(u)) {
            const double nd = d + edge.weight;
            if (nd < dist[edge.to]) {
                dist[edge.to] = nd;
                open.push({nd, edge.to});
            }
        }
    }
    return dist;
}

} // namespace

std::size_t ReachGrid::count() const
{
    return static_cast<std::size_t>(std::count(reachable.begin(), reachable.end(), std::uint8_t{1}));
}

double reach_radius(const EmbodimentConfig& e)
{
    return std::hypot(e.collider.x / 2.0 + std::abs(e.pivot_x), e.collider.z / 2.0 + std::abs(e.pivot_z));
}

double obstacle_distance(const Scene& scene, Vec2 p, double height, double limit)
{
    return ObstacleSearch(scene, height, limit).query(p);
}

bool disc_path_clear(const Scene& scene, Vec2 a, Vec2 b, double radius, double height)
{
    const ObstacleSearch search(scene, height, radius);
    const Rect world = scene.bounds();
    const double length = norm(b - a);
    const int samples = std::max(1, static_cast<int>(std::ceil(length / 0.05)));
    for (int k = 0; k <= samples; ++k) {
        const Vec2 p = a + (static_cast<double>(k) / samples) * (b - a);
        if (p.x - radius < world.x0 || p.x + radius > world.x1 || p.z - radius < world.z0 ||
            p.z + radius > world.z1 || search.query(p) < radius) {
            return false;
        }
    }
    return true;
}

ReachGrid reachable_grid(const Scene& scene, const EmbodimentConfig& e, double spacing)
{
    if (!(spacing > 0.0)) {
        throw ArgumentError("grid spacing must be positive");
    }
    ReachGrid grid;
    grid.spacing = spacing;
    grid.origin = {spacing / 2.0, spacing / 2.0};
    const Rect world = scene.bounds();
    grid.nx = std::max(0, static_cast<int>(std::floor((world.x1 - grid.origin.x) / spacing + 1e-9)) + 1);
    grid.nz = std::max(0, static_cast<int>(std::floor((world.z1 - grid.origin.z) / spacing + 1e-9)) + 1);
    grid.reachable.assign(grid.size(), 0);

    const double r = reach_radius(e);
    const ObstacleSearch search(scene, e.collider.y, r);
    for (int node = 0; node < grid.size(); ++node) {
        const Vec2 p = grid.position(node);
        if (p.x - r < world.x0 || p.x + r > world.x1 || p.z - r < world.z0 || p.z + r > world.z1) {
            continue;
        }
        grid.reachable[node] = search.query(p) >= r ? 1 : 0;
    }
    return grid;
}

double clipped_cost(double distance, double d_lo, double d_hi)
{
    const double d = std::clamp(distance, d_lo, d_hi);
    return 1.0 / (d * d * d);
}

CostField cost_field_from_distances(std::vector<double> distances, double d_lo, double d_hi)
{
    if (!(d_lo > 0.0) || !(d_hi >= d_lo)) {
        throw ArgumentError("distance clip needs 0 < d_lo <= d_hi");
    }
    CostField field;
    field.d_lo = d_lo;
    field.d_hi = d_hi;
    field.distance = std::move(distances);
    field.cost.resize(field.distance.size());
    for (std::size_t i = 0; i < field.distance.size(); ++i) {
        field.distance[i] = std::clamp(field.distance[i], d_lo, d_hi);
        field.cost[i] = clipped_cost(field.distance[i], d_lo, d_hi);
    }
    return field;
}

CostField distance_field(const Scene& scene, const ReachGrid& grid, const EmbodimentConfig& e, double d_lo,
                         double d_hi)
{
    const ObstacleSearch search(scene, e.collider.y, d_hi);
    std::vector<double> distances(grid.size(), d_lo);
    for (int node = 0; node < grid.size(); ++node) {
        if (grid.reachable[node] != 0) {
            distances[node] = search.query(grid.position(node));
        }
    }
    return cost_field_from_distances(std::move(distances), d_lo, d_hi);
}

// PlanGraph ------------------------------------------------------------------

PlanGraph::PlanGraph(const ReachGrid& grid, const CostField& field)
    : grid_(grid), cost_(field.cost), cost_floor_(field.cost_floor())
{
    if (static_cast<int>(cost_.size()) != grid_.size() || static_cast<int>(grid_.reachable.size()) != grid_.size()) {
        throw ArgumentError("cost field does not match the grid");
    }
    static constexpr int kDirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    offsets_.assign(grid_.size() + 1, 0);
    for (int node = 0; node < grid_.size(); ++node) {
        offsets_[node] = static_cast<std::uint32_t>(edges_.size());
        if (!grid_.is_reachable(node)) {
            continue;
        }
        const int ix = grid_.ix(node);
        const int iz = grid_.iz(node);
        auto open = [&](int x, int z) {
            return x >= 0 && z >= 0 && x < grid_.nx && z < grid_.nz && grid_.reachable[grid_.index(x, z)] != 0;
        };
        for (const auto& d : kDirs) {
            const int jx = ix + d[0];
            const int jz = iz + d[1];
            if (!open(jx, jz)) {
                continue;
            }
            // No corner cutting past an unreachable node.
            if (d[0] != 0 && d[1] != 0 && (!open(ix + d[0], iz) || !open(ix, iz + d[1]))) {
                continue;
            }
            const int other = grid_.index(jx, jz);
            const double length = grid_.spacing * std::hypot(static_cast<double>(d[0]), static_cast<double>(d[1]));
            edges_.push_back({other, length * std::max(cost_[node], cost_[other])});
        }
    }
    offsets_[grid_.size()] = static_cast<std::uint32_t>(edges_.size());

    component_.assign(grid_.size(), -1);
    int label = 0;
    std::vector<int> stack;
    for (int node = 0; node < grid_.size(); ++node) {
        if (!grid_.is_reachable(node) || component_[node] >= 0) {
            continue;
        }
        component_[node] = label;
        stack.push_back(node);
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const Edge& edge : edges(u)) {
                if (component_[edge.to] < 0) {
                    component_[edge.to] = label;
                    stack.push_back(edge.to);
                }
            }
        }
        ++label;
    }
}

std::optional<int> PlanGraph::nearest_node(Vec2 p, int component) const
{
    std::optional<int> best;
    double best_d = kInf;
    for (int node = 0; node < grid_.size(); ++node) {
        if (!grid_.is_reachable(node) || (component >= 0 && component_[node] != component)) {
            continue;
        }
        const double d = norm(grid_.position(node) - p);
        if (d < best_d) {
            best_d = d;
            best = node;
        }
    }
    return best;
}

// Search ---------------------------------------------------------------------

PathResult astar(const PlanGraph& g, int start, int goal)
{
    if (!g.has_node(start) || !g.has_node(goal)) {
        throw ArgumentError("astar endpoints must be reachable nodes");
    }
    if (start == goal) {
        return {};
    }
    if (g.component(start) != g.component(goal)) {
        throw UnreachableError("goal node " + std::to_string(goal) + " lies in component " +
                               std::to_string(g.component(goal)) + ", start node " + std::to_string(start) +
                               " in component " + std::to_string(g.component(start)));
    }
    const ReachGrid& grid = g.grid();
    const Vec2 target = grid.position(goal);
    auto heuristic = [&](int n) { return norm(grid.position(n) - target) * g.cost_floor(); };

    std::vector<double> cost(g.size(), kInf);
    std::vector<int> parent(g.size(), -1);
    std::vector<std::uint8_t> closed(g.size(), 0);
    using Item = std::tuple<double, double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    cost[start] = 0.0;
    open.push({heuristic(start), heuristic(start), start});
    while (!open.empty()) {
        const auto [f, h, u] = open.top();
        open.pop();
        if (closed[u] != 0) {
            continue;
        }
        closed[u] = 1;
        if (u == goal) {
            break;
        }
        for (const auto& edge : g.edges(u)) {
            if (closed[edge.to] != 0) {
                continue;
            }
            const double nc = cost[u] + edge.weight;
            if (nc < cost[edge.to]) {
                cost[edge.to] = nc;
                parent[edge.to] = u;
                const double hv = heuristic(edge.to);
                open.push({nc + hv, hv, edge.to});
            }
        }
    }
    if (closed[goal] == 0) {
        throw UnreachableError("no path from node " + std::to_string(start) + " to node " + std::to_string(goal));
    }
    PathResult result;
    result.cost = cost[goal];
    for (int n = goal; n != -1; n = parent[n]) {
        result.nodes.push_back(n);
    }
    std::reverse(result.nodes.begin(), result.nodes.end());
    return result;
}

double path_cost(const PlanGraph& g, std::span<const int> path)
{
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        bool found = false;
        for (const auto& edge : g.edges(path[i - 1])) {
            if (edge.to == path[i]) {
                total += edge.weight;
                found = true;
                break;
            }
        }
        if (!found) {
            throw ArgumentError("path nodes " + std::to_string(path[i - 1]) + " and " + std::to_string(path[i]) +
                                " are not adjacent");
        }
    }
    return total;
}

double segment_cost(const PlanGraph& g, int from, int to)
{
    if (from == to) {
        return 0.0;
    }
    const ReachGrid& grid = g.grid();
    if (!g.has_node(from) || !g.has_node(to)) {
        return kInf;
    }
    int cx = grid.ix(from);
    int cz = grid.iz(from);
    const long long dx = grid.ix(to) - cx;
    const long long dz = grid.iz(to) - cz;
    const long long nx = std::llabs(dx);
    const long long nz = std::llabs(dz);
    const int sx = dx > 0 ? 1 : -1;
    const int sz = dz > 0 ? 1 : -1;
    const double length = grid.spacing * std::hypot(static_cast<double>(dx), static_cast<double>(dz));

    auto open = [&](int x, int z) {
        return x >= 0 && z >= 0 && x < grid.nx && z < grid.nz && grid.reachable[grid.index(x, z)] != 0;
    };

    // Cells crossed in order, with the parameter at which each is left. The
    // k-th boundary crossing in x happens at t = (2k - 1) / (2 nx).
    std::vector<int> cells{grid.index(cx, cz)};
    std::vector<double> exits;
    long long i = 1;
    long long j = 1;
    while (i <= nx || j <= nz) {
        const long long lhs = (2 * i - 1) * nz;  // compares tx against tz
        const long long rhs = (2 * j - 1) * nx;
        const bool x_next = j > nz || (i <= nx && lhs < rhs);
        const bool z_next = i > nx || (j <= nz && rhs < lhs);
        if (x_next) {
            exits.push_back(static_cast<double>(2 * i - 1) / static_cast<double>(2 * nx));
            cx += sx;
            ++i;
        } else if (z_next) {
            exits.push_back(static_cast<double>(2 * j - 1) / static_cast<double>(2 * nz));
            cz += sz;
            ++j;
        } else {
            // Exactly through a lattice corner: step diagonally, but both side
            // cells must be open just as for a diagonal graph edge.
            if (!open(cx + sx, cz) || !open(cx, cz + sz)) {
                return kInf;
            }
            exits.push_back(static_cast<double>(2 * i - 1) / static_cast<double>(2 * nx));
            cx += sx;
            cz += sz;
            ++i;
            ++j;
        }
        if (!open(cx, cz)) {
            return kInf;
        }
        cells.push_back(grid.index(cx, cz));
    }
    if (!open(grid.ix(from), grid.iz(from))) {
        return kInf;
    }

    const std::size_t k = cells.size() - 1;
    auto piece = [&](std::size_t q) {
        const double t0 = q == 0 ? 0.0 : exits[q - 1];
        const double t1 = q == k ? 1.0 : exits[q];
        return (t1 - t0) * length;
    };
    auto share = [&](std::size_t q) { return (q == 0 || q == k) ? piece(q) : 0.5 * piece(q); };
    double total = 0.0;
    for (std::size_t m = 1; m <= k; ++m) {
        total += (share(m - 1) + share(m)) * std::max(g.cost(cells[m - 1]), g.cost(cells[m]));
    }
    return total;
}

std::vector<int> extract_waypoints(const PlanGraph& g, std::span<const int> path, double epsilon)
{
    std::vector<int> waypoints;
    if (path.empty()) {
        return waypoints;
    }
    std::vector<double> along(path.size(), 0.0);
    for (std::size_t k = 1; k < path.size(); ++k) {
        along[k] = along[k - 1] + path_cost(g, path.subspan(k - 1, 2));
    }
    waypoints.push_back(path.front());
    std::size_t i = 0;
    while (i + 1 < path.size()) {
        std::size_t next = i + 1;
        for (std::size_t j = path.size() - 1; j > i + 1; --j) {
            if (segment_cost(g, path[i], path[j]) <= (along[j] - along[i]) * (1.0 + epsilon)) {
                next = j;
                break;
            }
        }
        waypoints.push_back(path[next]);
        i = next;
    }
    return waypoints;
}

double polyline_cost(const PlanGraph& g, std::span<const int> waypoints)
{
    double total = 0.0;
    for (std::size_t k = 1; k < waypoints.size(); ++k) {
        total += segment_cost(g, waypoints[k - 1], waypoints[k]);
    }
    return total;
}

// Expert ---------------------------------------------------------------------

std::vector<Pose> ExpertTrajectory::poses() const
{
    std::vector<Pose> out{start};
    for (const auto& s : steps) {
        out.push_back(s.pose);
    }
    return out;
}

EpisodeTrace ExpertTrajectory::trace() const { return {start, start_distance, steps}; }

int ExpertTrajectory::move_count() const
{
    return static_cast<int>(std::count(actions.begin(), actions.end(), Action::MoveAhead));
}

PlanContext prepare_plan(const Scene& scene, const EmbodimentConfig& e, const PlannerConfig& config)
{
    ReachGrid grid = reachable_grid(scene, e, config.spacing);
    CostField field = distance_field(scene, grid, e, config.d_lo, config.d_hi);
    PlanGraph graph(grid, field);
    return {std::move(grid), std::move(field), std::move(graph), config};
}

namespace {

std::vector<InstanceId> targets_near(const Scene& scene, std::span<const InstanceId> targets, Vec2 p, double d)
{
    std::vector<InstanceId> near;
    for (const InstanceId id : targets) {
        const Instance* inst = scene.find_instance(id);
        if (inst != nullptr && distance_to_rect(p, inst->footprint) <= d) {
            near.push_back(id);
        }
    }
    return near;
}

// Facing the closest target from node p, does a target within the success
// distance show in either camera?
bool goal_sees_target(const Scene& scene, const EmbodimentConfig& e, const ReachGrid& grid, int node,
                      std::span<const InstanceId> targets, const TaskSpec& task, const SimOptions& options,
                      const PlannerConfig& config)
{
    // The expert stops anywhere within the tight radius of the goal and faces
    // the same point, so the view must hold across that disc, not just at its center.
    const Vec2 p = grid.position(node);
    const Vec2 look = facing_point(scene, targets, p);
    const double r = config.tight_radius;
    for (const Vec2 q : {p, p + Vec2{r, 0.0}, p + Vec2{-r, 0.0}, p + Vec2{0.0, r}, p + Vec2{0.0, -r}}) {
        const Pose pose{q.x, q.z, heading_towards(q, look)};
        if (!targets_in_view(scene, e, pose, options, targets_near(scene, targets, q, task.success_distance))) {
            return false;
        }
    }
    return true;
}

} // namespace

std::vector<int> goal_candidates(const Scene& scene, const PlanContext& ctx, std::span<const InstanceId> targets,
                                 const TaskSpec& task)
{
    std::vector<int> out;
    const double reach = task.success_distance - ctx.config.goal_margin;
    for (int node = 0; node < ctx.graph.size(); ++node) {
        if (ctx.graph.has_node(node) && distance_to_targets(scene, targets, ctx.grid.position(node)) <= reach) {
            out.push_back(node);
        }
    }
    return out;
}

std::vector<int> visible_goal_components(const Scene& scene, const EmbodimentConfig& e, const PlanContext& ctx,
                                         std::span<const InstanceId> targets, const TaskSpec& task,
                                         const SimOptions& options)
{
    std::vector<int> good;
    std::vector<int> budget_left;
    std::vector<Vec2> checked;
    for (const int node : goal_candidates(scene, ctx, targets, task)) {
        const int c = ctx.graph.component(node);
        if (std::find(good.begin(), good.end(), c) != good.end()) {
            continue;
        }
        const Vec2 p = ctx.grid.position(node);
        const bool crowded = std::any_of(checked.begin(), checked.end(),
                                         [&](Vec2 q) { return norm(q - p) < ctx.config.candidate_spacing; });
        if (crowded || static_cast<int>(checked.size()) >= ctx.config.visibility_candidates) {
            continue;
        }
        checked.push_back(p);
        if (goal_sees_target(scene, e, ctx.grid, node, targets, task, options, ctx.config)) {
            good.push_back(c);
        }
    }
    std::sort(good.begin(), good.end());
    return good;
}

GoalChoice select_goal(const Scene& scene, const EmbodimentConfig& e, const PlanContext& ctx, int start,
                       std::span<const InstanceId> targets, const TaskSpec& task, const SimOptions& options)
{
    const PlanGraph& g = ctx.graph;
    const int component = g.component(start);
    const std::vector<double> dist = dijkstra(g, start);

    std::vector<int> candidates;
    for (const int node : goal_candidates(scene, ctx, targets, task)) {
        if (g.component(node) == component) {
            candidates.push_back(node);
        }
    }
    if (candidates.empty()) {
        throw UnreachableError("component " + std::to_string(component) + " has no node within " +
                               std::to_string(task.success_distance - ctx.config.goal_margin) + " m of a target");
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](int a, int b) { return std::tie(dist[a], a) < std::tie(dist[b], b); });

    // First a spread-out pass in order of path cost, then the skipped nodes.
    std::vector<std::uint8_t> tried(candidates.size(), 0);
    std::vector<Vec2> checked;
    int renders = 0;
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < candidates.size() && renders < ctx.config.visibility_candidates; ++k) {
            if (tried[k] != 0) {
                continue;
            }
            const Vec2 p = g.grid().position(candidates[k]);
            if (pass == 0 && std::any_of(checked.begin(), checked.end(), [&](Vec2 q) {
                    return norm(q - p) < ctx.config.candidate_spacing;
                })) {
                continue;
            }
            tried[k] = 1;
            checked.push_back(p);
            ++renders;
            if (goal_sees_target(scene, e, g.grid(), candidates[k], targets, task, options, ctx.config)) {
                return {candidates[k], true};
            }
        }
    }
    const int nearest = *std::min_element(candidates.begin(), candidates.end(), [&](int a, int b) {
        const double da = distance_to_targets(scene, targets, g.grid().position(a));
        const double db = distance_to_targets(scene, targets, g.grid().position(b));
        return std::tie(da, a) < std::tie(db, b);
    });
    return {nearest, false};
}

namespace {

Action best_rotation(double error)
{
    static constexpr std::pair<Action, double> kTurns[] = {
        {Action::RotateRight30, 30.0}, {Action::RotateLeft30, -30.0}, {Action::RotateRight6, 6.0},
        {Action::RotateLeft6, -6.0}};
    Action best = kTurns[0].first;
    double best_err = kInf;
    for (const auto& [a, delta] : kTurns) {
        const double remaining = std::abs(wrap_angle(error - delta));
        if (remaining < best_err) {
            best_err = remaining;
            best = a;
        }
    }
    return best;
}

// Turn that closes `error` while rotating only in direction `dir` (+1 right).
Action committed_rotation(double error, int dir)
{
    double remaining = std::fmod(dir > 0 ? error : -error, 360.0);
    if (remaining < 0.0) {
        remaining += 360.0;
    }
    if (remaining > 18.0) {
        return dir > 0 ? Action::RotateRight30 : Action::RotateLeft30;
    }
    return dir > 0 ? Action::RotateRight6 : Action::RotateLeft6;
}

int turn_direction(Action a) { return a == Action::RotateRight30 || a == Action::RotateRight6 ? 1 : -1; }

constexpr int kLookAroundTurns = 11;
// Turns in a row, two full circles, after which turning is hopeless.
constexpr int kMaxTurnsInPlace = 24;

// A blocked turn is retried in smaller steps, then the other way round.
Action turn_around_obstacle(const SimState& s, Action blocked)
{
    Action options[3];
    switch (blocked) {
    case Action::RotateRight30:
        options[0] = Action::RotateRight6, options[1] = Action::RotateLeft30, options[2] = Action::RotateLeft6;
        break;
    case Action::RotateLeft30:
        options[0] = Action::RotateLeft6, options[1] = Action::RotateRight30, options[2] = Action::RotateRight6;
        break;
    case Action::RotateRight6:
        options[0] = Action::RotateLeft30, options[1] = Action::RotateLeft6, options[2] = Action::RotateRight30;
        break;
    default:
        options[0] = Action::RotateRight30, options[1] = Action::RotateRight6, options[2] = Action::RotateLeft30;
        break;
    }
    for (const Action a : options) {
        if (!action_blocked(s, a)) {
            return a;
        }
    }
    return blocked;
}

} // namespace

ExpertTrajectory emit_actions(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
                              const PlanContext& ctx, std::span<const int> waypoints, int goal,
                              const SimOptions& options)
{
    const PlannerConfig& cfg = ctx.config;
    ExpertTrajectory traj;
    SimState s = reset(scene, e, start, task, options);
    traj.start = s.pose;
    traj.start_distance = s.min_distance;
    traj.goal_node = goal;

    std::vector<Vec2> route;
    for (const int n : waypoints) {
        route.push_back(ctx.graph.grid().position(n));
    }
    const Vec2 look = facing_point(scene, s.targets, ctx.graph.grid().position(goal));
    std::size_t next = 0;
    int sweep = -1;
    int commit = 0;  // forced turn direction after a blocked turn, +1 right
    int turns_in_place = 0;
    const double radius = reach_radius(e);

    while (!s.terminal) {
        if (success_check(s)) {
            const StepResult r = step(s, Action::Done);
            traj.actions.push_back(Action::Done);
            traj.steps.push_back({Action::Done, r.collision, r.reward, r.distance, s.pose, r.terminal, r.success});
            break;
        }
        while (next < route.size()) {
            const double gap = norm(route[next] - s.pose.position());
            if (gap > cfg.waypoint_radius) {
                break;
            }
            // Cutting the corner early is only safe when the line onward is clear.
            const bool loose = next + 1 < route.size() &&
                               disc_path_clear(scene, s.pose.position(), route[next + 1], radius, e.collider.y);
            if (!loose && gap > cfg.tight_radius) {
                break;
            }
            ++next;
        }
        Action a = Action::MoveAhead;
        auto rotation = [&](double err) { return commit != 0 ? committed_rotation(err, commit) : best_rotation(err); };
        if (next < route.size()) {
            const double err = wrap_angle(heading_towards(s.pose.position(), route[next]) - s.pose.heading);
            if (std::abs(err) > cfg.heading_tolerance) {
                a = rotation(err);
            }
        } else if (sweep < 0) {
            const double err = wrap_angle(heading_towards(s.pose.position(), look) - s.pose.heading);
            if (std::abs(err) > cfg.heading_tolerance) {
                a = rotation(err);
            } else {
                sweep = 0;
            }
        }
        if (next >= route.size() && sweep >= 0) {
            // Facing the target without seeing it: turn in place once around.
            if (sweep >= kLookAroundTurns) {
                traj.error = "target not visible from the goal";
                break;
            }
            ++sweep;
            a = Action::RotateRight30;
        }

        if (a != Action::MoveAhead && action_blocked(s, a)) {
            const Action wanted = a;
            a = turn_around_obstacle(s, a);
            if (turn_direction(a) != turn_direction(wanted)) {
                commit = turn_direction(a);
            }
        }
        if (a == Action::MoveAhead) {
            commit = 0;
            turns_in_place = 0;
        } else if (++turns_in_place > kMaxTurnsInPlace) {
            traj.error = "cannot turn toward the next waypoint";
            break;
        }
        const StepResult r = step(s, a);
        traj.actions.push_back(a);
        traj.steps.push_back({a, r.collision, r.reward, r.distance, s.pose, r.terminal, r.success});
        if (!r.collision) {
            continue;
        }
        if (traj.replans >= cfg.max_replans) {
            traj.error = "blocked after replanning";
            break;
        }
        ++traj.replans;
        const auto from = ctx.graph.nearest_node(s.pose.position(), ctx.graph.component(goal));
        if (!from) {
            traj.error = "replanning found no node";
            break;
        }
        try {
            PathResult path = astar(ctx.graph, *from, goal);
            if (path.nodes.empty()) {
                path.nodes.push_back(goal);
            }
            route.clear();
            for (const int n : extract_waypoints(ctx.graph, path.nodes, cfg.shortcut_epsilon)) {
                route.push_back(ctx.graph.grid().position(n));
            }
            next = 0;
            sweep = -1;
            commit = 0;
        } catch (const UnreachableError& err) {
            traj.error = std::string("replanning failed: ") + err.what();
            break;
        }
    }
    if (traj.error.empty() && !s.success) {
        traj.error = s.terminal && s.steps >= task.max_steps ? "step limit reached" : "done without success";
    }
    traj.success = s.success;
    traj.collisions = s.collisions;
    return traj;
}

ExpertTrajectory plan_episode(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
                              const PlannerConfig& config, const SimOptions& options)
{
    return plan_episode(scene, e, start, task, prepare_plan(scene, e, config), options);
}

ExpertTrajectory plan_episode(const Scene& scene, const EmbodimentConfig& e, const Pose& start, const TaskSpec& task,
                              const PlanContext& ctx, const SimOptions& options)
{
    std::vector<InstanceId> targets;
    for (const Instance* inst : scene.instances_of(task.target_category)) {
        targets.push_back(inst->id);
    }
    if (targets.empty()) {
        throw TaskError("scene has no instance of target category '" + task.target_category + "'");
    }
    if (check_collision(scene, e, start)) {
        throw PlacementError("start pose collides with the scene");
    }
    const auto start_node = ctx.graph.nearest_node(start.position());
    if (!start_node) {
        throw UnreachableError("the embodiment has no reachable node in this scene");
    }
    const GoalChoice choice = select_goal(scene, e, ctx, *start_node, targets, task, options);
    const int goal = choice.node;
    PathResult path = astar(ctx.graph, *start_node, goal);
    if (path.nodes.empty()) {
        path.nodes.push_back(goal);
    }
    const std::vector<int> waypoints = extract_waypoints(ctx.graph, path.nodes, ctx.config.shortcut_epsilon);
    ExpertTrajectory traj = emit_actions(scene, e, start, task, ctx, waypoints, goal, options);
    traj.path = std::move(path.nodes);
    traj.path_cost = path.cost;
    traj.goal_visible = choice.visible;
    for (const int n : waypoints) {
        traj.waypoints.push_back(ctx.graph.grid().position(n));
    }
    return traj;
}

// JSON -----------------------------------------------------------------------

void to_json(nlohmann::json& j, const PlannerConfig& c)
{
    j = nlohmann::json{{"spacing", c.spacing},
                       {"d_lo", c.d_lo},
                       {"d_hi", c.d_hi},
                       {"waypoint_radius", c.waypoint_radius},
                       {"tight_radius", c.tight_radius},
                       {"heading_tolerance", c.heading_tolerance},
                       {"shortcut_epsilon", c.shortcut_epsilon},
                       {"max_replans", c.max_replans},
                       {"goal_margin", c.goal_margin},
                       {"visibility_candidates", c.visibility_candidates},
                       {"candidate_spacing", c.candidate_spacing}};
}

void from_json(const nlohmann::json& j, PlannerConfig& c)
{
    const PlannerConfig d;
    c.spacing = j.value("spacing", d.spacing);
    c.d_lo = j.value("d_lo", d.d_lo);
    c.d_hi = j.value("d_hi", d.d_hi);
    c.waypoint_radius = j.value("waypoint_radius", d.waypoint_radius);
    c.tight_radius = j.value("tight_radius", d.tight_radius);
    c.heading_tolerance = j.value("heading_tolerance", d.heading_tolerance);
    c.shortcut_epsilon = j.value("shortcut_epsilon", d.shortcut_epsilon);
    c.max_replans = j.value("max_replans", d.max_replans);
    c.goal_margin = j.value("goal_margin", d.goal_margin);
    c.visibility_candidates = j.value("visibility_candidates", d.visibility_candidates);
    c.candidate_spacing = j.value("candidate_spacing", d.candidate_spacing);
}

void to_json(nlohmann::json& j, const ExpertTrajectory& t)
{
    nlohmann::json wps = nlohmann::json::array();
    for (const Vec2& w : t.waypoints) {
        wps.push_back({w.x, w.z});
    }
    j = nlohmann::json{{"path", t.path},
                       {"waypoints", wps},
                       {"actions", t.actions},
                       {"steps", t.steps},
                       {"start", t.start},
                       {"start_distance", t.start_distance},
                       {"success", t.success},
                       {"collisions", t.collisions},
                       {"replans", t.replans},
                       {"path_cost", t.path_cost},
                       {"goal_node", t.goal_node},
                       {"goal_visible", t.goal_visible},
                       {"error", t.error}};
}

void from_json(const nlohmann::json& j, ExpertTrajectory& t)
{
    j.at("path").get_to(t.path);
    t.waypoints.clear();
    for (const auto& w : j.at("waypoints")) {
        t.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
    }
    j.at("actions").get_to(t.actions);
    j.at("steps").get_to(t.steps);
    j.at("start").get_to(t.start);
    j.at("start_distance").get_to(t.start_distance);
    j.at("success").get_to(t.success);
    j.at("collisions").get_to(t.collisions);
    j.at("replans").get_to(t.replans);
    j.at("path_cost").get_to(t.path_cost);
    j.at("goal_node").get_to(t.goal_node);
    j.at("goal_visible").get_to(t.goal_visible);
    j.at("error").get_to(t.error);
}

} // namespace xenav
