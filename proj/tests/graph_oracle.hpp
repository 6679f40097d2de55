#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/dijkstra_shortest_paths.hpp>

#include "xenav/planner.hpp"
#include "xenav/rng.hpp"

namespace xenav::testing {

constexpr double kInf = std::numeric_limits<double>::infinity();

using BoostGraph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS, boost::no_property,
                                         boost::property<boost::edge_weight_t, double>>;

// Builds the 8-connected lattice graph from scratch (no corner cutting) and
// runs BGL Dijkstra from `source`.
inline std::vector<double> oracle_distances(const ReachGrid& grid, const std::vector<double>& cost, int source)
{
    BoostGraph bg(grid.size());
    auto open = [&](int x, int z) {
        return x >= 0 && z >= 0 && x < grid.nx && z < grid.nz && grid.reachable[grid.index(x, z)] != 0;
    };
    for (int iz = 0; iz < grid.nz; ++iz) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            if (!open(ix, iz)) {
                continue;
            }
            for (int dz = -1; dz <= 1; ++dz) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if ((dx == 0 && dz == 0) || !open(ix + dx, iz + dz)) {
                        continue;
                    }
                    if (dx != 0 && dz != 0 && (!open(ix + dx, iz) || !open(ix, iz + dz))) {
                        continue;
                    }
                    const int u = grid.index(ix, iz);
                    const int v = grid.index(ix + dx, iz + dz);
                    const double len = (dx != 0 && dz != 0 ? std::sqrt(2.0) : 1.0) * grid.spacing;
                    boost::add_edge(u, v, len * std::max(cost[u], cost[v]), bg);
                }
            }
        }
    }
    std::vector<double> dist(grid.size(), kInf);
    boost::dijkstra_shortest_paths(bg, source,
                                   boost::distance_map(boost::make_iterator_property_map(
                                       dist.begin(), boost::get(boost::vertex_index, bg)))
                                       .distance_inf(kInf));
    return dist;
}

inline ReachGrid random_grid(int n, double open_fraction, Rng& rng)
{
    ReachGrid grid;
    grid.spacing = 0.1;
    grid.origin = {0.05, 0.05};
    grid.nx = n;
    grid.nz = n;
    grid.reachable.resize(grid.size());
    for (auto& r : grid.reachable) {
        r = rng.uniform01() < open_fraction ? 1 : 0;
    }
    return grid;
}

inline std::vector<int> reachable_nodes(const ReachGrid& grid)
{
    std::vector<int> out;
    for (int i = 0; i < grid.size(); ++i) {
        if (grid.reachable[i] != 0) {
            out.push_back(i);
        }
    }
    return out;
}

} // namespace xenav::testing
