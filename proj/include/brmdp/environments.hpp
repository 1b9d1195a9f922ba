#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "brmdp/model.hpp"

namespace brmdp {

struct InventoryConfig {
    int capacity = 3;
    int horizon = 6;
    int initial_level = 1;
    double holding = 4.0;
    double penalty = 4.0;
    double order_cost = 1.0;
    double discount = 0.95;
    /// Demand family; must be Poisson.
    ParametricFamily family =
        ParametricFamily::poisson(ParameterSpace::finite((Eigen::VectorXd(5) << 1.2, 1.6, 2.0, 2.4, 2.8).finished()));
};

/// States are inventory levels 0..capacity; action a orders a units
/// (0 <= a <= capacity - level). Demand beyond stock is lost.
Environment build_inventory(const InventoryConfig& cfg);

using Cell = std::pair<int, int>;  // (row, col)

struct MazeConfig {
    int rows = 3;
    int cols = 9;
    Cell start{0, 0};
    Cell exit{2, 8};
    /// Shaky cells; nullopt selects the default layout.
    std::optional<std::vector<Cell>> shaky;
    int horizon = 40;
    double discount = 1.0;
    /// Time to cross a shaky cell: geometric (uncertain transition) or
    /// truncated normal (uncertain cost).
    ParametricFamily family = ParametricFamily::geometric(
        ParameterSpace::finite((Eigen::VectorXd(3) << 1.0 / 5.5, 1.0 / 5.0, 1.0 / 4.5).finished()));
};

/// Default shaky layout: four two-cell walls that force the all-white route
/// into a snake of 18 cells.
std::vector<Cell> default_maze_mask();

/// One state per cell, index row * cols + col. Each stage costs the time to
/// cross the current cell (1 if white, xi if shaky); the exit is absorbing
/// with zero cost. Actions 0..3 = up, down, left, right, restricted to moves
/// that stay on the grid.
Environment build_maze(const MazeConfig& cfg);

/// Length of the shortest start-to-exit route through white cells only
/// (cells crossed before the exit); nullopt if none exists.
std::optional<int> maze_white_route(const MazeConfig& cfg);
/// Same without avoiding shaky cells.
std::optional<int> maze_shortest_route(const MazeConfig& cfg);

}  // namespace brmdp
