#include "brmdp/environments.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <string>

namespace brmdp {

Environment build_inventory(const InventoryConfig& cfg) {
    if (cfg.capacity < 0) throw ConfigError("inventory capacity must be non-negative");
    if (cfg.initial_level < 0 || cfg.initial_level > cfg.capacity)
        throw ConfigError("initial inventory level must lie in [0, capacity]");
    if (cfg.holding < 0 || cfg.penalty < 0 || cfg.order_cost < 0)
        throw ConfigError("inventory unit costs must be non-negative");
    if (cfg.family.kind() != ParametricFamily::Kind::poisson)
        throw ConfigError("inventory demand must be Poisson");

    Environment env;
    env.name = "inventory";
    env.num_states = cfg.capacity + 1;
    env.actions.resize(static_cast<std::size_t>(env.num_states));
    for (int s = 0; s <= cfg.capacity; ++s)
        for (int a = 0; a <= cfg.capacity - s; ++a) env.actions[static_cast<std::size_t>(s)].push_back(a);

    env.transition = [](int s, int a, double xi) {
        return static_cast<int>(std::max(static_cast<double>(s + a) - xi, 0.0));
    };
    const double h = cfg.holding, p = cfg.penalty, c = cfg.order_cost;
    env.cost = [h, p, c](int s, int a, double xi) {
        const double stock = static_cast<double>(s + a);
        return h * std::max(stock - xi, 0.0) + p * std::max(xi - stock, 0.0) + c * a;
    };
    env.horizon = cfg.horizon;
    env.discount = cfg.discount;
    env.family = cfg.family;
    env.initial_state = cfg.initial_level;
    env.describe_state = [](int s) { return "level=" + std::to_string(s); };

    // Largest demand the exact solvers see, for the declared cost bound.
    double max_demand = 0.0;
    const auto& space = cfg.family.space();
    if (space.is_finite()) {
        max_demand = truncate_support(cfg.family, space.atoms()).values.maxCoeff();
    } else if (space.upper()) {
        Eigen::VectorXd hi(1);
        hi << *space.upper();
        max_demand = truncate_support(cfg.family, hi).values.maxCoeff();
    } else {
        max_demand = INFINITY;
    }
    env.cost_bound = std::max(h, c) * cfg.capacity + p * max_demand;
    env.value_lower_bound = [](int, int) { return 0.0; };
    env.pathwise_lower_bound = env.value_lower_bound;
    env.validate();
    return env;
}

std::vector<Cell> default_maze_mask() {
    return {{0, 1}, {1, 1}, {1, 3}, {2, 3}, {0, 5}, {1, 5}, {1, 7}, {2, 7}};
}

namespace {

struct Grid {
    int rows, cols;
    std::vector<char> shaky;  // per cell

    [[nodiscard]] int index(Cell c) const { return c.first * cols + c.second; }
    [[nodiscard]] bool inside(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
};

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

Grid make_grid(const MazeConfig& cfg) {
    if (cfg.rows <= 0 || cfg.cols <= 0) throw ConfigError("maze dimensions must be positive");
    Grid g{cfg.rows, cfg.cols, std::vector<char>(static_cast<std::size_t>(cfg.rows * cfg.cols), 0)};
    for (Cell c : {cfg.start, cfg.exit})
        if (!g.inside(c.first, c.second)) throw ConfigError("maze start and exit must lie on the grid");
    if (cfg.start == cfg.exit) throw ConfigError("maze start and exit must differ");
    for (Cell c : cfg.shaky ? *cfg.shaky : default_maze_mask()) {
        if (!g.inside(c.first, c.second)) throw ConfigError("shaky cell off the grid");
        if (c == cfg.start || c == cfg.exit) throw ConfigError("start and exit cannot be shaky");
        g.shaky[static_cast<std::size_t>(g.index(c))] = 1;
    }
    return g;
}

// Cheapest cost of the cells crossed from each cell to the exit, where
// white cells cost 1 and shaky cells cost `shaky_cost` (inf = impassable).
std::vector<double> route_costs(const Grid& g, int exit, double shaky_cost) {
    const auto n = static_cast<std::size_t>(g.rows * g.cols);
    std::vector<double> d(n, INFINITY);
    d[static_cast<std::size_t>(exit)] = 0.0;
    // Bellman-Ford; the grid is tiny.
    for (std::size_t pass = 0; pass < n; ++pass) {
        bool changed = false;
        for (int s = 0; s < static_cast<int>(n); ++s) {
            if (s == exit) continue;
            const double w = g.shaky[static_cast<std::size_t>(s)] ? shaky_cost : 1.0;
            const int r = s / g.cols, c = s % g.cols;
            for (int k = 0; k < 4; ++k) {
                const int r2 = r + kDr[k], c2 = c + kDc[k];
                if (!g.inside(r2, c2)) continue;
                const double cand = w + d[static_cast<std::size_t>(r2 * g.cols + c2)];
                if (cand < d[static_cast<std::size_t>(s)]) {
                    d[static_cast<std::size_t>(s)] = cand;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    return d;
}

std::optional<int> as_route(double v) {
    return std::isfinite(v) ? std::optional<int>(static_cast<int>(std::lround(v))) : std::nullopt;
}

}  // namespace

std::optional<int> maze_white_route(const MazeConfig& cfg) {
    const Grid g = make_grid(cfg);
    return as_route(route_costs(g, g.index(cfg.exit), INFINITY)[static_cast<std::size_t>(g.index(cfg.start))]);
}

std::optional<int> maze_shortest_route(const MazeConfig& cfg) {
    const Grid g = make_grid(cfg);
    return as_route(route_costs(g, g.index(cfg.exit), 1.0)[static_cast<std::size_t>(g.index(cfg.start))]);
}

Environment build_maze(const MazeConfig& cfg) {
    auto grid = std::make_shared<const Grid>(make_grid(cfg));
    if (cfg.horizon <= 0) throw ConfigError("maze horizon must be positive");
    if (cfg.family.kind() == ParametricFamily::Kind::poisson)
        throw ConfigError("maze crossing times need a geometric or truncated-normal family");
    if (cfg.family.support_min() < 1.0) throw ConfigError("maze crossing times must be at least 1");

    if (!cfg.shaky) {
        // The default layout must keep its designed route structure.
        const auto white = maze_white_route(cfg);
        const auto any = maze_shortest_route(cfg);
        if (!white || *white != 18 || !any || *any >= *white)
            throw ConfigError("default maze layout lost its 18-cell white route");
    }

    const int exit = grid->index(cfg.exit);
    Environment env;
    env.name = "maze";
    env.num_states = grid->rows * grid->cols;
    env.actions.resize(static_cast<std::size_t>(env.num_states));
    for (int s = 0; s < env.num_states; ++s) {
        const int r = s / grid->cols, c = s % grid->cols;
        for (int k = 0; k < 4; ++k)
            if (grid->inside(r + kDr[k], c + kDc[k])) env.actions[static_cast<std::size_t>(s)].push_back(k);
    }
    env.transition = [grid, exit](int s, int a, double) {
        if (s == exit) return s;
        return (s / grid->cols + kDr[a]) * grid->cols + (s % grid->cols + kDc[a]);
    };
    env.cost = [grid, exit](int s, int, double xi) {
        if (s == exit) return 0.0;
        return grid->shaky[static_cast<std::size_t>(s)] ? xi : 1.0;
    };
    env.observes = [grid](int s) { return grid->shaky[static_cast<std::size_t>(s)] != 0; };
    env.terminal = [exit](int s) { return s == exit; };
    env.horizon = cfg.horizon;
    env.discount = cfg.discount;
    env.family = cfg.family;
    env.initial_state = grid->index(cfg.start);
    env.describe_state = [grid](int s) {
        return "(" + std::to_string(s / grid->cols) + "," + std::to_string(s % grid->cols) + ")";
    };

    const auto& space = cfg.family.space();
    if (cfg.family.is_discrete() && space.is_finite()) {
        env.cost_bound = truncate_support(cfg.family, space.atoms()).values.maxCoeff();
    } else {
        env.cost_bound = INFINITY;  // unbounded crossing time
    }

    if (cfg.discount < 1.0) {
        env.validate();
        return env;
    }
    // Every stage off the exit costs at least 1, so a run either reaches the
    // exit (paying at least the cheapest route) or pays 1 per remaining stage.
    double shaky_floor = cfg.family.support_min();
    if (space.is_finite()) {
        shaky_floor = INFINITY;
        for (double th : space.atoms()) shaky_floor = std::min(shaky_floor, cfg.family.mean(th));
    }
    auto exact_d = std::make_shared<const std::vector<double>>(route_costs(*grid, exit, shaky_floor));
    auto path_d = std::make_shared<const std::vector<double>>(route_costs(*grid, exit, cfg.family.support_min()));
    env.value_lower_bound = [exact_d](int s, int rem) {
        return std::min((*exact_d)[static_cast<std::size_t>(s)], static_cast<double>(rem));
    };
    env.pathwise_lower_bound = [path_d](int s, int rem) {
        return std::min((*path_d)[static_cast<std::size_t>(s)], static_cast<double>(rem));
    };

    env.validate();
    return env;
}

}  // namespace brmdp
