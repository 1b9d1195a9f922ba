#include "brmdp/config.hpp"

#include <fstream>
#include <set>

#include "brmdp/environments.hpp"

namespace brmdp {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.contains(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
    return get_or<T>(j, key, T{});
}

Eigen::VectorXd to_vector(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a non-empty array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(std::string(what) + " must hold numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Cell to_cell(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("a maze cell is a [row, col] pair");
    return {j[0].get<int>(), j[1].get<int>()};
}

// "theta": [atoms...] for a finite space, or {"lower": l, "upper": u}.
ParameterSpace parse_space(const json& j, const ParameterSpace& fallback) {
    if (!j.contains("theta")) return fallback;
    const json& t = j.at("theta");
    if (t.is_array()) return ParameterSpace::finite(to_vector(t, "theta"));
    check_keys(t, "theta", {"lower", "upper"});
    std::optional<double> upper;
    if (t.contains("upper")) upper = t.at("upper").get<double>();
    return ParameterSpace::continuous(get_or(t, "lower", -INFINITY), upper);
}

RiskFunctional parse_risk(const json& j, double default_alpha) {
    const auto name = get_or<std::string>(j, "risk", "mean");
    RiskFunctional r = RiskFunctional::parse(name, get_or(j, "alpha", default_alpha));
    return r;
}

}  // namespace

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

Environment parse_environment(const json& j) {
    const auto kind = require<std::string>(j, "environment", "config");
    if (kind == "inventory") {
        InventoryConfig c;
        const json blk = j.value("inventory", json::object());
        check_keys(blk, "inventory",
                   {"capacity", "horizon", "initial_level", "holding", "penalty", "order_cost", "discount", "theta"});
        c.capacity = get_or(blk, "capacity", c.capacity);
        c.horizon = get_or(blk, "horizon", c.horizon);
        c.initial_level = get_or(blk, "initial_level", c.initial_level);
        c.holding = get_or(blk, "holding", c.holding);
        c.penalty = get_or(blk, "penalty", c.penalty);
        c.order_cost = get_or(blk, "order_cost", c.order_cost);
        c.discount = get_or(blk, "discount", c.discount);
        c.family = ParametricFamily::poisson(parse_space(blk, c.family.space()));
        return build_inventory(c);
    }
    if (kind == "maze") {
        MazeConfig c;
        const json blk = j.value("maze", json::object());
        check_keys(blk, "maze", {"rows", "cols", "start", "exit", "shaky", "horizon", "discount", "variant", "theta",
                                 "stddev", "truncation"});
        c.rows = get_or(blk, "rows", c.rows);
        c.cols = get_or(blk, "cols", c.cols);
        if (blk.contains("start")) c.start = to_cell(blk.at("start"));
        if (blk.contains("exit")) c.exit = to_cell(blk.at("exit"));
        if (blk.contains("shaky")) {
            std::vector<Cell> cells;
            for (const auto& x : blk.at("shaky")) cells.push_back(to_cell(x));
            c.shaky = std::move(cells);
        }
        c.horizon = get_or(blk, "horizon", c.horizon);
        c.discount = get_or(blk, "discount", c.discount);
        const auto variant = get_or<std::string>(blk, "variant", "uncertain_transition");
        if (variant == "uncertain_transition") {
            if (blk.contains("stddev") || blk.contains("truncation"))
                throw ConfigError("stddev and truncation apply to the uncertain_cost variant only");
            c.family = ParametricFamily::geometric(parse_space(blk, c.family.space()));
        } else if (variant == "uncertain_cost") {
            c.family = ParametricFamily::truncated_normal(parse_space(blk, ParameterSpace::continuous(1.0)),
                                                          get_or(blk, "stddev", 2.0), get_or(blk, "truncation", 1.0));
        } else {
            throw ConfigError("unknown maze variant '" + variant + "'");
        }
        return build_maze(c);
    }
    throw ConfigError("unknown environment '" + kind + "'");
}

ExperimentConfig parse_experiment(const json& j) {
    check_keys(j, "config",
               {"$schema", "name", "environment", "inventory", "maze", "true_theta", "prior", "data_sizes",
                "replications", "seed", "alpha", "formulations", "solver", "evaluation", "v_star", "histogram_bin"});
    ExperimentConfig cfg;
    cfg.name = get_or<std::string>(j, "name", cfg.name);
    cfg.env = parse_environment(j);
    cfg.true_theta = require<double>(j, "true_theta", "config");
    cfg.env.family.check_parameter(cfg.true_theta);

    if (j.contains("prior")) {
        const json& p = j.at("prior");
        check_keys(p, "prior", {"type", "weights", "mean", "variance"});
        const auto type = get_or<std::string>(p, "type", "uniform");
        if (type == "uniform") {
            cfg.prior.kind = PriorSpec::Kind::uniform;
        } else if (type == "weights") {
            cfg.prior.kind = PriorSpec::Kind::weights;
            cfg.prior.weights = to_vector(p.at("weights"), "prior weights");
        } else if (type == "normal") {
            cfg.prior.kind = PriorSpec::Kind::normal;
            cfg.prior.mean = get_or(p, "mean", cfg.prior.mean);
            cfg.prior.variance = get_or(p, "variance", cfg.prior.variance);
        } else {
            throw ConfigError("unknown prior type '" + type + "'");
        }
    } else if (!cfg.env.family.space().is_finite()) {
        cfg.prior.kind = PriorSpec::Kind::normal;
    }
    make_prior(cfg.prior, cfg.env.family);  // validates

    cfg.data_sizes = get_or(j, "data_sizes", cfg.data_sizes);
    cfg.replications = get_or(j, "replications", cfg.replications);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    if (cfg.replications < 1) throw ConfigError("replications must be at least 1");
    for (int h : cfg.data_sizes)
        if (h < 0) throw ConfigError("data sizes must be non-negative");

    const double alpha = get_or(j, "alpha", 0.5);
    for (const auto& f : require<json>(j, "formulations", "config")) {
        check_keys(f, "formulation", {"label", "type", "risk", "alpha"});
        FormulationSpec spec;
        const auto type = get_or<std::string>(f, "type", "brmdp");
        if (type == "empirical") {
            spec.empirical = true;
            if (f.contains("risk")) throw ConfigError("the empirical formulation takes no risk functional");
        } else if (type != "brmdp") {
            throw ConfigError("unknown formulation type '" + type + "'");
        } else {
            spec.rho = parse_risk(f, alpha);
        }
        spec.label = get_or<std::string>(f, "label", spec.empirical ? "empirical" : spec.rho.name());
        for (const auto& other : cfg.formulations)
            if (other.label == spec.label) throw ConfigError("duplicate formulation label '" + spec.label + "'");
        cfg.formulations.push_back(spec);
    }
    if (cfg.formulations.empty()) throw ConfigError("at least one formulation is required");

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        check_keys(s, "solver", {"type", "grid", "tail_tol", "quadrature_points", "max_states", "prune", "outer",
                                 "inner", "common_draws", "snap", "budget", "cost_scale"});
        SolverSpec spec;
        const auto type = require<std::string>(s, "type", "solver");
        if (type == "exact") spec.kind = SolverKind::exact;
        else if (type == "nso") spec.kind = SolverKind::nso;
        else if (type == "ucb") spec.kind = SolverKind::ucb;
        else throw ConfigError("unknown solver type '" + type + "'");
        const double grid = get_or(s, "grid", 1e-6);
        const auto max_states = get_or<std::size_t>(s, "max_states", 5'000'000);
        const bool prune = get_or(s, "prune", true);
        spec.exact = {grid, get_or(s, "tail_tol", 1e-10), get_or(s, "quadrature_points", 256), max_states, prune};
        spec.nso = {{get_or(s, "outer", 100), get_or(s, "inner", 100), get_or(s, "common_draws", false)}, grid, get_or(s, "snap", false), max_states,
                    prune};
        spec.ucb = {get_or(s, "budget", 1000), get_or(s, "cost_scale", 0.0), grid, max_states};
        if (!(grid > 0.0)) throw ConfigError("solver grid must be positive");
        cfg.solver = spec;
    }

    if (j.contains("evaluation")) {
        const json& e = j.at("evaluation");
        check_keys(e, "evaluation", {"mode", "episodes", "quadrature_points"});
        const auto mode = get_or<std::string>(e, "mode", "exact");
        if (mode == "exact") cfg.evaluation.mode = EvalMode::exact;
        else if (mode == "rollout") cfg.evaluation.mode = EvalMode::rollout;
        else throw ConfigError("unknown evaluation mode '" + mode + "'");
        cfg.evaluation.episodes = get_or(e, "episodes", cfg.evaluation.episodes);
        cfg.evaluation.quadrature_points = get_or(e, "quadrature_points", cfg.evaluation.quadrature_points);
    }
    if (j.contains("v_star")) cfg.v_star = j.at("v_star").get<double>();
    cfg.histogram_bin = get_or(j, "histogram_bin", cfg.histogram_bin);
    if (!(cfg.histogram_bin > 0.0)) throw ConfigError("histogram_bin must be positive");
    return cfg;
}

BanditSpec parse_bandit(const json& j) {
    check_keys(j, "bandit", {"$schema", "machines", "weights", "risk", "alpha", "checkpoints", "runs", "seed"});
    BanditSpec spec;
    for (const auto& m : require<json>(j, "machines", "bandit")) {
        std::vector<CostSampler> row;
        for (const auto& c : m) {
            check_keys(c, "cost", {"type", "p", "lo", "hi", "values", "probs"});
            const auto type = require<std::string>(c, "type", "cost");
            if (type == "bernoulli") row.push_back(CostSampler::bernoulli(require<double>(c, "p", "cost")));
            else if (type == "uniform")
                row.push_back(CostSampler::uniform(require<double>(c, "lo", "cost"), require<double>(c, "hi", "cost")));
            else if (type == "discrete")
                row.push_back(CostSampler::discrete(to_vector(c.at("values"), "values"), to_vector(c.at("probs"), "probs")));
            else throw ConfigError("unknown cost type '" + type + "'");
        }
        spec.instance.costs.push_back(std::move(row));
    }
    if (j.contains("weights")) spec.instance.weights = to_vector(j.at("weights"), "weights");
    spec.instance.rho = parse_risk(j, 0.5);
    spec.instance.validate();
    spec.checkpoints = get_or(j, "checkpoints", spec.checkpoints);
    spec.runs = get_or(j, "runs", spec.runs);
    spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed);
    for (long long n : spec.checkpoints)
        if (n < spec.instance.machines()) throw ConfigError("every checkpoint must be at least the number of machines");
    if (spec.runs < 1) throw ConfigError("runs must be at least 1");
    return spec;
}

}  // namespace brmdp
