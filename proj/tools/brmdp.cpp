#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "brmdp/bandit.hpp"
#include "brmdp/config.hpp"
#include "brmdp/harness.hpp"
#include "brmdp/infinite.hpp"

using namespace brmdp;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::string formulation;
    int data_size = 0;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--formulation", c.formulation, "Formulation label (default: the first one)");
    app->add_option("--data-size", c.data_size, "Number of observations drawn from the true parameter")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--seed", c.seed, "Override the config seed");
}

struct Loaded {
    ExperimentConfig cfg;
    FormulationSpec formulation;
    std::vector<double> data;
    Stream root;
};

Loaded load(const Common& c) {
    Loaded l{parse_experiment(read_json(c.config)), {}, {}, Stream::keyed({0})};
    if (c.seed) l.cfg.seed = *c.seed;
    auto it = std::find_if(l.cfg.formulations.begin(), l.cfg.formulations.end(),
                           [&](const FormulationSpec& f) { return c.formulation.empty() || f.label == c.formulation; });
    if (it == l.cfg.formulations.end()) throw ConfigError("no formulation labelled '" + c.formulation + "'");
    l.formulation = *it;
    // Same streams as replication 0 of `experiment` at this data size.
    l.root = Stream::keyed({l.cfg.seed});
    Stream ds = l.root.child({1, static_cast<std::uint64_t>(c.data_size), 0});
    l.data.resize(static_cast<std::size_t>(c.data_size));
    for (auto& x : l.data) x = l.cfg.env.family.sample(l.cfg.true_theta, ds);
    return l;
}

std::string state_name(const Environment& env, int s) {
    return env.describe_state ? env.describe_state(s) : std::to_string(s);
}

std::string key_string(const PosteriorKey& k) {
    std::string out;
    for (std::size_t i = 0; i < k.coords.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(k.coords[i]);
    }
    return out;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << csv_field(fields[i]);
    os << "\r\n";
}

std::ofstream open_file(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    return os;
}

int run_solve_finite(const Common& c, const std::string& out) {
    Loaded l = load(c);
    double estimate = NAN;
    const std::size_t fidx = static_cast<std::size_t>(
        std::find_if(l.cfg.formulations.begin(), l.cfg.formulations.end(),
                     [&](const FormulationSpec& f) { return f.label == l.formulation.label; }) -
        l.cfg.formulations.begin());
    const SolveResult sol = solve_formulation(l.cfg, l.formulation, l.data,
                                              l.root.child({2, static_cast<std::uint64_t>(c.data_size), 0, fidx}),
                                              &estimate);
    json j = {{"formulation", l.formulation.label}, {"data_size", c.data_size},   {"estimate", estimate},
              {"value", sol.value},                 {"action", sol.action},       {"augmented_states", sol.stats.augmented_states},
              {"beliefs", sol.stats.beliefs},       {"pruned_actions", sol.stats.pruned_actions}};
    std::cout << j.dump(2) << '\n';
    if (!out.empty()) {
        struct Row {
            int t, s;
            BeliefId b;
            StageEntry e;
        };
        std::vector<Row> rows;
        for (int t = 0; t < sol.table->stages(); ++t)
            sol.table->for_each(t, [&](int s, BeliefId b, const StageEntry& e) { rows.push_back({t, s, b, e}); });
        std::sort(rows.begin(), rows.end(),
                  [](const Row& x, const Row& y) { return std::tie(x.t, x.s, x.b) < std::tie(y.t, y.s, y.b); });
        auto os = open_file(out);
        write_csv_row(os, {"stage", "state", "state_name", "belief", "posterior_mean", "value", "action"});
        const auto& store = sol.table->beliefs();
        for (const auto& r : rows)
            write_csv_row(os, {std::to_string(r.t), std::to_string(r.s), state_name(l.cfg.env, r.s),
                               key_string(store.key(r.b)), format_double(posterior_mean(store.posterior(r.b))),
                               format_double(r.e.value), std::to_string(r.e.action)});
    }
    return 0;
}

struct InfiniteArgs {
    std::optional<double> gamma;
    double epsilon = 1e-6;
    std::string backend = "exact";
    std::size_t universe = 200;
    int depth = 3;
    int max_iters = 10000;
    int outer = 100, inner = 100;
};

int run_solve_infinite(const Common& c, const InfiniteArgs& a, const std::string& out) {
    Loaded l = load(c);
    if (l.formulation.empirical) throw ConfigError("infinite-horizon solve takes a BR-MDP formulation");
    Environment env = l.cfg.env;
    if (a.gamma) env.discount = *a.gamma;
    env.horizon.reset();
    const Posterior mu0 = init_from_data(make_prior(l.cfg.prior, env.family), env.family, l.data);
    const auto universe = reachable_universe(env, mu0, a.depth, a.universe);
    OperatorOptions opts;
    if (a.backend == "exact") opts.backend = Backend::exact;
    else if (a.backend == "nso") opts.backend = Backend::nso;
    else throw ConfigError("unknown backend '" + a.backend + "'");
    opts.budget = {a.outer, a.inner};
    opts.seed = l.cfg.seed;
    OperatorContext ctx(env, l.formulation.rho, universe, opts);
    const auto res = value_iteration(ctx, Eigen::VectorXd::Zero(ctx.size()), a.epsilon, a.max_iters);
    json j = {{"formulation", l.formulation.label}, {"discount", env.discount},   {"backend", a.backend},
              {"universe", ctx.size()},             {"iterations", res.iterations}, {"converged", res.converged},
              {"residual", res.residual},           {"value", res.value[0]},      {"action", res.actions[0]},
              {"projections", ctx.projections()}};
    std::cout << j.dump(2) << '\n';
    if (!out.empty()) {
        auto os = open_file(out);
        write_csv_row(os, {"node", "state", "state_name", "posterior_mean", "value", "action"});
        for (Eigen::Index i = 0; i < ctx.size(); ++i) {
            const auto [s, b] = ctx.nodes()[static_cast<std::size_t>(i)];
            write_csv_row(os, {std::to_string(i), std::to_string(s), state_name(env, s),
                               format_double(posterior_mean(ctx.store()->posterior(b))), format_double(res.value[i]),
                               std::to_string(res.actions[i])});
        }
    }
    return res.converged ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian risk MDP solver"};
    app.require_subcommand(1);

    // experiment
    std::string exp_config, exp_out;
    int threads = 1;
    std::optional<std::uint64_t> exp_seed;
    auto* exp = app.add_subcommand("experiment", "Run replications and write CSV results");
    exp->add_option("--config", exp_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    exp->add_option("--out", exp_out, "Output directory")->required();
    exp->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    exp->add_option("--seed", exp_seed, "Override the config seed");

    // solve
    Common solve_c;
    std::string horizon = "finite", solve_out;
    InfiniteArgs inf;
    auto* solve = app.add_subcommand("solve", "Solve one formulation and print the root value");
    add_common(solve, solve_c);
    solve->add_option("--horizon", horizon, "finite or infinite")->check(CLI::IsMember({"finite", "infinite"}));
    solve->add_option("--out", solve_out, "Write the value table as CSV");
    solve->add_option("--gamma", inf.gamma, "Discount factor (infinite horizon)");
    solve->add_option("--epsilon", inf.epsilon, "Value-iteration tolerance")->check(CLI::PositiveNumber);
    solve->add_option("--backend", inf.backend, "exact or nso")->check(CLI::IsMember({"exact", "nso"}));
    solve->add_option("--universe", inf.universe, "Maximum augmented states in the universe")->check(CLI::PositiveNumber);
    solve->add_option("--depth", inf.depth, "Stages explored when building the universe")->check(CLI::NonNegativeNumber);
    solve->add_option("--max-iters", inf.max_iters, "Value-iteration sweep cap")->check(CLI::PositiveNumber);
    solve->add_option("--outer", inf.outer, "NSO outer samples")->check(CLI::PositiveNumber);
    solve->add_option("--inner", inf.inner, "NSO inner samples")->check(CLI::PositiveNumber);

    // evaluate
    Common eval_c;
    std::optional<std::string> mode;
    std::optional<int> episodes;
    auto* eval = app.add_subcommand("evaluate", "Solve one formulation and evaluate it under the true parameter");
    add_common(eval, eval_c);
    eval->add_option("--mode", mode, "exact or rollout")->check(CLI::IsMember({"exact", "rollout"}));
    eval->add_option("--episodes", episodes, "Rollout episodes")->check(CLI::PositiveNumber);

    // bandit
    std::string instance, bandit_out;
    std::optional<int> runs;
    std::optional<std::uint64_t> bandit_seed;
    int bandit_threads = 1;
    auto* bandit = app.add_subcommand("bandit", "Simulate UCB on a bandit instance and write the regret curve");
    bandit->add_option("--instance", instance, "Bandit instance (JSON)")->required()->check(CLI::ExistingFile);
    bandit->add_option("--out", bandit_out, "Regret CSV")->required();
    bandit->add_option("--runs", runs, "Independent runs")->check(CLI::PositiveNumber);
    bandit->add_option("--seed", bandit_seed, "Override the instance seed");
    bandit->add_option("--threads", bandit_threads, "Worker threads")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*exp) {
            ExperimentConfig cfg = parse_experiment(read_json(exp_config));
            if (exp_seed) cfg.seed = *exp_seed;
            std::filesystem::create_directories(exp_out);
            std::ofstream log(std::filesystem::path(exp_out) / "run.log");
            const auto out = run_experiment(cfg, threads, &log);
            emit(out, cfg, exp_out);
            for (const auto& r : out.summary)
                std::cout << r.formulation << " H=" << r.data_size << " average=" << format_double(r.average)
                          << " std=" << format_double(r.std) << " D=" << format_double(r.d_value)
                          << (r.failures ? " failures=" + std::to_string(r.failures) : "") << '\n';
            return 0;
        }
        if (*solve) {
            return horizon == "infinite" ? run_solve_infinite(solve_c, inf, solve_out)
                                         : run_solve_finite(solve_c, solve_out);
        }
        if (*eval) {
            Loaded l = load(eval_c);
            if (mode) l.cfg.evaluation.mode = *mode == "exact" ? EvalMode::exact : EvalMode::rollout;
            if (episodes) l.cfg.evaluation.episodes = *episodes;
            const auto h = static_cast<std::uint64_t>(eval_c.data_size);
            const std::size_t fidx = static_cast<std::size_t>(
                std::find_if(l.cfg.formulations.begin(), l.cfg.formulations.end(),
                             [&](const FormulationSpec& f) { return f.label == l.formulation.label; }) -
                l.cfg.formulations.begin());
            double estimate = NAN;
            const SolveResult sol =
                solve_formulation(l.cfg, l.formulation, l.data, l.root.child({2, h, 0, fidx}), &estimate);
            const Evaluation ev = evaluate_true_performance(l.cfg.env, sol, l.cfg.true_theta, l.cfg.evaluation,
                                                            l.root.child({3, h, 0, fidx}));
            json j = {{"formulation", l.formulation.label}, {"data_size", eval_c.data_size},
                      {"estimate", estimate},               {"solver_value", sol.value},
                      {"true_performance", ev.value},       {"std_error", ev.std_error},
                      {"v_star", true_optimum(l.cfg)}};
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (*bandit) {
            BanditSpec spec = parse_bandit(read_json(instance));
            if (runs) spec.runs = *runs;
            if (bandit_seed) spec.seed = *bandit_seed;
            const auto curve =
                regret_curve(spec.instance, spec.checkpoints, spec.runs, Stream::keyed({spec.seed}), bandit_threads);
            auto os = open_file(bandit_out);
            write_csv_row(os, {"n", "mean_regret", "bound"});
            for (const auto& p : curve)
                write_csv_row(os, {std::to_string(p.n), format_double(p.mean_regret), format_double(p.bound)});
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
