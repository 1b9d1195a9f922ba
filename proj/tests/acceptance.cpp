// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "brmdp/bandit.hpp"
#include "brmdp/config.hpp"
#include "brmdp/harness.hpp"
#include "brmdp/infinite.hpp"
#include "oracles.hpp"
#include "tiny_env.hpp"

using namespace brmdp;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [" << what << "]";
        }
    }
};

struct Context {
    fs::path configs;
    fs::path cli;
    fs::path scratch;
    std::map<std::string, fs::path> single_thread_runs;  // config name -> emitted dir
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig load(const Context& ctx, const std::string& name) {
    return parse_experiment(read_json(ctx.configs / name));
}

const SummaryRow& row(const ExperimentOutput& out, const std::string& label, int h) {
    for (const auto& r : out.summary)
        if (r.formulation == label && r.data_size == h) return r;
    throw std::runtime_error("no summary row for " + label + " H=" + std::to_string(h));
}

// Runs a config on one thread and keeps the CSVs for the determinism check.
ExperimentOutput run_and_keep(Context& ctx, const std::string& name, const ExperimentConfig& cfg) {
    const auto out = run_experiment(cfg, 1);
    const fs::path dir = ctx.scratch / "threads1" / fs::path(name).stem();
    fs::remove_all(dir);
    emit(out, cfg, dir);
    ctx.single_thread_runs[name] = dir;
    return out;
}

using Reference = std::map<std::string, std::map<int, double>>;

void check_cells(Verdict& v, const ExperimentOutput& out, const Reference& ref, double tol) {
    double worst = 0.0;
    for (const auto& [label, cells] : ref)
        for (const auto& [h, target] : cells) {
            const auto& r = row(out, label, h);
            const double dev = std::abs(r.average - target);
            worst = std::max(worst, dev);
            v.require(r.failures == 0, label + " H=" + std::to_string(h) + " had failed replications");
            v.require(dev <= tol, label + " H=" + std::to_string(h) + " average " + fmt(r.average, 6) +
                                      " vs " + fmt(target) + " (tol " + fmt(tol) + ")");
        }
    v.detail << " worst cell deviation " << fmt(worst, 3) << ";";
}

void print_rows(Verdict& v, const ExperimentOutput& out, int h) {
    for (const auto& r : out.summary)
        if (r.data_size == h)
            v.detail << " " << r.formulation << "@" << h << "=" << fmt(r.average, 5) << "/D " << fmt(r.d_value, 3)
                     << ";";
}

const std::vector<std::string> kLabels{"BR-MDP mean", "BR-MDP VaR", "BR-MDP CVaR", "empirical"};

Reference reference(const std::vector<int>& hs, const std::vector<std::vector<double>>& by_label) {
    Reference ref;
    for (std::size_t f = 0; f < kLabels.size(); ++f)
        for (std::size_t i = 0; i < hs.size(); ++i) ref[kLabels[f]][hs[i]] = by_label[f][i];
    return ref;
}

// ---------------------------------------------------------------------------

Verdict c1_optima(Context& ctx) {
    Verdict v;
    for (auto [name, target, tol] : {std::tuple{"inventory.json", 30.05, 0.01},
                                     std::tuple{"maze_finite.json", 18.0, 1e-9}}) {
        const auto cfg = load(ctx, name);
        const auto t0 = Clock::now();
        const double vs = true_optimum(cfg);
        const double secs = seconds_since(t0);
        v.detail << " " << cfg.env.name << " V*=" << format_double(vs) << " in " << fmt(secs, 3) << " s;";
        v.require(std::abs(vs - target) <= tol, cfg.env.name + " optimum off target");
        v.require(secs < 60.0, cfg.env.name + " took longer than 60 s");
    }
    return v;
}

Verdict c2_inventory(Context& ctx) {
    Verdict v;
    const auto cfg = load(ctx, "inventory.json");
    const auto t0 = Clock::now();
    const auto out = run_and_keep(ctx, "inventory.json", cfg);
    const double secs = seconds_since(t0);
    const Reference ref = reference({10, 20, 100, 1000}, {{30.37, 30.34, 30.18, 30.05},
                                                          {30.22, 30.21, 30.10, 30.05},
                                                          {30.22, 30.20, 30.10, 30.05},
                                                          {30.34, 30.26, 30.13, 30.05}});
    check_cells(v, out, ref, 0.15);
    for (const auto& l : kLabels) {
        const auto& r = row(out, l, 1000);
        v.require(std::abs(r.average - 30.05) <= 0.02 && r.std <= 0.05, l + " H=1000 not settled");
    }
    for (int h : {10, 20}) {
        v.require(row(out, "BR-MDP VaR", h).d_value < row(out, "BR-MDP mean", h).d_value,
                  "D(VaR) < D(mean) fails at H=" + std::to_string(h));
        v.require(row(out, "BR-MDP CVaR", h).d_value < row(out, "empirical", h).d_value,
                  "D(CVaR) < D(empirical) fails at H=" + std::to_string(h));
    }
    v.require(secs <= 7200.0, "runtime above 2 h");
    print_rows(v, out, 10);
    v.detail << " " << fmt(secs, 3) << " s;";
    return v;
}

Verdict c3_maze(Context& ctx) {
    Verdict v;
    const auto cfg = load(ctx, "maze_finite.json");
    const auto t0 = Clock::now();
    const auto out = run_and_keep(ctx, "maze_finite.json", cfg);
    const double secs = seconds_since(t0);
    const Reference ref = reference({10, 20, 100, 1000}, {{18.49, 18.37, 18.17, 18.00},
                                                          {18.33, 18.26, 18.11, 18.00},
                                                          {18.33, 18.26, 18.11, 18.00},
                                                          {18.44, 18.29, 18.12, 18.00}});
    check_cells(v, out, ref, 0.15);
    for (const auto& l : kLabels)
        v.require(std::abs(row(out, l, 1000).average - 18.0) <= 0.02, l + " H=1000 not at 18");
    const double dv = row(out, "BR-MDP VaR", 10).d_value, dc = row(out, "BR-MDP CVaR", 10).d_value;
    v.require(std::abs(dv - dc) <= 1e-12 * std::max(1.0, std::abs(dv)), "D(VaR) != D(CVaR) at H=10");
    v.require(dv < row(out, "BR-MDP mean", 10).d_value, "D(VaR) < D(mean) fails at H=10");
    print_rows(v, out, 10);
    v.detail << " " << fmt(secs, 3) << " s;";
    return v;
}

Verdict c4_continuous_maze(Context& ctx) {
    Verdict v;
    const auto cfg = load(ctx, "maze_continuous.json");
    const auto t0 = Clock::now();
    const auto out = run_and_keep(ctx, "maze_continuous.json", cfg);
    const double secs = seconds_since(t0);
    const Reference ref = reference({10}, {{18.36}, {18.07}, {18.07}, {18.20}});
    check_cells(v, out, ref, 0.2);
    const double dm = row(out, "BR-MDP mean", 10).d_value, dv = row(out, "BR-MDP VaR", 10).d_value,
                 de = row(out, "empirical", 10).d_value;
    v.require(dv < de && de < dm, "D(VaR) < D(empirical) < D(mean) fails");
    print_rows(v, out, 10);
    v.detail << " " << fmt(secs, 3) << " s;";
    return v;
}

Verdict c5_operator(Context& ctx) {
    Verdict v;
    Environment env = load(ctx, "inventory.json").env;
    env.horizon.reset();
    const auto universe = reachable_universe(env, uniform_prior(env.family.space()), 3, 200);
    v.detail << " universe " << universe.size() << " nodes;";
    v.require(universe.size() <= 200, "universe larger than 200");
    const double gamma = env.discount, vmax = env.cost_bound / (1.0 - gamma);
    Stream rs = Stream::keyed({5, 1});
    int sweeps_checked = 0;
    for (auto rho : {RiskFunctional::expectation(), RiskFunctional::var(0.8), RiskFunctional::cvar(0.8)}) {
        OperatorContext op(env, rho, universe);
        const auto n = op.size();
        const std::string tag = rho.name();
        double worst_contraction = -INFINITY, worst_shift = 0.0;
        bool monotone = true;
        for (int pair = 0; pair < 100; ++pair) {
            Eigen::VectorXd a(n), b(n), up(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                a[i] = vmax * rs.uniform();
                b[i] = vmax * rs.uniform();
                up[i] = a[i] + 10.0 * rs.uniform();
            }
            const Eigen::VectorXd ta = bellman_apply(op, a), tb = bellman_apply(op, b), tu = bellman_apply(op, up);
            worst_contraction = std::max(worst_contraction, (ta - tb).lpNorm<Eigen::Infinity>() -
                                                                gamma * (a - b).lpNorm<Eigen::Infinity>());
            monotone = monotone && ((tu - ta).array() >= -1e-10).all();
            const double r = 5.0 * rs.uniform();
            const Eigen::VectorXd ts = bellman_apply(op, (a.array() + r).matrix());
            worst_shift = std::max(worst_shift, (ts.array() - ta.array() - gamma * r).abs().maxCoeff());
        }
        v.require(worst_contraction <= 1e-10, tag + " contraction violated by " + fmt(worst_contraction));
        v.require(monotone, tag + " monotonicity violated");
        v.require(worst_shift <= 1e-10, tag + " weight shift off by " + fmt(worst_shift));

        const double eps = 1e-6;
        const auto ref = value_iteration(op, Eigen::VectorXd::Zero(n), 1e-12, 100000);
        v.require(ref.converged, tag + " reference iteration did not converge");
        Eigen::VectorXd r0(n);
        for (Eigen::Index i = 0; i < n; ++i) r0[i] = vmax * rs.uniform();
        std::vector<Eigen::VectorXd> finals;
        for (const Eigen::VectorXd& v0 :
             {Eigen::VectorXd(Eigen::VectorXd::Zero(n)), Eigen::VectorXd(Eigen::VectorXd::Constant(n, vmax)), r0}) {
            const double d0 = (v0 - ref.value).lpNorm<Eigen::Infinity>();
            bool envelope = true;
            const auto res = value_iteration(op, v0, eps, 100000, [&](int k, const Eigen::VectorXd& vk) {
                ++sweeps_checked;
                const double dk = (vk - ref.value).lpNorm<Eigen::Infinity>();
                if (dk > std::pow(gamma, k) * d0 + 1e-9) envelope = false;
            });
            v.require(res.converged, tag + " value iteration did not converge");
            v.require(envelope, tag + " envelope violated");
            finals.push_back(res.value);
        }
        for (std::size_t i = 1; i < finals.size(); ++i)
            v.require((finals[i] - finals[0]).lpNorm<Eigen::Infinity>() <= 2.0 * eps,
                      tag + " initializations disagree");
    }
    v.detail << " 3 risk functionals x 100 pairs, " << sweeps_checked << " sweeps checked against the envelope;";
    return v;
}

Verdict c6_bandit(Context&) {
    Verdict v;
    BanditInstance inst;
    inst.costs = {{CostSampler::bernoulli(0.1)}, {CostSampler::bernoulli(0.9)}};
    const auto curve = regret_curve(inst, {100, 1000, 10000}, 200, Stream::keyed({6, 1}));
    for (const auto& p : curve) {
        v.detail << " n=" << p.n << " regret " << fmt(p.mean_regret) << " <= " << fmt(p.bound) << ";";
        v.require(p.mean_regret <= p.bound, "regret above the bound at n=" + std::to_string(p.n));
    }

    Stream gen = Stream::keyed({6, 2});
    for (int k = 0; k < 5; ++k) {
        BanditInstance r;
        const int machines = 2 + k % 3, scenarios = 1 + k % 2;
        for (int i = 0; i < machines; ++i) {
            std::vector<CostSampler> row;
            for (int j = 0; j < scenarios; ++j) {
                if ((i + j + k) % 2 == 0) row.push_back(CostSampler::bernoulli(gen.uniform()));
                else {
                    const double a = gen.uniform(), b = gen.uniform();
                    row.push_back(CostSampler::uniform(std::min(a, b), std::max(a, b)));
                }
            }
            r.costs.push_back(std::move(row));
        }
        if (scenarios == 2) r.weights = Eigen::Vector2d(0.3, 0.7);
        const int runs = 200;
        double sum = 0.0, sq = 0.0;
        for (int run = 0; run < runs; ++run) {
            const auto res = play_ucb(r, 2000, Stream::keyed({6, 3, static_cast<std::uint64_t>(k),
                                                              static_cast<std::uint64_t>(run)}));
            const double d = realized_regret(res.ledger) - regret(res.ledger);
            sum += d;
            sq += d * d;
        }
        const double mean = sum / runs;
        const double se = std::sqrt(std::max(0.0, sq / runs - mean * mean) / (runs - 1));
        v.require(std::abs(mean) <= 4.0 * se + 1e-9,
                  "decomposition identity off on instance " + std::to_string(k) + ": " + fmt(mean) + " vs 4se " +
                      fmt(4.0 * se));
        v.detail << " identity " << k << ": " << fmt(mean, 3) << " (se " << fmt(se, 3) << ");";
    }
    return v;
}

Verdict c7_ucb(Context& ctx) {
    Verdict v;
    const Environment env = load(ctx, "inventory.json").env;
    const Posterior mu = uniform_prior(env.family.space());
    const double exact = exact_dp(env, mu, RiskFunctional::expectation()).value;
    const std::vector<int> budgets{100, 1000, 10000};
    std::vector<double> bias, rate;
    for (int n : budgets) {
        double sum = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            UcbOptions o;
            o.budget = n;
            sum += ucb_solve(env, mu, o, Stream::keyed({7, static_cast<std::uint64_t>(n), seed})).value;
        }
        bias.push_back(sum / 100.0 - exact);
        rate.push_back(std::log(static_cast<double>(n)) / n);
        v.detail << " N_t=" << n << " error " << fmt(std::abs(bias.back())) << ";";
    }
    for (std::size_t i = 1; i < bias.size(); ++i)
        v.require(std::abs(bias[i]) <= std::abs(bias[i - 1]), "error increased with the budget");
    v.require(std::abs(bias.back()) <= 0.05, "final error above 0.05");
    const double mb = std::accumulate(bias.begin(), bias.end(), 0.0) / 3.0;
    const double mr = std::accumulate(rate.begin(), rate.end(), 0.0) / 3.0;
    double sbr = 0.0, sbb = 0.0, srr = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        sbr += (bias[i] - mb) * (rate[i] - mr);
        sbb += (bias[i] - mb) * (bias[i] - mb);
        srr += (rate[i] - mr) * (rate[i] - mr);
    }
    const double corr = sbr / std::sqrt(sbb * srr);
    v.detail << " correlation with ln n/n " << fmt(corr) << "; exact " << fmt(exact, 6) << ";";
    v.require(corr > 0.9, "bias does not follow ln n/n");
    return v;
}

Verdict c8_nso(Context& ctx) {
    Verdict v;
    const auto cfg = load(ctx, "inventory.json");
    const Environment& env = cfg.env;
    // Ten observations keep alpha away from a jump of the posterior cdf,
    // where the sample quantile does not converge.
    Stream ds = Stream::keyed({8, 0});
    std::vector<double> data(10);
    for (auto& x : data) x = env.family.sample(cfg.true_theta, ds);
    const Posterior mu = init_from_data(uniform_prior(env.family.space()), env.family, data);
    for (auto rho : {RiskFunctional::expectation(), RiskFunctional::var(0.8), RiskFunctional::cvar(0.8)}) {
        ExactSolver es(env, rho);
        const BeliefId root = es.intern(mu);
        const double exact = es.value(0, env.initial_state, root).value;
        const NextValue next = [&](int, int s2, double xi) {
            const BeliefId nb = std::isnan(xi) ? root : es.store()->successor(root, xi);
            return es.value(1, s2, nb).value;
        };
        const auto r = nso_stage(env, env.initial_state, mu, rho, next, {2000, 2000}, Stream::keyed({8, 1}));
        v.detail << " " << rho.name() << ": nso " << fmt(r.value, 6) << " exact " << fmt(exact, 6) << ";";
        v.require(std::abs(r.value - exact) <= 0.05, rho.name() + " off by more than 0.05");
    }
    return v;
}

Verdict c9_brute_force(Context&) {
    Verdict v;
    const Eigen::Vector2d prior(0.5, 0.5);
    for (const Eigen::Vector2d& atoms : {Eigen::Vector2d(0.3, 0.7), Eigen::Vector2d(0.1, 0.8)}) {
        const Environment env = tiny_environment(atoms);
        const Posterior mu = uniform_prior(env.family.space());
        const double dp = exact_dp(env, mu, RiskFunctional::expectation()).value;
        const double bf = oracle::brute_force_expectation(env, prior);
        v.require(std::abs(dp - bf) <= 1e-10, "expectation differs from enumeration");
        double worst = std::abs(dp - bf);
        for (auto rho : {RiskFunctional::var(0.6), RiskFunctional::cvar(0.6), RiskFunctional::var(0.3),
                         RiskFunctional::cvar(0.3)}) {
            std::vector<double> hist;
            const double o = oracle::nested_oracle(env, prior, rho, 0, env.initial_state, hist);
            const double d = exact_dp(env, mu, rho).value;
            worst = std::max(worst, std::abs(o - d));
            v.require(std::abs(o - d) <= 1e-10, rho.name() + " differs from the nested recursion");
        }
        v.detail << " atoms (" << atoms[0] << ", " << atoms[1] << "): max gap " << fmt(worst, 3) << ";";
    }
    return v;
}

int run_cli(const Context& ctx, const std::string& args) {
    const std::string cmd = "\"" + ctx.cli.string() + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

Verdict c10_determinism(Context& ctx) {
    Verdict v;
    const std::vector<std::string> files{"replications.csv", "summary.csv", "histogram.csv"};
    std::vector<std::pair<std::string, fs::path>> configs;
    for (const char* name : {"inventory.json", "maze_finite.json"}) configs.emplace_back(name, ctx.configs / name);

    // The full continuous-maze run is long; a short copy exercises the same path.
    {
        auto j = read_json(ctx.configs / "maze_continuous.json");
        j["replications"] = 4;
        const fs::path p = ctx.scratch / "maze_continuous_short.json";
        fs::create_directories(ctx.scratch);
        std::ofstream(p) << j.dump(2);
        configs.emplace_back("maze_continuous_short.json", p);
    }

    for (const auto& [name, path] : configs) {
        const std::string stem = fs::path(name).stem().string();
        fs::path one;
        if (auto it = ctx.single_thread_runs.find(name); it != ctx.single_thread_runs.end()) {
            one = it->second;
        } else {
            one = ctx.scratch / "threads1" / stem;
            fs::remove_all(one);
            if (run_cli(ctx, "experiment --config \"" + path.string() + "\" --out \"" + one.string() +
                                 "\" --threads 1") != 0) {
                v.require(false, stem + ": threads 1 run failed");
                continue;
            }
        }
        const fs::path eight = ctx.scratch / "threads8" / stem;
        fs::remove_all(eight);
        if (run_cli(ctx, "experiment --config \"" + path.string() + "\" --out \"" + eight.string() +
                             "\" --threads 8") != 0) {
            v.require(false, stem + ": threads 8 run failed");
            continue;
        }
        for (const auto& f : files) {
            const std::string a = slurp(one / f), b = slurp(eight / f);
            v.require(!a.empty() && a == b, stem + "/" + f + " differs");
        }
        v.detail << " " << stem << " identical;";
    }

    std::string curves[2];
    for (int i = 0; i < 2; ++i) {
        const int threads = i == 0 ? 1 : 8;
        const fs::path out = ctx.scratch / ("bandit_threads" + std::to_string(threads) + ".csv");
        const int rc = run_cli(ctx, "bandit --instance \"" + (ctx.configs / "bandit_example.json").string() +
                                        "\" --out \"" + out.string() + "\" --threads " + std::to_string(threads));
        v.require(rc == 0, "bandit run failed");
        curves[i] = slurp(out);
    }
    v.require(!curves[0].empty() && curves[0] == curves[1], "bandit CSV differs");
    v.detail << " bandit identical;";
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    Context ctx;
    std::vector<int> only;
    app.add_option("--configs", ctx.configs, "Directory with the experiment configs")->required();
    app.add_option("--cli", ctx.cli, "Path to the brmdp executable")->required();
    app.add_option("--scratch", ctx.scratch, "Scratch directory")->required();
    app.add_option("--only", only, "Criteria to run (default: all)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Verdict(Context&)>>> criteria{
        {"ground-truth optima", c1_optima},
        {"inventory benchmark", c2_inventory},
        {"finite-parameter maze benchmark", c3_maze},
        {"continuous-parameter maze benchmark", c4_continuous_maze},
        {"operator laws", c5_operator},
        {"bandit regret", c6_bandit},
        {"UCB solver convergence", c7_ucb},
        {"NSO consistency", c8_nso},
        {"brute-force equivalence", c9_brute_force},
        {"determinism across thread counts", c10_determinism},
    };
    const std::set<int> selected(only.begin(), only.end());
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.contains(id)) continue;
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = criteria[i].second(ctx);
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << " [exception: " << e.what() << "]";
        }
        all = all && v.pass;
        std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << " ("
                  << fmt(seconds_since(t0), 3) << " s):" << v.detail.str() << std::endl;
    }
    return all ? 0 : 1;
}
