#include "brmdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "brmdp/special.hpp"

namespace brmdp {

// Stream tags for the three independent uses of randomness per replication.
namespace {
constexpr std::uint64_t kTagData = 1, kTagSolve = 2, kTagEval = 3;
}

Posterior make_prior(const PriorSpec& spec, const ParametricFamily& family) {
    const auto& space = family.space();
    switch (spec.kind) {
        case PriorSpec::Kind::uniform: return uniform_prior(space);
        case PriorSpec::Kind::weights: return finite_prior(space, spec.weights);
        case PriorSpec::Kind::normal: {
            if (family.kind() != ParametricFamily::Kind::truncated_normal)
                throw ConfigError("a normal prior needs the truncated-normal family");
            return normal_prior(space, spec.mean, spec.variance, family.stddev());
        }
    }
    throw ConfigError("unknown prior");
}

double mle(const ParametricFamily& family, std::span<const double> data) {
    if (data.empty()) throw DomainError("maximum likelihood needs at least one observation");
    const auto& space = family.space();
    const auto loglik = [&](double th) {
        double s = 0.0;
        for (double x : data) s += family.log_density(th, x);
        return s;
    };
    if (space.is_finite()) {
        const auto& atoms = space.atoms();
        double best = -INFINITY;
        double arg = atoms[0];
        for (double th : atoms) {
            const double ll = loglik(th);
            if (ll > best) {
                best = ll;
                arg = th;
            }
        }
        return arg;
    }

    const auto clamp = [&](double th) {
        th = std::max(th, space.lower());
        if (space.upper()) th = std::min(th, *space.upper());
        return th;
    };
    double sum = 0.0;
    for (double x : data) sum += x;
    const double n = static_cast<double>(data.size());
    switch (family.kind()) {
        case ParametricFamily::Kind::poisson: return clamp(std::max(sum / n, 1e-12));
        case ParametricFamily::Kind::bernoulli: return clamp(sum / n);
        case ParametricFamily::Kind::geometric: return clamp(std::min(1.0, n / sum));
        case ParametricFamily::Kind::truncated_normal: break;
    }

    // The truncated-normal log-likelihood is concave in theta: golden section.
    const double sd = family.stddev();
    const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
    double lo = std::isfinite(space.lower()) ? space.lower() : *mn - 10.0 * sd;
    double hi = space.upper() ? *space.upper() : *mx + 10.0 * sd;
    if (!(hi > lo)) return clamp(lo);
    const auto f = [&](double th) {
        const double za = (family.lower_truncation() - th) / sd;
        double s = -n * log_normal_sf(za);
        for (double x : data) s -= 0.5 * ((x - th) / sd) * ((x - th) / sd);
        return s;
    };
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - r * (hi - lo), b = lo + r * (hi - lo);
    double fa = f(a), fb = f(b);
    while (hi - lo > 1e-10 * std::max(1.0, std::abs(lo))) {
        if (fa < fb) {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    return clamp(0.5 * (lo + hi));
}

Environment plug_in_environment(const Environment& env, double theta) {
    Environment out = env;
    Eigen::VectorXd atom(1);
    atom << theta;
    out.family = env.family.with_space(ParameterSpace::finite(atom));
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

class PolicyEvaluator {
public:
    PolicyEvaluator(const Environment& env, const SolveResult& sol)
        : env_(env), sol_(sol), store_(sol.table->belief_store()) {}

    int action(int t, int s, BeliefId b) {
        if (const auto* e = sol_.table->get(t, s, b); e && e->action >= 0) return e->action;
        const std::uint64_t key = (static_cast<std::uint64_t>(t) << 52) ^ (static_cast<std::uint64_t>(s) << 32) ^ b;
        if (auto it = fallback_.find(key); it != fallback_.end()) return it->second;
        const int a = sol_.policy.action(env_, t, s, store_->posterior(b));
        fallback_.emplace(key, a);
        return a;
    }

    const Environment& env_;
    const SolveResult& sol_;
    std::shared_ptr<BeliefStore> store_;
    std::unordered_map<std::uint64_t, int> fallback_;
};

}  // namespace

Evaluation evaluate_true_performance(const Environment& env, const SolveResult& sol, double theta_c,
                                     const EvaluationSpec& spec, Stream stream) {
    if (!env.horizon) throw ConfigError("evaluation needs a finite horizon");
    const int horizon = *env.horizon;
    env.family.check_parameter(theta_c);
    PolicyEvaluator pe(env, sol);

    if (spec.mode == EvalMode::exact) {
        const TruncatedSupport sup = quantile_support(env.family, theta_c, spec.quadrature_points);
        const Eigen::VectorXd p = sup.probs.row(0).transpose();
        std::vector<std::unordered_map<std::uint64_t, double>> memo(static_cast<std::size_t>(horizon));
        std::function<double(int, int, BeliefId)> value = [&](int t, int s, BeliefId b) -> double {
            if (t >= horizon || env.is_terminal(s)) return 0.0;
            const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) | b;
            auto& m = memo[static_cast<std::size_t>(t)];
            if (auto it = m.find(key); it != m.end()) return it->second;
            const int a = pe.action(t, s, b);
            double v = 0.0;
            if (!env.observes_at(s)) {
                const auto r = step(env, s, a, NAN);
                v = r.cost + env.discount * value(t + 1, r.next_state, b);
            } else {
                for (Eigen::Index k = 0; k < p.size(); ++k) {
                    if (!(p[k] > 0.0)) continue;
                    const double xi = sup.values[k];
                    const auto r = step(env, s, a, xi);
                    const BeliefId nb = pe.store_->successor(b, xi);
                    v += p[k] * (r.cost + env.discount * value(t + 1, r.next_state, nb));
                }
            }
            m.emplace(key, v);
            return v;
        };
        return {value(0, env.initial_state, sol.root), 0.0};
    }

    if (spec.episodes < 2) throw ConfigError("rollout evaluation needs at least two episodes");
    double mean = 0.0, m2 = 0.0;
    for (int e = 0; e < spec.episodes; ++e) {
        Stream es = stream.child(static_cast<std::uint64_t>(e));
        int s = env.initial_state;
        BeliefId b = sol.root;
        double total = 0.0, disc = 1.0;
        for (int t = 0; t < horizon && !env.is_terminal(s); ++t) {
            const int a = pe.action(t, s, b);
            double xi = NAN;
            if (env.observes_at(s)) xi = env.family.sample(theta_c, es);
            const auto r = step(env, s, a, xi);
            if (env.observes_at(s)) b = pe.store_->successor(b, xi);
            total += disc * r.cost;
            disc *= env.discount;
            s = r.next_state;
        }
        const double d = total - mean;
        mean += d / (e + 1);
        m2 += d * (total - mean);
    }
    const double var = m2 / (spec.episodes - 1);
    return {mean, std::sqrt(var / spec.episodes)};
}

// ---------------------------------------------------------------------------
// Solving

SolveResult solve_formulation(const ExperimentConfig& cfg, const FormulationSpec& f,
                              std::span<const double> data, Stream stream, double* estimate) {
    const Environment& env = cfg.env;
    if (f.empirical) {
        // With no data the plug-in estimate falls back to the prior mean.
        const double th = data.empty() ? posterior_mean(make_prior(cfg.prior, env.family)) : mle(env.family, data);
        if (estimate) *estimate = th;
        const Environment plug = plug_in_environment(env, th);
        ExactOptions opts = cfg.solver ? cfg.solver->exact : ExactOptions{};
        opts.quadrature_points = cfg.evaluation.quadrature_points;
        return exact_dp(plug, point_mass(plug.family.space(), th), RiskFunctional::expectation(), opts);
    }

    const Posterior mu0 = init_from_data(make_prior(cfg.prior, env.family), env.family, data);
    if (estimate) *estimate = posterior_mean(mu0);
    SolverSpec spec;
    if (cfg.solver) {
        spec = *cfg.solver;
    } else {
        spec.kind = env.family.space().is_finite() ? SolverKind::exact : SolverKind::nso;
    }
    switch (spec.kind) {
        case SolverKind::exact: return exact_dp(env, mu0, f.rho, spec.exact);
        case SolverKind::nso: return nso_solve(env, mu0, f.rho, spec.nso, stream);
        case SolverKind::ucb:
            if (f.rho.kind != RiskFunctional::Kind::expectation)
                throw ConfigError("UCB sampling supports the expectation only");
            return ucb_solve(env, mu0, spec.ucb, stream);
    }
    throw ConfigError("unknown solver");
}

double true_optimum(const ExperimentConfig& cfg) {
    if (cfg.v_star) return *cfg.v_star;
    const Environment plug = plug_in_environment(cfg.env, cfg.true_theta);
    ExactOptions opts = cfg.solver ? cfg.solver->exact : ExactOptions{};
    opts.quadrature_points = cfg.evaluation.quadrature_points;
    return exact_dp(plug, point_mass(plug.family.space(), cfg.true_theta), RiskFunctional::expectation(), opts)
        .value;
}

// ---------------------------------------------------------------------------
// Experiment driver

std::vector<SummaryRow> summarize(const std::vector<ReplicationResult>& results,
                                  const std::vector<FormulationSpec>& formulations,
                                  const std::vector<int>& data_sizes, double v_star) {
    std::vector<SummaryRow> rows;
    for (const auto& f : formulations) {
        for (int h : data_sizes) {
            SummaryRow row;
            row.formulation = f.label;
            row.data_size = h;
            double sum = 0.0;
            std::vector<double> vals;
            for (const auto& r : results) {
                if (r.formulation != f.label || r.data_size != h) continue;
                if (!r.ok) {
                    ++row.failures;
                    continue;
                }
                vals.push_back(r.true_performance);
                sum += r.true_performance;
            }
            row.replications = static_cast<int>(vals.size());
            if (!vals.empty()) {
                const double n = static_cast<double>(vals.size());
                row.average = sum / n;
                double ss = 0.0, dd = 0.0;
                for (double v : vals) {
                    ss += (v - row.average) * (v - row.average);
                    const double rel = (v - v_star) / v_star;
                    dd += rel * rel;
                }
                row.std = std::sqrt(ss / n);
                row.d_value = dd / n;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, int threads, std::ostream* log) {
    if (cfg.replications < 1) throw ConfigError("replications must be at least 1");
    if (cfg.formulations.empty()) throw ConfigError("at least one formulation is required");
    for (int h : cfg.data_sizes)
        if (h < 0) throw ConfigError("data sizes must be non-negative");
    cfg.env.family.check_parameter(cfg.true_theta);

    ExperimentOutput out;
    out.v_star = true_optimum(cfg);
    const Stream root = Stream::keyed({cfg.seed});

    struct Task {
        int h, j;
    };
    std::vector<Task> tasks;
    for (int h : cfg.data_sizes)
        for (int j = 0; j < cfg.replications; ++j) tasks.push_back({h, j});
    std::vector<std::vector<ReplicationResult>> slots(tasks.size());

    const auto run_task = [&](std::size_t idx) {
        const Task task = tasks[idx];
        const auto uh = static_cast<std::uint64_t>(task.h), uj = static_cast<std::uint64_t>(task.j);
        Stream ds = root.child({kTagData, uh, uj});
        std::vector<double> data(static_cast<std::size_t>(task.h));
        for (auto& x : data) x = cfg.env.family.sample(cfg.true_theta, ds);

        for (std::size_t fi = 0; fi < cfg.formulations.size(); ++fi) {
            const auto& f = cfg.formulations[fi];
            ReplicationResult r;
            r.formulation = f.label;
            r.data_size = task.h;
            r.replication = task.j;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const SolveResult sol =
                    solve_formulation(cfg, f, data, root.child({kTagSolve, uh, uj, fi}), &r.estimate);
                r.solver_value = sol.value;
                r.augmented_states = sol.stats.augmented_states;
                for (int t = 0; t < sol.table->stages(); ++t) r.stage_sizes.push_back(sol.table->size(t));
                const Evaluation ev = evaluate_true_performance(cfg.env, sol, cfg.true_theta, cfg.evaluation,
                                                                root.child({kTagEval, uh, uj, fi}));
                r.true_performance = ev.value;
                r.std_error = ev.std_error;
                r.ok = true;
            } catch (const std::exception& e) {
                r.ok = false;
                r.message = e.what();
            }
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            slots[idx].push_back(std::move(r));
        }
    };

    const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) run_task(i);
    };
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    }

    for (auto& s : slots)
        for (auto& r : s) out.results.push_back(std::move(r));
    out.summary = summarize(out.results, cfg.formulations, cfg.data_sizes, out.v_star);

    if (log) {
        for (const auto& r : out.results) {
            nlohmann::json j = {{"experiment", cfg.name},        {"formulation", r.formulation},
                                {"data_size", r.data_size},      {"replication", r.replication},
                                {"ok", r.ok},                    {"seconds", r.seconds},
                                {"augmented_states", r.augmented_states}, {"stage_sizes", r.stage_sizes}};
            if (!r.ok) j["error"] = r.message;
            *log << j.dump() << '\n';
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

std::string format_double(double x) {
    if (std::isnan(x)) return "";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

namespace {

void write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << csv_field(fields[i]);
    }
    os << "\r\n";
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

}  // namespace

void emit(const ExperimentOutput& out, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto os = open_out(dir / "replications.csv");
        write_row(os, {"formulation", "data_size", "replication", "estimate", "solver_value", "true_performance",
                       "std_error", "augmented_states", "status", "message"});
        for (const auto& r : out.results)
            write_row(os, {r.formulation, std::to_string(r.data_size), std::to_string(r.replication),
                           format_double(r.estimate), format_double(r.solver_value),
                           format_double(r.true_performance), format_double(r.std_error),
                           std::to_string(r.augmented_states), r.ok ? "ok" : "failed", r.message});
    }
    {
        auto os = open_out(dir / "summary.csv");
        write_row(os, {"formulation", "data_size", "replications", "failures", "average", "std", "d_value",
                       "v_star"});
        for (const auto& s : out.summary)
            write_row(os, {s.formulation, std::to_string(s.data_size), std::to_string(s.replications),
                           std::to_string(s.failures), format_double(s.average), format_double(s.std),
                           format_double(s.d_value), format_double(out.v_star)});
    }
    {
        const double w = cfg.histogram_bin;
        if (!(w > 0.0)) throw ConfigError("histogram bin width must be positive");
        auto os = open_out(dir / "histogram.csv");
        write_row(os, {"formulation", "data_size", "bin_lower", "bin_upper", "count"});
        for (const auto& f : cfg.formulations) {
            for (int h : cfg.data_sizes) {
                std::map<long long, int> bins;
                for (const auto& r : out.results)
                    if (r.ok && r.formulation == f.label && r.data_size == h)
                        ++bins[static_cast<long long>(std::floor(r.true_performance / w + 1e-9))];
                for (const auto& [k, c] : bins)
                    write_row(os, {f.label, std::to_string(h), format_double(static_cast<double>(k) * w),
                                   format_double(static_cast<double>(k + 1) * w), std::to_string(c)});
            }
        }
    }
}

}  // namespace brmdp
