#include "brmdp/solvers.hpp"

#include <cmath>

namespace brmdp {

double default_ucb_scale(const Environment& env) {
    const double t = env.horizon ? static_cast<double>(*env.horizon) : 1.0;
    return env.cost_bound > 0.0 ? 1.0 / (env.cost_bound * t) : 1.0;
}

UcbStageResult ucb_stage(const Environment& env, int state, const FinitePosterior& mu, const NextValue& next,
                         int budget, double cost_scale, Stream stream) {
    const auto& acts = env.actions.at(static_cast<std::size_t>(state));
    const auto na = static_cast<Eigen::Index>(acts.size());
    if (budget < na) throw ConfigError("UCB budget must cover one play of every action");
    if (!(cost_scale > 0.0)) throw ConfigError("UCB cost scale must be positive");

    const auto& atoms = *mu.atoms;
    const auto& w = mu.weights;
    const bool observes = env.observes_at(state);
    const double gamma = env.discount;

    // One play: a draw per atom, pooled with the posterior weights.
    const auto play = [&](Eigen::Index ai, int n) {
        const int a = acts[static_cast<std::size_t>(ai)];
        if (!observes) {
            const auto r = step(env, state, a, NAN);
            return r.cost + gamma * next(a, r.next_state, NAN);
        }
        Stream ps = stream.child({static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(n)});
        double y = 0.0;
        for (Eigen::Index i = 0; i < atoms.size(); ++i) {
            if (!(w[i] > 0.0)) continue;
            const double xi = env.family.sample(atoms[i], ps);
            const auto r = step(env, state, a, xi);
            y += w[i] * (r.cost + gamma * next(a, r.next_state, xi));
        }
        return y;
    };

    UcbStageResult out;
    out.q = Eigen::VectorXd::Zero(na);
    out.counts = Eigen::VectorXi::Zero(na);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(na);
    for (Eigen::Index ai = 0; ai < na; ++ai) {
        sum[ai] += play(ai, 0);
        out.counts[ai] = 1;
    }
    for (int n = static_cast<int>(na); n < budget; ++n) {
        const double log_n = std::log(static_cast<double>(n));
        Eigen::Index pick = 0;
        double best = INFINITY;
        for (Eigen::Index ai = 0; ai < na; ++ai) {
            const double idx = cost_scale * sum[ai] / out.counts[ai] - std::sqrt(2.0 * log_n / out.counts[ai]);
            if (idx < best) {
                best = idx;
                pick = ai;
            }
        }
        sum[pick] += play(pick, out.counts[pick]);
        ++out.counts[pick];
    }

    Eigen::Index most = 0;
    for (Eigen::Index ai = 0; ai < na; ++ai) {
        out.q[ai] = sum[ai] / out.counts[ai];
        if (out.counts[ai] > out.counts[most]) most = ai;
    }
    out.value = (out.counts.cast<double>().array() * out.q.array()).sum() / budget;
    out.action = acts[static_cast<std::size_t>(most)];
    return out;
}

namespace {

class UcbSolver {
public:
    UcbSolver(const Environment& env, const UcbOptions& opts, Stream stream)
        : env_(env), opts_(opts), stream_(stream), horizon_(*env.horizon),
          scale_(opts.cost_scale > 0.0 ? opts.cost_scale : default_ucb_scale(env)),
          store_(std::make_shared<BeliefStore>(env.family, opts.grid)),
          table_(std::make_shared<ValueTable>(store_, horizon_)) {}

    StageEntry value(int t, int s, BeliefId b) {
        if (t >= horizon_ || env_.is_terminal(s)) return {0.0, -1};
        if (const auto* e = table_->get(t, s, b)) return *e;

        const Stream node = stream_.child({static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(s),
                                           PosteriorKeyHash{}(store_->key(b))});
        // Per-node memo of next-stage values by (action, xi); xi is integral
        // for every family with a finite Theta that UCB accepts here.
        const double lo = env_.family.support_min();
        std::unordered_map<std::uint64_t, double> cache;
        const NextValue next = [&](int a, int s2, double xi) {
            const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
                                      (std::isnan(xi) ? 0xffffffffu : static_cast<std::uint32_t>(xi - lo));
            if (auto it = cache.find(key); it != cache.end()) return it->second;
            const BeliefId nb = std::isnan(xi) ? b : store_->successor(b, xi);
            const double v = value(t + 1, s2, nb).value;
            cache.emplace(key, v);
            return v;
        };
        const FinitePosterior mu = std::get<FinitePosterior>(store_->posterior(b));
        const UcbStageResult r = ucb_stage(env_, s, mu, next, opts_.budget, scale_, node);
        if (table_->size() >= opts_.max_states)
            throw ConfigError("UCB exceeded the augmented-state cap of " + std::to_string(opts_.max_states));
        const StageEntry e{r.value, r.action};
        table_->set(t, s, b, e);
        return e;
    }

    const Environment& env_;
    UcbOptions opts_;
    Stream stream_;
    int horizon_;
    double scale_;
    std::shared_ptr<BeliefStore> store_;
    std::shared_ptr<ValueTable> table_;
};

}  // namespace

SolveResult ucb_solve(const Environment& env, const Posterior& mu0, const UcbOptions& opts, Stream stream) {
    env.validate();
    if (!env.horizon) throw ConfigError("ucb_solve needs a finite horizon");
    if (!std::holds_alternative<FinitePosterior>(mu0) || !env.family.is_discrete())
        throw ConfigError("UCB sampling needs a finite parameter space and a discrete family");
    UcbSolver solver(env, opts, stream);
    const BeliefId root = solver.store_->intern(mu0);
    const StageEntry e = solver.value(0, env.initial_state, root);
    SolveStats stats;
    stats.augmented_states = solver.table_->size();
    stats.beliefs = solver.store_->size();
    return SolveResult{solver.table_, Policy(solver.table_), e.value, e.action, root, stats};
}

}  // namespace brmdp
